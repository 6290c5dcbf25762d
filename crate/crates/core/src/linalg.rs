//! Banded LU factorizations with partial pivoting.

/// Factorization of a general tridiagonal matrix. Row interchanges create a
/// second superdiagonal `du2`.
#[derive(Debug, Clone)]
pub struct TridiagLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagLu {
    /// Factors the matrix with subdiagonal `sub`, diagonal `diag` and
    /// superdiagonal `sup`. Returns `None` on an exactly zero pivot.
    pub fn factor(sub: &[f64], diag: &[f64], sup: &[f64]) -> Option<Self> {
        let n = diag.len();
        assert!(n > 0 && sub.len() + 1 == n && sup.len() + 1 == n);
        let mut dl = sub.to_vec();
        let mut d = diag.to_vec();
        let mut du = sup.to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];

        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    return None;
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 1 < n - 1 {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du2[i];
                }
                swapped[i] = true;
            }
        }
        if d[n - 1] == 0.0 {
            return None;
        }
        Some(Self { dl, d, du, du2, swapped })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// Solves `M x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.len();
        assert_eq!(b.len(), n);
        // L y = P b
        for i in 0..n - 1 {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        // U x = y
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// LU factorization of a general band matrix with `kl` sub- and `ku`
/// superdiagonals, in the `gbtrf` layout: row interchanges widen the upper
/// band to `kl + ku`.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row-major band storage, `ldab = 2 kl + ku + 1` entries per column.
    ab: Vec<f64>,
    piv: Vec<usize>,
}

/// Band matrix under assembly, stored by columns with room for fill-in.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self { n, kl, ku, ab: vec![0.0; n * (2 * kl + ku + 1)] }
    }

    fn ldab(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        // Entry (i, j) lives in column j at band row kl + ku + i - j.
        j * self.ldab() + self.kl + self.ku + i - j
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i <= j + self.kl && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.ab[self.idx(i, j)]
        } else {
            0.0
        }
    }

    /// Sets entry `(i, j)`; panics outside the declared band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside the band");
        let k = self.idx(i, j);
        self.ab[k] = v;
    }

    /// Clears row `i`.
    pub fn clear_row(&mut self, i: usize) {
        let lo = i.saturating_sub(self.kl);
        let hi = (i + self.ku).min(self.n - 1);
        for j in lo..=hi {
            self.set(i, j, 0.0);
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Factors the matrix; `None` on an exactly zero pivot.
    pub fn factor(self) -> Option<BandLu> {
        let BandMatrix { n, kl, ku, mut ab } = self;
        let ldab = 2 * kl + ku + 1;
        let at = |i: usize, j: usize| j * ldab + kl + ku + i - j;
        let mut piv = vec![0; n];
        for j in 0..n {
            let last = (j + kl).min(n - 1);
            let p = (j..=last)
                .max_by(|&a, &b| ab[at(a, j)].abs().total_cmp(&ab[at(b, j)].abs()))
                .unwrap_or(j);
            piv[j] = p;
            if ab[at(p, j)] == 0.0 {
                return None;
            }
            let right = (j + kl + ku).min(n - 1);
            if p != j {
                for c in j..=right {
                    ab.swap(at(p, c), at(j, c));
                }
            }
            let pivot = ab[at(j, j)];
            for i in j + 1..=last {
                let l = ab[at(i, j)] / pivot;
                ab[at(i, j)] = l;
                if l != 0.0 {
                    for c in j + 1..=right {
                        ab[at(i, c)] -= l * ab[at(j, c)];
                    }
                }
            }
        }
        Some(BandLu { n, kl, ku, ab, piv })
    }
}

impl BandLu {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.ab[j * (2 * self.kl + self.ku + 1) + self.kl + self.ku + i - j]
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        for j in 0..n {
            b.swap(j, self.piv[j]);
            let bj = b[j];
            for i in j + 1..=(j + self.kl).min(n - 1) {
                b[i] -= self.at(i, j) * bj;
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.at(j, j);
            let bj = b[j];
            for i in j.saturating_sub(self.kl + self.ku)..j {
                b[i] -= self.at(i, j) * bj;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matvec(sub: &[f64], diag: &[f64], sup: &[f64], x: &[f64]) -> Vec<f64> {
        let n = diag.len();
        (0..n)
            .map(|i| {
                let mut v = diag[i] * x[i];
                if i > 0 {
                    v += sub[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    v += sup[i] * x[i + 1];
                }
                v
            })
            .collect()
    }

    #[test]
    fn needs_pivoting() {
        // Zero leading pivot forces an interchange.
        let sub = [1.0, 2.0];
        let diag = [0.0, 1.0, 3.0];
        let sup = [1.0, 1.0];
        let lu = TridiagLu::factor(&sub, &diag, &sup).unwrap();
        let b = [1.0, 2.0, 3.0];
        let x = lu.solve(&b);
        let r = matvec(&sub, &diag, &sup, &x);
        for (ri, bi) in r.iter().zip(b) {
            assert!((ri - bi).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_detected() {
        assert!(TridiagLu::factor(&[0.0], &[0.0, 1.0], &[0.0]).is_none());
    }

    #[test]
    fn band_matches_tridiagonal() {
        let sub = [1.0, 2.0, -1.0];
        let diag = [0.0, 1.0, 3.0, 2.0];
        let sup = [1.0, 1.0, 0.5];
        let mut m = BandMatrix::zeros(4, 1, 1);
        for i in 0..4 {
            m.set(i, i, diag[i]);
            if i > 0 {
                m.set(i, i - 1, sub[i - 1]);
                m.set(i - 1, i, sup[i - 1]);
            }
        }
        let b = [1.0, -2.0, 0.5, 4.0];
        let mut x = b;
        m.factor().unwrap().solve_in_place(&mut x);
        let y = TridiagLu::factor(&sub, &diag, &sup).unwrap().solve(&b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-13);
        }
    }

    proptest! {
        #[test]
        fn band_solves_random_systems(
            n in 1usize..30,
            kl in 0usize..4,
            ku in 0usize..4,
            vals in proptest::collection::vec(-1.0f64..1.0, 30 * 9),
        ) {
            let mut m = BandMatrix::zeros(n, kl, ku);
            let mut k = 0;
            for i in 0..n {
                for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                    let v = if i == j { vals[k] + 4.0 * vals[k].signum() } else { vals[k] };
                    m.set(i, j, v);
                    k += 1;
                }
            }
            let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
            let mut x = b.clone();
            m.clone().factor().unwrap().solve_in_place(&mut x);
            let r = m.mul_vec(&x);
            for (ri, bi) in r.iter().zip(&b) {
                prop_assert!((ri - bi).abs() < 1e-10);
            }
        }


        #[test]
        fn solves_random_systems(
            n in 1usize..40,
            seed in proptest::collection::vec(-1.0f64..1.0, 120),
        ) {
            let sub: Vec<f64> = seed[..n.saturating_sub(1)].to_vec();
            let sup: Vec<f64> = seed[40..40 + n.saturating_sub(1)].to_vec();
            let diag: Vec<f64> = seed[80..80 + n].iter().map(|v| v + 3.0 * v.signum()).collect();
            let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
            let lu = TridiagLu::factor(&sub, &diag, &sup).unwrap();
            let x = lu.solve(&b);
            let r = matvec(&sub, &diag, &sup, &x);
            for (ri, bi) in r.iter().zip(&b) {
                prop_assert!((ri - bi).abs() < 1e-10);
            }
        }
    }
}
