//! Grid functions on a truncated line and the second-order finite difference
//! operators of the reduced system.
//!
//! All stencils are central and values beyond `±L` are taken to be zero, so
//! the discrete `L₋` is exactly the transpose of the discrete `L₊`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::TridiagLu;
use crate::params::ReducedParams;

/// Largest spacing for which the O(h²) stencils are considered accurate.
pub const MAX_SPACING: f64 = 0.1;

/// `sign(t)|t|^e`, i.e. `|t|^{r-2} t` for `e = r - 1`; zero at `t = 0`.
#[inline]
pub fn signed_pow(t: f64, e: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t.signum() * t.abs().powf(e)
    }
}

/// Uniform symmetric grid `s_i = (i - half) h`, `i = 0..=2 half`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineGrid {
    half: usize,
    h: f64,
}

impl LineGrid {
    /// Grid of half-length `L` with `2⌊L/h⌋+1` nodes; the spacing is adjusted
    /// to `L/⌊L/h⌋` so that both end points are nodes.
    pub fn new(half_length: f64, spacing: f64) -> Result<Self> {
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "half-length L = {half_length} must be positive"
            )));
        }
        if !(spacing > 0.0 && spacing <= MAX_SPACING) {
            return Err(Error::InvalidParams(format!(
                "spacing h = {spacing} must lie in (0, {MAX_SPACING}]"
            )));
        }
        let half = (half_length / spacing + 1e-9).floor() as usize;
        if half < 2 {
            return Err(Error::InvalidParams(format!(
                "grid with L = {half_length}, h = {spacing} has fewer than 5 nodes"
            )));
        }
        Ok(Self { half, h: half_length / half as f64 })
    }

    /// Rebuilds a grid from sampled node positions, which must be of the
    /// form produced by [`LineGrid::nodes`].
    pub fn from_nodes(s: &[f64]) -> Result<Self> {
        if s.len() < 5 || s.len() % 2 == 0 {
            return Err(Error::Parse(format!(
                "grid needs an odd number of at least 5 nodes, got {}",
                s.len()
            )));
        }
        let half = (s.len() - 1) / 2;
        let h = s[half + 1];
        let grid = Self { half, h };
        if !(h > 0.0 && h <= MAX_SPACING) {
            return Err(Error::Parse(format!("invalid grid spacing {h}")));
        }
        for (i, (&si, ref_s)) in s.iter().zip(grid.nodes()).enumerate() {
            if (si - ref_s).abs() > 1e-9 * h {
                return Err(Error::Parse(format!(
                    "node {i} at {si} is not on the canonical grid (expected {ref_s})"
                )));
            }
        }
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        2 * self.half + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn half(&self) -> usize {
        self.half
    }

    pub fn center(&self) -> usize {
        self.half
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn half_length(&self) -> f64 {
        self.half as f64 * self.h
    }

    pub fn node(&self, i: usize) -> f64 {
        (i as f64 - self.half as f64) * self.h
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.node(i))
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes().map(f).collect()
    }

    /// Discrete `∫ · ds` (rectangle rule; exact up to the tails for
    /// functions vanishing at `±L`).
    pub fn integrate(&self, v: &[f64]) -> f64 {
        self.h * v.iter().sum::<f64>()
    }
}

/// Sampled pair `(g, f)` of the reduced system.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPair {
    pub grid: LineGrid,
    pub g: Vec<f64>,
    pub f: Vec<f64>,
    pub red: ReducedParams,
}

impl TrajectoryPair {
    pub fn new(grid: LineGrid, g: Vec<f64>, f: Vec<f64>, red: ReducedParams) -> Result<Self> {
        if g.len() != grid.len() || f.len() != grid.len() {
            return Err(Error::InvalidParams(format!(
                "trajectory arrays have {} / {} entries, grid has {}",
                g.len(),
                f.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, g, f, red })
    }

    pub fn zeros(grid: LineGrid, red: ReducedParams) -> Self {
        Self { grid, g: vec![0.0; grid.len()], f: vec![0.0; grid.len()], red }
    }

    pub fn g_prime(&self) -> Vec<f64> {
        derivative(&self.grid, &self.g)
    }

    pub fn f_prime(&self) -> Vec<f64> {
        derivative(&self.grid, &self.f)
    }

    /// Hamiltonian state at node `i` with derivatives from central differences.
    pub fn state_at(&self, i: usize) -> HamiltonianState {
        let gp = central(&self.g, i, self.grid.spacing());
        let fp = central(&self.f, i, self.grid.spacing());
        HamiltonianState::from_line(self.g[i], self.f[i], gp, fp, &self.red)
    }
}

/// State `X = (x₁, x₂) = (g, f)`, `Y = (y₁, y₂) = (f' + A f, g' - A g)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianState {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl HamiltonianState {
    pub fn from_line(g: f64, f: f64, gp: f64, fp: f64, red: &ReducedParams) -> Self {
        let a = red.drift;
        Self { x: [g, f], y: [fp + a * f, gp - a * g] }
    }

    /// Inverse of [`HamiltonianState::from_line`]: `(g, f, g', f')`.
    pub fn to_line(&self, red: &ReducedParams) -> [f64; 4] {
        let a = red.drift;
        let [g, f] = self.x;
        [g, f, self.y[1] + a * g, self.y[0] - a * f]
    }

    pub fn norm_inf(&self) -> f64 {
        self.x.iter().chain(&self.y).fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[inline]
fn at(v: &[f64], i: isize) -> f64 {
    if i < 0 || i as usize >= v.len() {
        0.0
    } else {
        v[i as usize]
    }
}

#[inline]
fn central(v: &[f64], i: usize, h: f64) -> f64 {
    let i = i as isize;
    (at(v, i + 1) - at(v, i - 1)) / (2.0 * h)
}

/// Central first difference with zero extension.
pub fn derivative(grid: &LineGrid, v: &[f64]) -> Vec<f64> {
    let h = grid.spacing();
    (0..v.len()).map(|i| central(v, i, h)).collect()
}

/// Central second difference with zero extension.
pub fn second_derivative(grid: &LineGrid, v: &[f64]) -> Vec<f64> {
    let h2 = grid.spacing() * grid.spacing();
    (0..v.len() as isize)
        .map(|i| (at(v, i + 1) - 2.0 * at(v, i) + at(v, i - 1)) / h2)
        .collect()
}

/// Tridiagonal coefficients `(sub, diag, sup)` of `-φ'' + 2cφ' + Γφ`.
pub fn operator_bands(grid: &LineGrid, drift: f64, gamma: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let h = grid.spacing();
    let n = grid.len();
    let inv_h2 = 1.0 / (h * h);
    let adv = drift / h;
    (
        vec![-inv_h2 - adv; n - 1],
        vec![2.0 * inv_h2 + gamma; n],
        vec![-inv_h2 + adv; n - 1],
    )
}

/// `-φ'' + 2cφ' + Γφ` with drift `c`.
pub fn apply_drift_operator(grid: &LineGrid, drift: f64, gamma: f64, v: &[f64]) -> Vec<f64> {
    let h = grid.spacing();
    let inv_h2 = 1.0 / (h * h);
    let adv = drift / h;
    (0..v.len() as isize)
        .map(|i| {
            let (l, c, r) = (at(v, i - 1), at(v, i), at(v, i + 1));
            -(r - 2.0 * c + l) * inv_h2 + adv * (r - l) + gamma * c
        })
        .collect()
}

/// `L₊g = -g'' + 2A g' + Γ g`.
pub fn apply_lplus(grid: &LineGrid, red: &ReducedParams, g: &[f64]) -> Vec<f64> {
    apply_drift_operator(grid, red.drift, red.gamma, g)
}

/// `L₋f = -f'' - 2A f' + Γ f`.
pub fn apply_lminus(grid: &LineGrid, red: &ReducedParams, f: &[f64]) -> Vec<f64> {
    apply_drift_operator(grid, -red.drift, red.gamma, f)
}

/// LU factorization of the drift operator, or `None` if it is singular on
/// the grid.
pub fn factor_drift_operator(grid: &LineGrid, drift: f64, gamma: f64) -> Option<TridiagLu> {
    let (sub, diag, sup) = operator_bands(grid, drift, gamma);
    TridiagLu::factor(&sub, &diag, &sup)
}

/// Pointwise `E = g'f' - Γ g f + |g|^q/q + |f|^p/p`.
pub fn energy(t: &TrajectoryPair) -> Vec<f64> {
    energy_terms(t).into_iter().map(|[a, b, c, d]| a + b + c + d).collect()
}

/// The four summands of the energy at each node.
pub fn energy_terms(t: &TrajectoryPair) -> Vec<[f64; 4]> {
    let gp = t.g_prime();
    let fp = t.f_prime();
    let (p, q, gamma) = (t.red.p, t.red.q, t.red.gamma);
    (0..t.g.len())
        .map(|i| {
            let (g, f) = (t.g[i], t.f[i]);
            [gp[i] * fp[i], -gamma * g * f, g.abs().powf(q) / q, f.abs().powf(p) / p]
        })
        .collect()
}

/// `H(X,Y) = y₁y₂ + A(x₁y₁ - x₂y₂) - (A²+Γ)x₁x₂ + |x₁|^q/q + |x₂|^p/p`.
pub fn hamiltonian(st: &HamiltonianState, red: &ReducedParams) -> f64 {
    let a = red.drift;
    let [x1, x2] = st.x;
    let [y1, y2] = st.y;
    y1 * y2 + a * (x1 * y1 - x2 * y2) - (a * a + red.gamma) * x1 * x2
        + x1.abs().powf(red.q) / red.q
        + x2.abs().powf(red.p) / red.p
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemResidual {
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    /// Sup-norms of `r1`, `r2` over interior nodes.
    pub norms: (f64, f64),
}

/// Sup-norm over the interior nodes `1..len-1`.
pub fn interior_sup(v: &[f64]) -> f64 {
    if v.len() < 3 {
        return 0.0;
    }
    v[1..v.len() - 1].iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// `v(s - τ)` by cubic Lagrange interpolation with zero extension.
pub fn translate(v: &[f64], tau_over_h: f64) -> Vec<f64> {
    let n = v.len() as isize;
    let at = |k: isize| if (0..n).contains(&k) { v[k as usize] } else { 0.0 };
    (0..n)
        .map(|i| {
            let u = i as f64 - tau_over_h;
            let k = u.floor() as isize;
            let t = u - k as f64;
            let (p0, p1, p2, p3) = (at(k - 1), at(k), at(k + 1), at(k + 2));
            -t * (t - 1.0) * (t - 2.0) / 6.0 * p0 + (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0 * p1
                - (t + 1.0) * t * (t - 2.0) / 2.0 * p2
                + (t + 1.0) * t * (t - 1.0) / 6.0 * p3
        })
        .collect()
}

/// `r1 = L₊g - |f|^{p-2}f`, `r2 = L₋f - |g|^{q-2}g`.
pub fn system_residual(t: &TrajectoryPair) -> SystemResidual {
    let lg = apply_lplus(&t.grid, &t.red, &t.g);
    let lf = apply_lminus(&t.grid, &t.red, &t.f);
    let r1: Vec<f64> = lg.iter().zip(&t.f).map(|(l, &f)| l - signed_pow(f, t.red.p - 1.0)).collect();
    let r2: Vec<f64> = lf.iter().zip(&t.g).map(|(l, &g)| l - signed_pow(g, t.red.q - 1.0)).collect();
    let norms = (interior_sup(&r1), interior_sup(&r2));
    SystemResidual { r1, r2, norms }
}

/// Five-point evaluation of `g'''' - 2(2A²+Γ)g'' + Γ²g - |g|^{q-2}g`; only
/// defined for `p = 2`.
pub fn fourth_order_residual(grid: &LineGrid, red: &ReducedParams, g: &[f64]) -> Result<Vec<f64>> {
    if red.p != 2.0 {
        return Err(Error::Precondition(format!(
            "fourth-order reduction requires p = 2, got p = {}",
            red.p
        )));
    }
    let h = grid.spacing();
    let h2 = h * h;
    let h4 = h2 * h2;
    let (a, gamma) = (red.drift, red.gamma);
    let c2 = 2.0 * (2.0 * a * a + gamma);
    Ok((0..g.len() as isize)
        .map(|i| {
            let (m2, m1, c, p1, p2) =
                (at(g, i - 2), at(g, i - 1), at(g, i), at(g, i + 1), at(g, i + 2));
            let d4 = (p2 - 4.0 * p1 + 6.0 * c - 4.0 * m1 + m2) / h4;
            let d2 = (p1 - 2.0 * c + m1) / h2;
            d4 - c2 * d2 + gamma * gamma * c - signed_pow(c, red.q - 1.0)
        })
        .collect())
}
