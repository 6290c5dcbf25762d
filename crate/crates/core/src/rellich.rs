//! Weighted Rellich constants for radial functions and the logarithmic
//! change of variables that turns `∫|x|^α |Δu|^θ` into a one-dimensional
//! integral over the line.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::operators::LineGrid;

/// A `(n, θ, α)` triple with its derived line coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RellichParams {
    pub n: u32,
    pub theta: f64,
    pub alpha: f64,
    /// Zeroth-order coefficient `((n+α)/θ − 2)(n − (n+α)/θ)`.
    pub gamma: f64,
    /// First-order coefficient `(2(θ−α) + n(θ−2)) / (2θ)`.
    pub drift: f64,
}

impl RellichParams {
    pub fn new(n: u32, theta: f64, alpha: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParams(format!("n = {n} must be at least 2")));
        }
        if !(theta > 1.0) || !theta.is_finite() {
            return Err(Error::InvalidParams(format!("theta = {theta} must exceed 1")));
        }
        if !alpha.is_finite() {
            return Err(Error::InvalidParams(format!("alpha = {alpha} must be finite")));
        }
        let nf = n as f64;
        Ok(Self {
            n,
            theta,
            alpha,
            gamma: gamma_appendix(n, theta, alpha),
            drift: (2.0 * (theta - alpha) + nf * (theta - 2.0)) / (2.0 * theta),
        })
    }

    /// Weight exponent `γ = (n+α)/θ − 2` in `u = r^{−γ} g(−ln r)`.
    pub fn weight_exponent(&self) -> f64 {
        (self.n as f64 + self.alpha) / self.theta - 2.0
    }
}

pub fn gamma_appendix(n: u32, theta: f64, alpha: f64) -> f64 {
    let t = (n as f64 + alpha) / theta;
    (t - 2.0) * (n as f64 - t)
}

/// `min_{k ≥ 0} |Γ + k(n−2+k)|²` with `Γ = gamma_appendix(n, 2, α)`, and the
/// smallest minimizing `k`.
///
/// `k ↦ Γ + k(n−2+k)` is increasing, so once it exceeds `|Γ|` every further
/// term is worse than `k = 0` and the scan can stop.
pub fn mu2(n: u32, alpha: f64) -> (f64, u64) {
    let gamma = gamma_appendix(n, 2.0, alpha);
    let shift = n as f64 - 2.0;
    let mut best = (gamma * gamma, 0u64);
    let mut k = 0u64;
    loop {
        k += 1;
        let kf = k as f64;
        let val = gamma + kf * (shift + kf);
        let sq = val * val;
        if sq < best.0 {
            best = (sq, k);
        }
        if val > gamma.abs() {
            break;
        }
    }
    best
}

/// Best radial Rellich constant `μ_θ(α)`.
///
/// Equals `|Γ|^θ` when `Γ ≥ 0`; for `Γ < 0` only the quadratic case has a
/// closed form, which is [`mu2`].
pub fn mu_theta(n: u32, theta: f64, alpha: f64) -> Result<f64> {
    let rp = RellichParams::new(n, theta, alpha)?;
    if rp.gamma >= 0.0 {
        Ok(rp.gamma.powf(theta))
    } else if theta == 2.0 {
        Ok(mu2(n, alpha).0)
    } else {
        Err(Error::Precondition(format!(
            "formula unavailable: Gamma = {} < 0 with theta = {theta} != 2",
            rp.gamma
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaBound {
    Finite(f64),
    Unbounded,
}

/// Upper exponent `θn/(n−2θ)` for `n > 2θ`; no bound otherwise.
pub fn theta_double_star(n: u32, theta: f64) -> ThetaBound {
    let nf = n as f64;
    if nf > 2.0 * theta {
        ThetaBound::Finite(theta * nf / (nf - 2.0 * theta))
    } else {
        ThetaBound::Unbounded
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsometryReport {
    /// `∫ r^{α+n−1} |Δu|^θ dr`, evaluated in physical radius.
    pub lhs: f64,
    /// `∫ |g″ − 2Ag′ − Γg|^θ ds` for `g(s) = r^γ u(r)`, `r = e^{−s}`.
    pub rhs: f64,
    pub defect: f64,
}

/// Compares the two sides of the radial change of variables on a sampled
/// profile. `u[i]` is the value at radius `e^{−s_i}` of `grid`.
///
/// The left side differentiates `u` in `r` with nonuniform three-point
/// stencils on the geometric radii; the right side differentiates `g` on the
/// uniform line grid. Both are second order, so the defect is `O(h²)` for
/// smooth decaying profiles. The endpoints carry no stencil and are skipped.
pub fn radial_isometry_check(
    grid: &LineGrid,
    u: &[f64],
    n: u32,
    theta: f64,
    alpha: f64,
) -> Result<IsometryReport> {
    let rp = RellichParams::new(n, theta, alpha)?;
    if u.len() != grid.len() {
        return Err(Error::Precondition(format!(
            "profile has {} values for {} nodes",
            u.len(),
            grid.len()
        )));
    }
    let h = grid.spacing();
    let r: Vec<f64> = grid.nodes().map(|si| (-si).exp()).collect();
    let gamma_w = rp.weight_exponent();
    let g: Vec<f64> = r.iter().zip(u).map(|(&ri, &ui)| ri.powf(gamma_w) * ui).collect();
    let nf = n as f64;

    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for i in 1..u.len() - 1 {
        // Radii decrease with i, so the left neighbour in r is i + 1.
        let (rm, r0, rp_) = (r[i + 1], r[i], r[i - 1]);
        let (um, u0, up) = (u[i + 1], u[i], u[i - 1]);
        let dm = r0 - rm;
        let dp = rp_ - r0;
        let ur = (dm * dm * (up - u0) + dp * dp * (u0 - um)) / (dm * dp * (dm + dp));
        let urr = 2.0 * (dm * (up - u0) - dp * (u0 - um)) / (dm * dp * (dm + dp));
        let lap = urr + (nf - 1.0) / r0 * ur;
        lhs += h * r0.powf(alpha + nf) * lap.abs().powf(theta);

        let g1 = (g[i + 1] - g[i - 1]) / (2.0 * h);
        let g2 = (g[i + 1] - 2.0 * g[i] + g[i - 1]) / (h * h);
        let line = g2 - 2.0 * rp.drift * g1 - rp.gamma * g[i];
        rhs += h * line.abs().powf(theta);
    }
    let defect = (lhs - rhs).abs() / lhs.max(f64::MIN_POSITIVE);
    Ok(IsometryReport { lhs, rhs, defect })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gamma_examples() {
        assert!((gamma_appendix(5, 2.0, 0.0) - 1.25).abs() < 1e-12);
        assert!((gamma_appendix(4, 2.0, 2.0) - 1.0).abs() < 1e-12);
        assert!((gamma_appendix(4, 2.0, 6.0) + 3.0).abs() < 1e-12);
    }

    #[test]
    fn mu2_examples() {
        assert_eq!(mu2(5, 0.0), (25.0 / 16.0, 0));
        assert_eq!(mu2(4, 6.0), (0.0, 1));
        assert_eq!(mu2(4, 2.0), (1.0, 0));
        // Classical Rellich constant n²(n−4)²/16 at α = 0.
        for n in 5..12u32 {
            let nf = n as f64;
            let classical = nf * nf * (nf - 4.0) * (nf - 4.0) / 16.0;
            assert!((mu2(n, 0.0).0 - classical).abs() <= 1e-12 * classical);
        }
    }

    #[test]
    fn mu_theta_examples() {
        assert_eq!(mu_theta(4, 2.0, 2.0).unwrap(), 1.0);
        assert_eq!(mu_theta(5, 2.0, 0.0).unwrap(), 25.0 / 16.0);
        // Γ never exceeds ((n−2)/2)², so Γ = 2 needs n ≥ 5: (5+4)/3 = 3 gives (1)(2).
        assert!((gamma_appendix(5, 3.0, 4.0) - 2.0).abs() < 1e-12);
        assert!((mu_theta(5, 3.0, 4.0).unwrap() - 8.0).abs() < 1e-12);
        assert_eq!(mu_theta(4, 2.0, 6.0).unwrap(), 0.0);
        assert!(matches!(mu_theta(4, 3.0, 11.0), Err(Error::Precondition(_))));
        assert!(matches!(mu_theta(4, 1.0, 0.0), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn theta_double_star_examples() {
        assert_eq!(theta_double_star(5, 2.0), ThetaBound::Finite(10.0));
        assert_eq!(theta_double_star(3, 2.0), ThetaBound::Unbounded);
        match theta_double_star(9, 2.0) {
            ThetaBound::Finite(v) => assert!((v - 3.6).abs() < 1e-15),
            ThetaBound::Unbounded => panic!("expected a finite bound"),
        }
    }

    #[test]
    fn zero_profile_has_zero_sides() {
        let grid = LineGrid::new(10.0, 0.05).unwrap();
        let rep = radial_isometry_check(&grid, &vec![0.0; grid.len()], 5, 2.0, 0.0).unwrap();
        assert_eq!((rep.lhs, rep.rhs), (0.0, 0.0));
    }

    fn gaussian_profile(grid: &LineGrid, rp: &RellichParams) -> Vec<f64> {
        let gw = rp.weight_exponent();
        grid.nodes().map(|s| (gw * s).exp() * (-s * s / 2.0).exp()).collect()
    }

    #[test]
    fn gaussian_defect_is_second_order() {
        for &(n, theta, alpha) in &[(5u32, 2.0, 0.0), (4, 3.0, 1.0), (6, 2.5, -1.0)] {
            let rp = RellichParams::new(n, theta, alpha).unwrap();
            let d: Vec<f64> = [0.02, 0.01]
                .iter()
                .map(|&h| {
                    let grid = LineGrid::new(12.0, h).unwrap();
                    radial_isometry_check(&grid, &gaussian_profile(&grid, &rp), n, theta, alpha)
                        .unwrap()
                        .defect
                })
                .collect();
            assert!(d[1] < 1e-4, "({n},{theta},{alpha}) {d:?}");
            let ratio = d[0] / d[1];
            assert!((3.5..=4.5).contains(&ratio), "({n},{theta},{alpha}) {d:?}");
        }
    }

    #[test]
    fn instanton_defect_is_small() {
        let d: Vec<f64> = [0.02, 0.01]
            .iter()
            .map(|&h| {
                let grid = LineGrid::new(15.0, h).unwrap();
                let u: Vec<f64> =
                    grid.nodes().map(|s| 2.0 * 2f64.sqrt() / (1.0 + (-2.0 * s).exp())).collect();
                radial_isometry_check(&grid, &u, 4, 2.0, 0.0).unwrap().defect
            })
            .collect();
        assert!(d[1] < 1e-4, "{d:?}");
        assert!((3.5..=4.5).contains(&(d[0] / d[1])), "{d:?}");
    }

    #[test]
    fn mismatched_length_is_rejected() {
        let grid = LineGrid::new(5.0, 0.1).unwrap();
        assert!(radial_isometry_check(&grid, &[1.0, 2.0], 4, 2.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn mu_theta_matches_mu2_for_nonnegative_gamma(n in 2u32..12, alpha in -1.9f64..10.0) {
            let gamma = gamma_appendix(n, 2.0, alpha);
            prop_assume!(gamma >= 0.0);
            let (m2, k) = mu2(n, alpha);
            prop_assert_eq!(k, 0);
            prop_assert!((mu_theta(n, 2.0, alpha).unwrap() - m2).abs() <= 1e-14 * m2.max(1.0));
        }

        #[test]
        fn resonance_gives_zero(n in 2u32..10, k in 0u64..6) {
            // Pick α with Γ = −k(n−2+k): (t−2)(n−t) = −k(n−2+k) at t = n + k.
            let alpha = 2.0 * (n as f64 + k as f64) - n as f64;
            let (m, kk) = mu2(n, alpha);
            prop_assert_eq!(m, 0.0);
            prop_assert_eq!(kk, k);
        }

        #[test]
        fn argmin_grows_as_gamma_falls(n in 2u32..10, a1 in 0.0f64..30.0, a2 in 0.0f64..30.0) {
            let (lo, hi) = if a1 < a2 { (a1, a2) } else { (a2, a1) };
            // With t = (n+α)/2, Γ = (t−2)(n−t) is decreasing once α ≥ 2.
            let base = 2.0;
            let (g_lo, g_hi) = (gamma_appendix(n, 2.0, base + lo), gamma_appendix(n, 2.0, base + hi));
            prop_assert!(g_hi <= g_lo);
            prop_assert!(mu2(n, base + hi).1 >= mu2(n, base + lo).1);
        }

        #[test]
        fn mu2_is_a_true_minimum(n in 2u32..10, alpha in -1.9f64..40.0) {
            let gamma = gamma_appendix(n, 2.0, alpha);
            let (m, _) = mu2(n, alpha);
            for k in 0..200u64 {
                let kf = k as f64;
                let v = gamma + kf * (n as f64 - 2.0 + kf);
                prop_assert!(m <= v * v);
            }
        }
    }
}
