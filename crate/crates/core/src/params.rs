//! PDE data, the constants of the Emden-Fowler reduction and the regime
//! classification.
//!
//! A radial pair `u(x) = |x|^{-λ₁} g(-log|x|)`, `v(x) = |x|^{-λ₂} f(-log|x|)`
//! solves the weighted system iff `(g, f)` solves the autonomous pair
//!
//! ```text
//! -g'' + 2A g' + Γ g = |f|^{p-2} f
//! -f'' - 2A f' + Γ f = |g|^{q-2} g
//! ```
//!
//! with `λ₁ = (b+n)/q`, `λ₂ = (a+n)/p`, `Γ = λ₁λ₂` and `A = (n-2)/2 - λ₁`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used for the critical hyperbola test.
pub const HYPERBOLA_RTOL: f64 = 1e-12;

/// Data `(n, a, b, p, q)` of the system `-Δu = |x|^a |v|^{p-2} v`,
/// `-Δv = |x|^b |u|^{q-2} u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub n: u32,
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub q: f64,
}

impl SystemParams {
    pub fn new(n: u32, a: f64, b: f64, p: f64, q: f64) -> Self {
        Self { n, a, b, p, q }
    }

    /// Builds the unique on-hyperbola tuple with the given `(n, a, p, q)`.
    pub fn on_hyperbola(n: u32, a: f64, p: f64, q: f64) -> Self {
        let nf = n as f64;
        let b = q * ((nf - 2.0) - (a + nf) / p) - nf;
        Self { n, a, b, p, q }
    }

    /// `(a+n)/p + (b+n)/q - (n-2)`.
    pub fn hyperbola_defect(&self) -> f64 {
        let nf = self.n as f64;
        (self.a + nf) / self.p + (self.b + nf) / self.q - (nf - 2.0)
    }

    /// Checks every admissibility relation and names the first one violated.
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParams(format!(
                "dimension n = {} must be at least 2",
                self.n
            )));
        }
        for (name, v) in [("a", self.a), ("b", self.b), ("p", self.p), ("q", self.q)] {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} = {v} is not finite")));
            }
        }
        if self.p <= 1.0 || self.q <= 1.0 {
            return Err(Error::InvalidParams(format!(
                "exponents must exceed 1 (p = {}, q = {})",
                self.p, self.q
            )));
        }
        let inv = 1.0 / self.p + 1.0 / self.q;
        if inv >= 1.0 {
            return Err(Error::InvalidParams(format!(
                "anticoercivity 1/p + 1/q < 1 fails (1/p + 1/q = {inv})"
            )));
        }
        if !check_hyperbola(self) {
            return Err(Error::InvalidParams(format!(
                "critical hyperbola (a+n)/p + (b+n)/q = n-2 fails (defect {:e})",
                self.hyperbola_defect()
            )));
        }
        Ok(())
    }
}

/// True iff `(a+n)/p + (b+n)/q = n-2` within relative tolerance `1e-12`.
pub fn check_hyperbola(params: &SystemParams) -> bool {
    let nf = params.n as f64;
    let lhs = (params.a + nf) / params.p + (params.b + nf) / params.q;
    let rhs = nf - 2.0;
    let scale = lhs
        .abs()
        .max(rhs.abs())
        .max((params.a + nf).abs() / params.p)
        .max((params.b + nf).abs() / params.q)
        .max(1.0);
    (lhs - rhs).abs() <= HYPERBOLA_RTOL * scale
}

/// Constants of the reduced problem on the line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedParams {
    pub n: u32,
    pub p: f64,
    pub q: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Drift coefficient `A`.
    #[serde(rename = "A")]
    pub drift: f64,
    /// Potential coefficient `Γ`.
    #[serde(rename = "Gamma")]
    pub gamma: f64,
    pub delta: f64,
    pub p_conj: f64,
    pub q_conj: f64,
}

impl ReducedParams {
    /// Reduced data for the line system with arbitrary `(A, Γ, p, q)`; `n`
    /// and `λ` are not meaningful for such inputs and are set from the
    /// relation `A² + Γ = ((n-2)/2)²` only when it happens to hold.
    pub fn from_line(drift: f64, gamma: f64, p: f64, q: f64) -> Self {
        let half = (drift * drift + gamma).max(0.0).sqrt();
        Self {
            n: (2.0 * half + 2.0).round() as u32,
            p,
            q,
            lambda1: half - drift,
            lambda2: half + drift,
            drift,
            gamma,
            delta: p * q - (p + q),
            p_conj: p / (p - 1.0),
            q_conj: q / (q - 1.0),
        }
    }

    /// Whether `Γ` is zero up to round-off of the inputs.
    pub fn is_degenerate(&self) -> bool {
        self.gamma.abs() <= 1e-13 * (1.0 + self.lambda1.abs() * self.lambda2.abs())
    }
}

/// Computes `λ₁, λ₂, A, Γ, δ, p', q'` after validating the data.
pub fn derive_reduced(params: &SystemParams) -> Result<ReducedParams> {
    params.validate()?;
    let nf = params.n as f64;
    let (p, q) = (params.p, params.q);
    let lambda1 = (params.b + nf) / q;
    let lambda2 = (params.a + nf) / p;
    let red = ReducedParams {
        n: params.n,
        p,
        q,
        lambda1,
        lambda2,
        drift: (nf - 2.0) / 2.0 - lambda1,
        gamma: lambda1 * lambda2,
        delta: p * q - (p + q),
        p_conj: p / (p - 1.0),
        q_conj: q / (q - 1.0),
    };
    debug_assert!(red.delta > 0.0);
    debug_assert!(red.q > red.p_conj);
    Ok(red)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeTag {
    PositiveExistence,
    NonexistenceNonneg,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub tag: RegimeTag,
    pub reasons: Vec<String>,
}

/// Sorts the data into the existence / nonexistence / degenerate regimes.
pub fn classify_regime(params: &SystemParams) -> Result<Regime> {
    let red = derive_reduced(params)?;
    let nf = params.n as f64;
    let tol = 1e-12 * nf.max(1.0);
    let a_crit = (params.a + nf).abs() <= tol;
    let b_crit = (params.b + nf).abs() <= tol;
    let mut reasons = Vec::new();

    let tag = if a_crit || b_crit || red.is_degenerate() {
        reasons.push(
            "a = -n or b = -n: Gamma = 0, null-energy trajectories are trivial and no \
             nontrivial decaying solution is sought"
                .to_string(),
        );
        RegimeTag::Degenerate
    } else if params.a > -nf && params.b > -nf {
        reasons.push(
            "a > -n and b > -n: Gamma > 0, a nontrivial radial solution with finite weighted \
             energy exists"
                .to_string(),
        );
        reasons.push(
            "solutions with vanishing weighted limits at 0 and infinity are trivial or \
             satisfy u*v > 0"
                .to_string(),
        );
        RegimeTag::PositiveExistence
    } else {
        reasons.push(format!(
            "a <= -n or b <= -n: Gamma = {:.6} < 0, nonnegative radial solutions are trivial",
            red.gamma
        ));
        reasons.push(
            "caveat: nonexistence holds for solutions whose weighted limits at 0 or at \
             infinity exist and are finite; nontrivial sign-changing solutions still exist"
                .to_string(),
        );
        if params.n == 2 {
            reasons.push(
                "n = 2: lambda1 = -lambda2 forces Gamma <= 0, so no positive radial solution"
                    .to_string(),
            );
        }
        RegimeTag::NonexistenceNonneg
    };
    Ok(Regime { tag, reasons })
}

/// Upper bounds on `‖g‖∞` and `‖f‖∞` for null-energy trajectories:
/// `‖g‖∞^{q-p'} ≤ (q/p')|Γ|^{p'}` and `‖f‖∞^{p-q'} ≤ (p/q')|Γ|^{q'}`.
pub fn apriori_bounds(red: &ReducedParams) -> (f64, f64) {
    let g = red.gamma.abs();
    if g == 0.0 {
        return (0.0, 0.0);
    }
    let (p, q, pc, qc) = (red.p, red.q, red.p_conj, red.q_conj);
    let g_bound = ((q / pc) * g.powf(pc)).powf(1.0 / (q - pc));
    let f_bound = ((p / qc) * g.powf(qc)).powf(1.0 / (p - qc));
    (g_bound, f_bound)
}

/// Constant solutions `(c₁, c₂)` of the line system: the origin and
/// `±(|Γ|^{p/δ}, |Γ|^{q/δ-1} Γ)`.
pub fn equilibria(red: &ReducedParams) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.0)];
    if red.gamma == 0.0 || red.delta <= 0.0 {
        return out;
    }
    let abs = red.gamma.abs();
    let c1 = abs.powf(red.p / red.delta);
    let c2 = abs.powf(red.q / red.delta - 1.0) * red.gamma;
    out.push((c1, c2));
    out.push((-c1, -c2));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn hyperbola_examples() {
        assert!(check_hyperbola(&SystemParams::new(4, 0.0, 0.0, 4.0, 4.0)));
        assert!(!check_hyperbola(&SystemParams::new(4, 0.0, 0.0, 4.0, 5.0)));
        assert!(check_hyperbola(&SystemParams::new(3, -4.0, 3.0, 2.0, 4.0)));
    }

    #[test]
    fn reduced_examples() {
        let r = derive_reduced(&SystemParams::new(4, 0.0, 0.0, 4.0, 4.0)).unwrap();
        assert_eq!((r.lambda1, r.lambda2, r.drift, r.gamma, r.delta), (1.0, 1.0, 0.0, 1.0, 8.0));

        let r = derive_reduced(&SystemParams::new(3, 0.0, 0.0, 4.0, 12.0)).unwrap();
        assert!(close(r.lambda1, 0.25, 1e-15));
        assert!(close(r.lambda2, 0.75, 1e-15));
        assert!(close(r.drift, 0.25, 1e-15));
        assert!(close(r.gamma, 0.1875, 1e-15));
        assert!(close(r.delta, 32.0, 1e-15));

        let r = derive_reduced(&SystemParams::new(3, -4.0, 3.0, 2.0, 4.0)).unwrap();
        assert_eq!((r.lambda1, r.lambda2, r.drift, r.gamma, r.delta), (1.5, -0.5, -1.0, -0.75, 2.0));
    }

    #[test]
    fn validation_names_violated_relation() {
        let e = derive_reduced(&SystemParams::new(4, 0.0, 0.0, 4.0, 5.0)).unwrap_err();
        assert!(e.to_string().contains("hyperbola"), "{e}");
        let e = derive_reduced(&SystemParams::new(4, 0.0, 0.0, 1.5, 2.0)).unwrap_err();
        assert!(e.to_string().contains("anticoercivity"), "{e}");
        let e = derive_reduced(&SystemParams::new(4, 0.0, 0.0, 0.5, 4.0)).unwrap_err();
        assert!(e.to_string().contains("exceed 1"), "{e}");
        let e = derive_reduced(&SystemParams::new(1, 0.0, 0.0, 4.0, 4.0)).unwrap_err();
        assert!(e.to_string().contains("dimension"), "{e}");
    }

    #[test]
    fn regime_examples() {
        let tag = |n, a, b, p, q| classify_regime(&SystemParams::new(n, a, b, p, q)).unwrap().tag;
        assert_eq!(tag(4, 0.0, 0.0, 4.0, 4.0), RegimeTag::PositiveExistence);
        assert_eq!(tag(3, -4.0, 3.0, 2.0, 4.0), RegimeTag::NonexistenceNonneg);
        assert_eq!(tag(2, -1.0, -4.0, 2.0, 4.0), RegimeTag::NonexistenceNonneg);
        // a = -n lies on the hyperbola when (b+n)/q = n-2.
        assert_eq!(tag(4, -4.0, 4.0, 3.0, 4.0), RegimeTag::Degenerate);
    }

    #[test]
    fn apriori_examples() {
        let r = derive_reduced(&SystemParams::new(4, 0.0, 0.0, 4.0, 4.0)).unwrap();
        let (gb, fb) = apriori_bounds(&r);
        assert!(close(gb, 3f64.powf(3.0 / 8.0), 1e-14));
        assert!((gb - 1.50981).abs() < 1e-5);
        assert_eq!(gb, fb);

        let r = derive_reduced(&SystemParams::new(3, 0.0, 0.0, 4.0, 12.0)).unwrap();
        let (gb, _) = apriori_bounds(&r);
        // (9 * 0.1875^{4/3})^{3/32} evaluated through logarithms
        let independent = ((9f64).ln() + (4.0 / 3.0) * 0.1875f64.ln()) * 3.0 / 32.0;
        assert!(close(gb, independent.exp(), 1e-13));
        assert!((gb - 0.9967).abs() < 5e-5);

        let z = ReducedParams::from_line(1.0, 0.0, 4.0, 4.0);
        assert_eq!(apriori_bounds(&z), (0.0, 0.0));
    }

    #[test]
    fn equilibria_examples() {
        let eq = equilibria(&ReducedParams::from_line(0.0, 1.0, 3.0, 5.0));
        assert_eq!(eq, vec![(0.0, 0.0), (1.0, 1.0), (-1.0, -1.0)]);

        let eq = equilibria(&ReducedParams::from_line(0.0, 4.0, 4.0, 4.0));
        assert!(close(eq[1].0, 2.0, 1e-15) && close(eq[1].1, 2.0, 1e-15));

        let eq = equilibria(&ReducedParams::from_line(-1.0, -0.75, 2.0, 4.0));
        assert!(close(eq[1].0, 0.75, 1e-15) && close(eq[1].1, -0.5625, 1e-15));
        assert!(close(eq[2].0, -0.75, 1e-15) && close(eq[2].1, 0.5625, 1e-15));

        let eq = equilibria(&ReducedParams::from_line(1.0, 0.0, 2.0, 4.0));
        assert_eq!(eq, vec![(0.0, 0.0)]);
    }
}
