//! Radial solutions `u(r) = r^{-λ₁} g(s)`, `v(r) = r^{-λ₂} f(s)` with
//! `r = e^{-s}`, their PDE residual, tail limits and the qualitative
//! properties of the `p = 2` case.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{translate, signed_pow, LineGrid, TrajectoryPair};
use crate::params::{derive_reduced, ReducedParams, SystemParams};

/// Magnitude below which values count as numerical noise.
pub const NOISE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSolution {
    /// `r_i = e^{-s_i}`, decreasing in `i`.
    pub radii: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub params: SystemParams,
    pub red: ReducedParams,
}

impl RadialSolution {
    /// Recovers the log grid `s_i = -log r_i`; the spacing is estimated
    /// from the two end radii and every radius must lie on the grid.
    pub fn grid(&self) -> Result<LineGrid> {
        let n = self.radii.len();
        if n < 5 || n % 2 == 0 || self.radii.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::Parse("radii do not form a symmetric log grid".into()));
        }
        let half = (n - 1) / 2;
        let h = (self.radii[0].ln() - self.radii[n - 1].ln()) / (2 * half) as f64;
        let s: Vec<f64> = (0..n).map(|i| (i as f64 - half as f64) * h).collect();
        let grid = LineGrid::from_nodes(&s)?;
        for (i, (r, s)) in self.radii.iter().zip(grid.nodes()).enumerate() {
            if (r - (-s).exp()).abs() > 1e-12 * r {
                return Err(Error::Parse(format!("radius {i} is off the canonical log grid")));
            }
        }
        Ok(grid)
    }
}

pub fn to_radial(t: &TrajectoryPair, params: &SystemParams) -> Result<RadialSolution> {
    let red = derive_reduced(params)?;
    let (l1, l2) = (red.lambda1, red.lambda2);
    let radii: Vec<f64> = t.grid.nodes().map(|s| (-s).exp()).collect();
    let (u, v) = t
        .grid
        .nodes()
        .zip(t.g.iter().zip(&t.f))
        .map(|(s, (g, f))| ((l1 * s).exp() * g, (l2 * s).exp() * f))
        .unzip();
    Ok(RadialSolution { radii, u, v, params: *params, red })
}

pub fn from_radial(sol: &RadialSolution) -> Result<TrajectoryPair> {
    let grid = sol.grid()?;
    let (l1, l2) = (sol.red.lambda1, sol.red.lambda2);
    let (g, f) = grid
        .nodes()
        .zip(sol.u.iter().zip(&sol.v))
        .map(|(s, (u, v))| ((-l1 * s).exp() * u, (-l2 * s).exp() * v))
        .unzip();
    TrajectoryPair::new(grid, g, f, sol.red)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeResidual {
    /// `-Δu - r^a |v|^{p-2} v`.
    pub r1: Vec<f64>,
    /// `-Δv - r^b |u|^{q-2} u`.
    pub r2: Vec<f64>,
    /// `r1` over the summed magnitudes of the terms of the equation.
    pub rel1: Vec<f64>,
    pub rel2: Vec<f64>,
    /// Sup-norms of `rel1`, `rel2` over interior nodes.
    pub norms: (f64, f64),
}

impl PdeResidual {
    /// Sup-norms of the relative residuals over interior nodes with radius
    /// in `[r_lo, r_hi]`.
    pub fn norms_within(&self, radii: &[f64], r_lo: f64, r_hi: f64) -> (f64, f64) {
        let n = radii.len();
        let sup = |rel: &[f64]| {
            (1..n.saturating_sub(1))
                .filter(|&i| radii[i] >= r_lo && radii[i] <= r_hi)
                .fold(0.0f64, |m, i| m.max(rel[i].abs()))
        };
        (sup(&self.rel1), sup(&self.rel2))
    }
}

/// `-Δw` for `w = r^{-κ} W(s)` together with the sum of the magnitudes of
/// its terms. With `r = e^{-s}`,
///
/// ```text
/// -Δw = r^{-κ-2} (-W'' - (2κ - n + 2) W' - κ(κ - n + 2) W),
/// ```
///
/// and `W` is differenced instead of `w` so that pure powers `c r^{-κ}` are
/// handled exactly. End nodes are left at zero.
fn neg_laplacian(grid: &LineGrid, n: u32, kappa: f64, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let h = grid.spacing();
    let len = w.len();
    let c1 = 2.0 * kappa - (n as f64 - 2.0);
    let c0 = kappa * (kappa - (n as f64 - 2.0));
    let big_w: Vec<f64> = grid.nodes().zip(w).map(|(s, w)| (-kappa * s).exp() * w).collect();
    let mut lap = vec![0.0; len];
    let mut scale = vec![0.0; len];
    for i in 1..len.saturating_sub(1) {
        let weight = ((kappa + 2.0) * grid.node(i)).exp();
        let ws = (big_w[i + 1] - big_w[i - 1]) / (2.0 * h);
        let wss = (big_w[i + 1] - 2.0 * big_w[i] + big_w[i - 1]) / (h * h);
        lap[i] = weight * (-wss - c1 * ws - c0 * big_w[i]);
        scale[i] = weight * (wss.abs() + (c1 * ws).abs() + (c0 * big_w[i]).abs());
    }
    (lap, scale)
}

/// Residual of the radial system. The relative residuals are normalized by
/// the sum of the magnitudes of all terms at the node.
pub fn pde_residual(sol: &RadialSolution) -> Result<PdeResidual> {
    let grid = sol.grid()?;
    let (n, a, b, p, q) = (sol.params.n, sol.params.a, sol.params.b, sol.params.p, sol.params.q);
    let (lu, su) = neg_laplacian(&grid, n, sol.red.lambda1, &sol.u);
    let (lv, sv) = neg_laplacian(&grid, n, sol.red.lambda2, &sol.v);
    let len = sol.u.len();
    let mut out = PdeResidual {
        r1: vec![0.0; len],
        r2: vec![0.0; len],
        rel1: vec![0.0; len],
        rel2: vec![0.0; len],
        norms: (0.0, 0.0),
    };
    let rel = |r: f64, scale: f64| if scale > 0.0 { r / scale } else { 0.0 };
    for i in 1..len.saturating_sub(1) {
        let r = sol.radii[i];
        let t1 = r.powf(a) * signed_pow(sol.v[i], p - 1.0);
        let t2 = r.powf(b) * signed_pow(sol.u[i], q - 1.0);
        out.r1[i] = lu[i] - t1;
        out.r2[i] = lv[i] - t2;
        out.rel1[i] = rel(out.r1[i], su[i] + t1.abs());
        out.rel2[i] = rel(out.r2[i], sv[i] + t2.abs());
    }
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    out.norms = (sup(&out.rel1), sup(&out.rel2));
    Ok(out)
}

/// Tail estimate on one end of the line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    /// Sup of the absolute value over the window.
    pub sup: f64,
    /// Tail mean, present when the oscillation over the window is below
    /// `1e-3 (1 + sup)`.
    pub limit: Option<f64>,
}

/// Tail sups of `|x|^{λ₁}u = g` and `|x|^{λ₂}v = f` as `|x| → ∞` (s → -∞)
/// and `|x| → 0` (s → +∞).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub lim_u_inf: TailEstimate,
    pub lim_u_0: TailEstimate,
    pub lim_v_inf: TailEstimate,
    pub lim_v_0: TailEstimate,
    /// Width of each tail window, `0.1 L`.
    pub window: f64,
}

impl DecayReport {
    pub fn max_sup(&self) -> f64 {
        [self.lim_u_inf, self.lim_u_0, self.lim_v_inf, self.lim_v_0]
            .iter()
            .fold(0.0, |m, t| m.max(t.sup))
    }
}

fn tail(values: &[f64]) -> TailEstimate {
    let sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let limit = (hi - lo <= 1e-3 * (1.0 + sup))
        .then(|| values.iter().sum::<f64>() / values.len() as f64);
    TailEstimate { sup, limit }
}

pub fn decay_limits(t: &TrajectoryPair) -> Result<DecayReport> {
    let big_l = t.grid.half_length();
    if big_l < 10.0 {
        return Err(Error::Precondition(format!(
            "tail limits need half-length L >= 10, got {big_l}"
        )));
    }
    let window = 0.1 * big_l;
    let k = (window / t.grid.spacing() + 1e-9).floor() as usize + 1;
    let n = t.g.len();
    Ok(DecayReport {
        lim_u_inf: tail(&t.g[..k]),
        lim_u_0: tail(&t.g[n - k..]),
        lim_v_inf: tail(&t.f[..k]),
        lim_v_0: tail(&t.f[n - k..]),
        window,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct P2Report {
    /// Center of symmetry, located between nodes to interpolation accuracy.
    pub s_star: f64,
    /// `sup_t |g(s*+t) - g(s*-t)| / ‖g‖_∞`.
    pub evenness_defect: f64,
    pub even: bool,
    pub positive: bool,
    pub monotone: bool,
    /// `f` has the sign of `Γ` wherever it is above the noise floor.
    pub f_sign_ok: bool,
    pub f_expected_positive: bool,
}

impl P2Report {
    pub fn all_pass(&self) -> bool {
        self.even && self.positive && self.monotone && self.f_sign_ok
    }
}

/// Relative evenness tolerance of [`p2_qualitative_check`].
pub const EVENNESS_TOL: f64 = 1e-3;
/// Slack allowed in the discrete monotonicity test.
pub const MONOTONE_SLACK: f64 = 1e-10;

/// Evenness, positivity, monotonicity of `g` about its maximum and the sign
/// of `f`, for `p = 2`.
pub fn p2_qualitative_check(t: &TrajectoryPair) -> Result<P2Report> {
    let red = &t.red;
    if red.p != 2.0 {
        return Err(Error::Precondition(format!("qualitative check needs p = 2, got {}", red.p)));
    }
    if red.q <= 2.0 || red.gamma == 0.0 || red.drift * red.drift + red.gamma < 0.0 {
        return Err(Error::Precondition(
            "qualitative check needs q > 2, Gamma != 0 and A^2 + Gamma >= 0".into(),
        ));
    }
    let n = t.g.len();
    let star = (0..n).max_by(|&i, &j| t.g[i].total_cmp(&t.g[j])).unwrap_or(0);
    let gmax = t.g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (shift, defect) = symmetry_defect(&t.g, star);
    let evenness_defect = if gmax > 0.0 { defect / gmax } else { 0.0 };

    let positive = t.g.iter().all(|&v| v > 0.0 || v.abs() <= NOISE_FLOOR) && gmax > NOISE_FLOOR;
    let above = |i: usize| t.g[i].abs() > NOISE_FLOOR;
    let right = (star..n - 1).filter(|&i| above(i + 1)).all(|i| t.g[i + 1] < t.g[i] + MONOTONE_SLACK);
    let left = (1..=star).filter(|&i| above(i - 1)).all(|i| t.g[i - 1] < t.g[i] + MONOTONE_SLACK);
    let f_expected_positive = red.gamma > 0.0;
    let f_sign_ok = t
        .f
        .iter()
        .filter(|v| v.abs() > NOISE_FLOOR)
        .all(|&v| (v > 0.0) == f_expected_positive);
    Ok(P2Report {
        s_star: t.grid.node(star) + shift * t.grid.spacing(),
        evenness_defect,
        even: evenness_defect <= EVENNESS_TOL,
        positive,
        monotone: left && right,
        f_sign_ok,
        f_expected_positive,
    })
}

/// Sub-node translation `δ ∈ [-1, 1]` (in node units) minimizing the squared
/// distance between `a` and `b` translated by `δ`, and the sup-norm distance
/// over `window` there. The squared distance is convex in `δ` near a good
/// whole-node alignment, so ternary search suffices.
fn subnode_fit(a: &[f64], b: &[f64], window: std::ops::RangeInclusive<usize>) -> (f64, f64) {
    let diff = |delta: f64| -> Vec<f64> {
        let t = translate(b, delta);
        a.iter().zip(&t).map(|(x, y)| x - y).collect()
    };
    let l2 = |delta: f64| diff(delta).iter().map(|d| d * d).sum::<f64>();
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    for _ in 0..100 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if l2(m1) <= l2(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let delta = 0.5 * (lo + hi);
    let d = diff(delta);
    (delta, window.map(|i| d[i].abs()).fold(0.0, f64::max))
}

/// Best center `star + δ` for the reflection `g(s) ↦ g(2c − s)` and the
/// sup-norm defect there, over the nodes whose mirror image lies on the grid.
fn symmetry_defect(g: &[f64], star: usize) -> (f64, f64) {
    let n = g.len();
    let reflected: Vec<f64> = (0..n)
        .map(|i| {
            let j = 2 * star as isize - i as isize;
            if (0..n as isize).contains(&j) { g[j as usize] } else { 0.0 }
        })
        .collect();
    let reach = star.min(n - 1 - star).saturating_sub(2);
    let (two_delta, defect) = subnode_fit(g, &reflected, star - reach..=star + reach);
    (0.5 * two_delta, defect)
}

/// Distance between two profiles on the same grid modulo translation,
/// reflection and sign. Both are first aligned at the node of largest
/// modulus, then `b` is translated by a fraction of a node to fit `a`.
pub fn profile_distance(a: &[f64], b: &[f64]) -> f64 {
    let peak = |v: &[f64]| (0..v.len()).max_by(|&i, &j| v[i].abs().total_cmp(&v[j].abs())).unwrap_or(0);
    let n = a.len() as isize;
    if n == 0 {
        return 0.0;
    }
    let (pa, pb) = (peak(a) as isize, peak(b) as isize);
    let at = |v: &[f64], i: isize| if (0..n).contains(&i) { v[i as usize] } else { 0.0 };
    let sa = a[pa as usize].signum();
    let sb = b[pb as usize].signum();
    let aa: Vec<f64> = a.iter().map(|v| sa * v).collect();
    let mut best = f64::INFINITY;
    for dir in [1isize, -1] {
        let aligned: Vec<f64> = (0..n).map(|i| sb * at(b, pb + dir * (i - pa))).collect();
        best = best.min(subnode_fit(&aa, &aligned, 0..=(n - 1) as usize).1);
    }
    best
}
