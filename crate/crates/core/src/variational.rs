//! Constrained minimization of the quotient
//!
//! ```text
//! m = inf  ∫|L₊g|^{p'} ds / (∫|g|^q ds)^{p'/q}
//! ```
//!
//! on the truncated line, recovery of `f`, and rescaling of the minimizer to
//! an exact solution of the reduced system.
//!
//! The descent runs on the unit sphere `h Σ|g|^q = 1`. Search directions are
//! preconditioned by the factored Gauss-Newton metric `K⁻¹ W⁻¹ K⁻ᵀ`, where
//! `K` is the (tridiagonal) drift operator and `W = (w² + ε²)^{(r-2)/2}` with
//! `w = Kg`; only `K` is ever factored, so the metric stays cheap for any
//! conditioning of `W`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{BandMatrix, TridiagLu};
use crate::operators::{
    apply_drift_operator, factor_drift_operator, signed_pow, system_residual, translate,
    LineGrid, TrajectoryPair,
};
use crate::params::{derive_reduced, ReducedParams, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative stationarity tolerance.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Number of starts; start 0 is the centered Gaussian.
    pub multistarts: usize,
    /// Floor of the metric regularization schedule.
    pub eps_floor: f64,
    /// Sup-norm below which a probe candidate counts as trivial.
    pub trivial_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200_000,
            seed: 0,
            multistarts: 1,
            eps_floor: 1e-9,
            trivial_tol: 1e-6,
        }
    }
}

/// `inf h Σ|K g|^r / (h Σ|g|^s)^{r/s}` with `K = -D² + 2c D + Γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuotientProblem {
    pub drift: f64,
    pub gamma: f64,
    pub num_exp: f64,
    pub den_exp: f64,
}

impl QuotientProblem {
    /// The quotient `I_{p',q}(A, Γ)` whose minimizer is `g`.
    pub fn primal(red: &ReducedParams) -> Self {
        Self { drift: red.drift, gamma: red.gamma, num_exp: red.p_conj, den_exp: red.q }
    }

    /// The exchanged quotient `I_{q',p}(-A, Γ)` whose minimizer is `f`.
    pub fn dual(red: &ReducedParams) -> Self {
        Self { drift: -red.drift, gamma: red.gamma, num_exp: red.q_conj, den_exp: red.p }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cone {
    Free,
    /// `g ≥ 0` and `f` recovered from the positive part of `Kg`.
    Nonneg,
}

/// Unit-constraint minimizer returned by the descent.
#[derive(Debug, Clone)]
pub struct Descent {
    /// Normalized iterate, `h Σ|g|^s = 1`.
    pub g: Vec<f64>,
    /// Quotient value at `g`.
    pub m: f64,
    /// Sup-norm of the (projected) Euler-Lagrange residual.
    pub stationarity: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Quotient values at the iterates 0, 1, 2, 4, 8, ...
    pub history: Vec<f64>,
    /// The line search failed before convergence.
    pub stalled: bool,
}

struct Workspace<'a> {
    grid: &'a LineGrid,
    prob: QuotientProblem,
    cone: Cone,
    k: TridiagLu,
    kt: TridiagLu,
}

struct Eval {
    w: Vec<f64>,
    j: f64,
}

impl<'a> Workspace<'a> {
    fn new(grid: &'a LineGrid, prob: QuotientProblem, cone: Cone) -> Result<Self> {
        let k = factor_drift_operator(grid, prob.drift, prob.gamma);
        let kt = factor_drift_operator(grid, -prob.drift, prob.gamma);
        match (k, kt) {
            (Some(k), Some(kt)) => Ok(Self { grid, prob, cone, k, kt }),
            _ => Err(Error::Precondition("drift operator is singular on this grid".into())),
        }
    }

    fn apply_k(&self, v: &[f64]) -> Vec<f64> {
        apply_drift_operator(self.grid, self.prob.drift, self.prob.gamma, v)
    }

    fn apply_kt(&self, v: &[f64]) -> Vec<f64> {
        apply_drift_operator(self.grid, -self.prob.drift, self.prob.gamma, v)
    }

    fn clip(&self, w: f64) -> f64 {
        match self.cone {
            Cone::Free => w,
            Cone::Nonneg => w.max(0.0),
        }
    }

    fn constraint(&self, g: &[f64]) -> f64 {
        let s = self.prob.den_exp;
        self.grid.integrate(&g.iter().map(|v| v.abs().powf(s)).collect::<Vec<_>>())
    }

    /// Scales `g` onto the unit sphere; `None` for the zero function.
    fn normalize(&self, g: &mut [f64]) -> Option<()> {
        let c = self.constraint(g);
        if !(c > 0.0 && c.is_finite()) {
            return None;
        }
        let scale = c.powf(-1.0 / self.prob.den_exp);
        g.iter_mut().for_each(|v| *v *= scale);
        Some(())
    }

    fn eval(&self, g: &[f64]) -> Eval {
        let w = self.apply_k(g);
        let r = self.prob.num_exp;
        let j = self.grid.spacing() * w.iter().map(|&x| self.clip(x).abs().powf(r)).sum::<f64>();
        Eval { w, j }
    }

    /// Euler-Lagrange residual `Kᵀ φ(w) - J ψ(g)` on the unit sphere.
    fn gradient(&self, g: &[f64], ev: &Eval) -> Vec<f64> {
        let (r, s) = (self.prob.num_exp, self.prob.den_exp);
        let phi: Vec<f64> = ev.w.iter().map(|&x| signed_pow(self.clip(x), r - 1.0)).collect();
        let ktphi = self.apply_kt(&phi);
        ktphi.iter().zip(g).map(|(a, &gi)| a - ev.j * signed_pow(gi, s - 1.0)).collect()
    }

    fn projected_sup(&self, g: &[f64], e: &[f64]) -> f64 {
        e.iter()
            .zip(g)
            .map(|(&ei, &gi)| match self.cone {
                // Descent along -e is blocked at the bound when e > 0.
                Cone::Nonneg if gi <= 0.0 && ei > 0.0 => 0.0,
                _ => ei.abs(),
            })
            .fold(0.0, f64::max)
    }

    fn direction(&self, e: &[f64], ev: &Eval, eps_rel: f64) -> Vec<f64> {
        let r = self.prob.num_exp;
        let wmax = ev.w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let eps = (eps_rel * wmax).max(f64::MIN_POSITIVE);
        let mut v = self.kt.solve(e);
        for (vi, &wi) in v.iter_mut().zip(&ev.w) {
            *vi *= (wi * wi + eps * eps).powf((2.0 - r) / 2.0);
        }
        self.k.solve_in_place(&mut v);
        v.iter_mut().for_each(|x| *x = -*x);
        v
    }
}

const STEP_MAX: f64 = 64.0;
const STEP_MIN: f64 = 1e-12;

fn descend(
    grid: &LineGrid,
    prob: QuotientProblem,
    cone: Cone,
    start: &[f64],
    opts: &SolverOptions,
) -> Result<Option<Descent>> {
    let ws = Workspace::new(grid, prob, cone)?;
    let mut g: Vec<f64> = match cone {
        Cone::Free => start.to_vec(),
        Cone::Nonneg => start.iter().map(|v| v.max(0.0)).collect(),
    };
    if ws.normalize(&mut g).is_none() {
        return Ok(None);
    }
    let mut ev = ws.eval(&g);
    let mut history = vec![ev.j];
    let mut step = 1.0 / (prob.num_exp - 1.0).max(0.5);
    let mut iterations = 0;
    let mut converged = false;
    let mut stationarity = f64::INFINITY;
    let mut stalled = false;

    while iterations < opts.max_iter {
        let e = ws.gradient(&g, &ev);
        stationarity = ws.projected_sup(&g, &e);
        if stationarity <= opts.tol * (1.0 + ev.j.abs()) {
            converged = true;
            break;
        }
        let eps_rel = (1e-3 * 0.5f64.powi(iterations.min(1000) as i32)).max(opts.eps_floor);
        let d = ws.direction(&e, &ev, eps_rel);

        let mut t = (2.0 * step).min(STEP_MAX);
        let accepted = loop {
            let mut trial: Vec<f64> = g.iter().zip(&d).map(|(gi, di)| gi + t * di).collect();
            if cone == Cone::Nonneg {
                trial.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            if ws.normalize(&mut trial).is_some() {
                let tev = ws.eval(&trial);
                if tev.j <= ev.j {
                    break Some((trial, tev));
                }
            }
            t *= 0.5;
            if t < STEP_MIN {
                break None;
            }
        };
        iterations += 1;
        match accepted {
            Some((trial, tev)) => {
                g = trial;
                ev = tev;
                step = t;
            }
            None => {
                stalled = true;
                break;
            }
        }
        if iterations.is_power_of_two() {
            history.push(ev.j);
        }
    }
    if !converged {
        let e = ws.gradient(&g, &ev);
        stationarity = ws.projected_sup(&g, &e);
        converged = stationarity <= opts.tol * (1.0 + ev.j.abs());
    }
    Ok(Some(Descent { g, m: ev.j, stationarity, iterations, converged, history, stalled }))
}

/// Outcome of [`minimize_quotient`].
#[derive(Debug, Clone)]
pub struct VariationalResult {
    /// Rescaled solution candidate.
    pub pair: TrajectoryPair,
    /// Quotient value at the unit-constraint minimizer.
    pub m: f64,
    /// Lagrange multiplier of the unit-constraint minimizer.
    pub mu: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stationarity: f64,
    pub residual_norms: (f64, f64),
    /// Index of the start that produced the result.
    pub start_index: usize,
    /// Quotient value reached from each start.
    pub start_values: Vec<f64>,
}

/// Initial guesses: the centered Gaussian `exp(-s²/2)` followed by shifted,
/// asymmetric bumps drawn from a seeded generator.
pub fn initial_guesses(grid: &LineGrid, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reach = (0.25 * grid.half_length()).min(5.0);
    let mut out = vec![grid.sample(|s| (-0.5 * s * s).exp())];
    for _ in 1..count.max(1) {
        let center: f64 = rng.gen_range(-reach..=reach);
        let left: f64 = rng.gen_range(0.5..2.0);
        let right: f64 = rng.gen_range(0.5..2.0);
        let amp: f64 = rng.gen_range(0.5..2.0);
        out.push(grid.sample(|s| {
            let w = if s < center { left } else { right };
            amp * (-0.5 * ((s - center) / w).powi(2)).exp()
        }));
    }
    out
}

fn check_solvable(red: &ReducedParams) -> Result<()> {
    if red.gamma == 0.0 || red.is_degenerate() {
        return Err(Error::Precondition(
            "Gamma = 0 (degenerate regime): existence requires Gamma != 0".into(),
        ));
    }
    if red.drift * red.drift + red.gamma < 0.0 {
        return Err(Error::Precondition("existence requires A^2 + Gamma >= 0".into()));
    }
    if 1.0 / red.p + 1.0 / red.q >= 1.0 {
        return Err(Error::Precondition("anticoercivity 1/p + 1/q < 1 fails".into()));
    }
    Ok(())
}

/// `f = |L₊g|^{p'-2} L₊g`.
pub fn recover_f(grid: &LineGrid, red: &ReducedParams, g: &[f64]) -> Vec<f64> {
    crate::operators::apply_lplus(grid, red, g)
        .into_iter()
        .map(|w| signed_pow(w, red.p_conj - 1.0))
        .collect()
}

/// Multiplier `μ = ⟨L₋ φ(L₊ĝ), ĝ⟩_h / ⟨|ĝ|^{q-2}ĝ, ĝ⟩_h` of the quotient
/// problem at `ĝ`.
pub fn multiplier(grid: &LineGrid, prob: QuotientProblem, g: &[f64]) -> f64 {
    let w = apply_drift_operator(grid, prob.drift, prob.gamma, g);
    let num: f64 = w.iter().map(|x| x.abs().powf(prob.num_exp)).sum();
    let den: f64 = g.iter().map(|x| x.abs().powf(prob.den_exp)).sum();
    num / den
}

/// Scale factor `c = μ^{1/(s-r)}` turning a unit-constraint critical point
/// into an exact solution.
pub fn rescale_factor(prob: QuotientProblem, mu: f64) -> Result<f64> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::NonConvergence(format!(
            "multiplier mu = {mu} is not positive: stationarity not reached"
        )));
    }
    Ok(mu.powf(1.0 / (prob.den_exp - prob.num_exp)))
}

/// Rescales a unit-constraint minimizer `ĝ` of the primal quotient into the
/// pair `(cĝ, recover_f(cĝ))`.
pub fn rescale_to_solution(
    grid: &LineGrid,
    red: &ReducedParams,
    g_hat: &[f64],
) -> Result<TrajectoryPair> {
    let prob = QuotientProblem::primal(red);
    let c = rescale_factor(prob, multiplier(grid, prob, g_hat))?;
    let g: Vec<f64> = g_hat.iter().map(|v| c * v).collect();
    let f = recover_f(grid, red, &g);
    TrajectoryPair::new(*grid, g, f, *red)
}

fn orient(x: &mut [f64], y: &mut [f64]) {
    let (lo, hi) = x.iter().fold((0.0f64, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if -lo > hi {
        x.iter_mut().for_each(|v| *v = -*v);
        y.iter_mut().for_each(|v| *v = -*v);
    }
}

/// Conjugate of the numerator exponent; `Kx = |y|^{a-2}y` at a solution.
fn conj(r: f64) -> f64 {
    r / (r - 1.0)
}

/// Coupled residual `(Kx - |y|^{a-2}y, Kᵀy - |x|^{s-2}x)`, interleaved.
fn coupled_residual(grid: &LineGrid, prob: QuotientProblem, x: &[f64], y: &[f64]) -> Vec<f64> {
    let a = conj(prob.num_exp);
    let kx = apply_drift_operator(grid, prob.drift, prob.gamma, x);
    let kty = apply_drift_operator(grid, -prob.drift, prob.gamma, y);
    let mut out = Vec::with_capacity(2 * x.len());
    for i in 0..x.len() {
        out.push(kx[i] - signed_pow(y[i], a - 1.0));
        out.push(kty[i] - signed_pow(x[i], prob.den_exp - 1.0));
    }
    out
}

struct Polished {
    x: Vec<f64>,
    y: Vec<f64>,
    residual: f64,
    iterations: usize,
}

const NEWTON_MAX_ITER: usize = 60;
const SHIFT_BISECTIONS: usize = 80;

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Newton's method on the coupled system with `x[pin]` held fixed and the
/// first equation at `pin` dropped. Returns the final state and the full
/// residual, including the dropped equation.
fn pinned_newton(
    grid: &LineGrid,
    prob: QuotientProblem,
    mut x: Vec<f64>,
    mut y: Vec<f64>,
    pin: usize,
    target: f64,
) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>, usize)> {
    let n = x.len();
    let a = conj(prob.num_exp);
    let s = prob.den_exp;
    let (sub, diag, sup) = crate::operators::operator_bands(grid, prob.drift, prob.gamma);
    let masked = |r: &[f64]| -> Vec<f64> {
        let mut r = r.to_vec();
        r[2 * pin] = 0.0;
        r
    };
    let merit = |r: &[f64]| masked(r).iter().map(|v| v * v).sum::<f64>();

    let mut res = coupled_residual(grid, prob, &x, &y);
    let mut iterations = 0;
    while sup_norm(&masked(&res)) > target && iterations < NEWTON_MAX_ITER {
        let mut jac = BandMatrix::zeros(2 * n, 2, 2);
        for i in 0..n {
            let (r1, r2) = (2 * i, 2 * i + 1);
            jac.set(r1, 2 * i, diag[i]);
            jac.set(r1, 2 * i + 1, -(a - 1.0) * y[i].abs().powf(a - 2.0));
            jac.set(r2, 2 * i + 1, diag[i]);
            jac.set(r2, 2 * i, -(s - 1.0) * x[i].abs().powf(s - 2.0));
            if i > 0 {
                jac.set(r1, 2 * (i - 1), sub[i - 1]);
                jac.set(r2, 2 * i - 1, sup[i - 1]);
            }
            if i + 1 < n {
                jac.set(r1, 2 * (i + 1), sup[i]);
                jac.set(r2, 2 * i + 3, sub[i]);
            }
        }
        jac.clear_row(2 * pin);
        jac.set(2 * pin, 2 * pin, 1.0);
        let lu = jac.factor()?;
        let mut step: Vec<f64> = masked(&res).iter().map(|v| -v).collect();
        lu.solve_in_place(&mut step);

        let m0 = merit(&res);
        let mut t = 1.0;
        let accepted = loop {
            let xt: Vec<f64> = (0..n).map(|i| x[i] + t * step[2 * i]).collect();
            let yt: Vec<f64> = (0..n).map(|i| y[i] + t * step[2 * i + 1]).collect();
            let rt = coupled_residual(grid, prob, &xt, &yt);
            if merit(&rt) < m0 {
                break Some((xt, yt, rt));
            }
            t *= 0.5;
            if t < 1e-6 {
                break None;
            }
        };
        iterations += 1;
        let Some((xt, yt, rt)) = accepted else { break };
        x = xt;
        y = yt;
        res = rt;
    }
    res.iter().all(|v| v.is_finite()).then_some((x, y, res, iterations))
}

/// Newton's method on the coupled system `Kx = |y|^{a-2}y`, `Kᵀy = |x|^{s-2}x`
/// started from `x`, `y = |Kx|^{r-2}Kx`.
///
/// On the truncated line the translation mode is only exponentially weakly
/// pinned, so Newton runs with `x` held fixed at the node where `|x'y'|`
/// peaks and the first equation at that node dropped. What is left in the
/// dropped equation is the net force of the two truncation boundaries; when
/// it exceeds the target the profile is translated by bisection on its sign.
fn polish(grid: &LineGrid, prob: QuotientProblem, x0: &[f64], target: f64) -> Option<Polished> {
    let n = x0.len();
    let a = conj(prob.num_exp);
    if a < 2.0 || prob.den_exp < 2.0 {
        // The Jacobian is unbounded near zeros of x or y.
        return None;
    }
    let x = x0.to_vec();
    let y: Vec<f64> = apply_drift_operator(grid, prob.drift, prob.gamma, &x)
        .into_iter()
        .map(|w| signed_pow(w, prob.num_exp - 1.0))
        .collect();
    let dx = crate::operators::derivative(grid, &x);
    let dy = crate::operators::derivative(grid, &y);
    let pin = (0..n).max_by(|&i, &j| (dx[i] * dy[i]).abs().total_cmp(&(dx[j] * dy[j]).abs()))?;

    let (x, y, res, mut iterations) = pinned_newton(grid, prob, x, y, pin, target)?;
    let force = |r: &[f64]| r[2 * pin];
    let mut best = (sup_norm(&res), x.clone(), y.clone());
    let converged_elsewhere = {
        let mut r = res.clone();
        r[2 * pin] = 0.0;
        sup_norm(&r) <= target
    };
    if best.0 > target && converged_elsewhere {
        // Bracket the zero of the boundary force in the shift, then bisect.
        let eval = |shift: f64| -> Option<(f64, f64, Vec<f64>, Vec<f64>, usize)> {
            let j = pin as isize + shift.round() as isize;
            if j < 1 || j >= n as isize - 1 {
                return None;
            }
            let j = j as usize;
            let (xt, yt, rt, it) =
                pinned_newton(grid, prob, translate(&x, shift), translate(&y, shift), j, target)?;
            Some((rt[2 * j], sup_norm(&rt), xt, yt, it))
        };
        let mut probe = |shift: f64| -> Option<f64> {
            let (sigma, r, xt, yt, it) = eval(shift)?;
            iterations += it;
            if r < best.0 {
                best = (r, xt, yt);
            }
            Some(sigma)
        };
        let f0 = force(&res);
        let limit = 0.5 * n as f64;
        let mut bracket = None;
        'outer: for dir in [1.0, -1.0] {
            let mut step = 1.0;
            let mut prev = (0.0, f0);
            while step < limit {
                let Some(fs) = probe(dir * step) else { break };
                if fs.signum() != f0.signum() {
                    bracket = Some((prev, dir * step));
                    break 'outer;
                }
                if fs.abs() > prev.1.abs() {
                    break;
                }
                prev = (dir * step, fs);
                step *= 2.0;
            }
        }
        if let Some(((mut lo, flo), mut hi)) = bracket {
            for _ in 0..SHIFT_BISECTIONS {
                let mid = 0.5 * (lo + hi);
                let Some(fm) = probe(mid) else { break };
                if fm.abs() <= target {
                    break;
                }
                if fm.signum() == flo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
    }
    let (residual, x, y) = best;
    Some(Polished { x, y, residual, iterations })
}

/// A solution of the coupled system together with its quotient value.
#[derive(Debug, Clone)]
struct Solved {
    x: Vec<f64>,
    y: Vec<f64>,
    m: f64,
    /// Sup-norm of the coupled residual.
    residual: f64,
    iterations: usize,
    converged: bool,
}

/// Quotient `h Σ|Kx|^r / (h Σ|x|^s)^{r/s}` at an unnormalized `x`. It is
/// stationary at a solution, so its error is quadratic in that of `x`.
fn rayleigh(grid: &LineGrid, prob: QuotientProblem, x: &[f64]) -> f64 {
    let kx = apply_drift_operator(grid, prob.drift, prob.gamma, x);
    let num = grid.spacing() * kx.iter().map(|v| v.abs().powf(prob.num_exp)).sum::<f64>();
    let den = grid.spacing() * x.iter().map(|v| v.abs().powf(prob.den_exp)).sum::<f64>();
    num / den.powf(prob.num_exp / prob.den_exp)
}

/// Iterations spent on descent before the first Newton attempt.
const DESCENT_WARMUP: usize = 2000;
/// Relative change of the quotient tolerated between descent and polish.
const POLISH_DRIFT: f64 = 1e-2;

fn solve_from_start(
    grid: &LineGrid,
    prob: QuotientProblem,
    start: &[f64],
    opts: &SolverOptions,
) -> Result<Solved> {
    let vanishing = || Error::Precondition("initial guess vanishes".into());
    let warm = SolverOptions { max_iter: opts.max_iter.min(DESCENT_WARMUP), ..*opts };
    let mut d = descend(grid, prob, Cone::Free, start, &warm)?.ok_or_else(vanishing)?;
    let mut iterations = d.iterations;
    let mut budget = DESCENT_WARMUP;
    let mut best_polish: Option<Solved> = None;
    loop {
        let c = rescale_factor(prob, multiplier(grid, prob, &d.g))?;
        let x: Vec<f64> = d.g.iter().map(|v| c * v).collect();
        if let Some(p) = polish(grid, prob, &x, 0.1 * opts.tol) {
            let m = rayleigh(grid, prob, &p.x);
            let nontrivial = p.x.iter().any(|v| v.abs() > opts.trivial_tol);
            if nontrivial && (m - d.m).abs() <= POLISH_DRIFT * d.m {
                let candidate = Solved {
                    x: p.x,
                    y: p.y,
                    m,
                    residual: p.residual,
                    iterations: iterations + p.iterations,
                    converged: p.residual <= opts.tol,
                };
                if candidate.converged {
                    return Ok(candidate);
                }
                if best_polish.as_ref().is_none_or(|b| candidate.residual < b.residual) {
                    best_polish = Some(candidate);
                }
            }
        }
        if iterations >= opts.max_iter || d.converged || d.stalled {
            let y: Vec<f64> = apply_drift_operator(grid, prob.drift, prob.gamma, &x)
                .into_iter()
                .map(|w| signed_pow(w, prob.num_exp - 1.0))
                .collect();
            let res = coupled_residual(grid, prob, &x, &y);
            let residual = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if let Some(mut b) = best_polish.filter(|b| b.residual < residual) {
                b.iterations = iterations;
                return Ok(b);
            }
            return Ok(Solved {
                x,
                y,
                m: d.m,
                residual,
                iterations,
                converged: residual <= opts.tol,
            });
        }
        budget *= 2;
        let rest = SolverOptions { max_iter: (opts.max_iter - iterations).min(budget), ..*opts };
        d = descend(grid, prob, Cone::Free, &d.g, &rest)?.ok_or_else(vanishing)?;
        iterations += d.iterations;
    }
}

/// Runs every start and keeps the lowest quotient value; ties within the
/// tolerance go to the lower start index.
fn best_solution(
    grid: &LineGrid,
    prob: QuotientProblem,
    opts: &SolverOptions,
) -> Result<(usize, Solved, Vec<f64>)> {
    let starts = initial_guesses(grid, opts.multistarts, opts.seed);
    let runs: Vec<Result<Solved>> =
        starts.par_iter().map(|s| solve_from_start(grid, prob, s, opts)).collect();
    let mut best: Option<(usize, Solved)> = None;
    let mut values = Vec::with_capacity(runs.len());
    for (i, run) in runs.into_iter().enumerate() {
        let d = run?;
        values.push(d.m);
        let better = match &best {
            None => true,
            Some((_, b)) => {
                (d.converged && !b.converged) || d.m < b.m - opts.tol * (1.0 + b.m.abs())
            }
        };
        if better {
            best = Some((i, d));
        }
    }
    let (i, d) = best.expect("at least one start");
    Ok((i, d, values))
}

fn finish(
    grid: &LineGrid,
    red: &ReducedParams,
    mut sol: Solved,
    start_index: usize,
    start_values: Vec<f64>,
) -> Result<VariationalResult> {
    orient(&mut sol.x, &mut sol.y);
    let pair = TrajectoryPair::new(*grid, sol.x, sol.y, *red)?;
    let residual_norms = system_residual(&pair).norms;
    Ok(VariationalResult {
        pair,
        m: sol.m,
        mu: sol.m,
        iterations: sol.iterations,
        converged: sol.converged,
        stationarity: sol.residual,
        residual_norms,
        start_index,
        start_values,
    })
}

/// Minimizes `∫|L₊g|^{p'} / (∫|g|^q)^{p'/q}` and returns the rescaled pair.
///
/// Each start is first driven towards the minimizer by preconditioned
/// descent on the unit sphere; the rescaled iterate is then refined by
/// Newton's method on the coupled system. Convergence means both system
/// residuals are below `opts.tol` in the sup-norm.
pub fn minimize_quotient(
    red: &ReducedParams,
    grid: &LineGrid,
    opts: &SolverOptions,
) -> Result<VariationalResult> {
    check_solvable(red)?;
    let prob = QuotientProblem::primal(red);
    let (start_index, sol, start_values) = best_solution(grid, prob, opts)?;
    finish(grid, red, sol, start_index, start_values)
}

/// Same as [`minimize_quotient`] from a single caller-supplied start.
pub fn minimize_from(
    red: &ReducedParams,
    grid: &LineGrid,
    start: &[f64],
    opts: &SolverOptions,
) -> Result<VariationalResult> {
    check_solvable(red)?;
    let prob = QuotientProblem::primal(red);
    let sol = solve_from_start(grid, prob, start, opts)?;
    let m = sol.m;
    finish(grid, red, sol, 0, vec![m])
}

/// Plain projected descent on the unit sphere, without the Newton stage.
pub fn descend_quotient(
    grid: &LineGrid,
    prob: QuotientProblem,
    start: &[f64],
    opts: &SolverOptions,
) -> Result<Descent> {
    descend(grid, prob, Cone::Free, start, opts)?
        .ok_or_else(|| Error::Precondition("initial guess vanishes".into()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualityReport {
    pub m: f64,
    pub m_tilde: f64,
    /// `m̃^{(q-p')/q}`.
    pub lhs: f64,
    /// `m^{(p-q')/p}`.
    pub rhs: f64,
    pub defect: f64,
}

/// Minimizes both `I_{p',q}(A,Γ)` and `I_{q',p}(-A,Γ)` and compares
/// `m̃^{(q-p')/q}` with `m^{(p-q')/p}`.
pub fn duality_check(
    params: &SystemParams,
    grid: &LineGrid,
    opts: &SolverOptions,
) -> Result<DualityReport> {
    let red = derive_reduced(params)?;
    check_solvable(&red)?;
    let (_, primal, _) = best_solution(grid, QuotientProblem::primal(&red), opts)?;
    let (_, dual, _) = best_solution(grid, QuotientProblem::dual(&red), opts)?;
    if !primal.converged || !dual.converged {
        return Err(Error::NonConvergence(format!(
            "duality check: residual {:.3e} (primal), {:.3e} (dual)",
            primal.residual, dual.residual
        )));
    }
    let (p, q, pc, qc) = (red.p, red.q, red.p_conj, red.q_conj);
    let lhs = dual.m.powf((q - pc) / q);
    let rhs = primal.m.powf((p - qc) / p);
    Ok(DualityReport { m: primal.m, m_tilde: dual.m, lhs, rhs, defect: (lhs - rhs).abs() / rhs })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbeVerdict {
    /// The rescaled nonnegative candidate shrinks below the trivial threshold,
    /// consistent with nonexistence of nonnegative decaying solutions.
    Collapse,
    /// The candidate stays nontrivial with a residual bounded away from zero.
    ResidualFloor,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeRun {
    pub start_index: usize,
    pub verdict: ProbeVerdict,
    /// `‖g‖∞` of the rescaled candidate.
    pub final_sup: f64,
    /// `‖g‖∞` of the rescaled candidate at iterates 0, 1, 2, 4, ...
    pub sup_trend: Vec<f64>,
    /// Smallest sup-norm of the system residual seen along the trend.
    pub best_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeReport {
    pub verdict: ProbeVerdict,
    pub runs: Vec<ProbeRun>,
    pub note: String,
}

/// Nonnegative candidate `(cg, f⁺)` with `f⁺ = φ((L₊cg)⁺)` for a unit-sphere
/// iterate `g ≥ 0`.
fn nonneg_candidate(grid: &LineGrid, red: &ReducedParams, g_hat: &[f64]) -> TrajectoryPair {
    let prob = QuotientProblem::primal(red);
    let w = apply_drift_operator(grid, prob.drift, prob.gamma, g_hat);
    let num: f64 = w.iter().map(|x| x.max(0.0).powf(prob.num_exp)).sum();
    let den: f64 = g_hat.iter().map(|x| x.abs().powf(prob.den_exp)).sum();
    let mu = if den > 0.0 { num / den } else { 0.0 };
    let c = if mu > 0.0 { mu.powf(1.0 / (prob.den_exp - prob.num_exp)) } else { 0.0 };
    let g: Vec<f64> = g_hat.iter().map(|v| c * v).collect();
    let f: Vec<f64> = crate::operators::apply_lplus(grid, red, &g)
        .into_iter()
        .map(|x| signed_pow(x.max(0.0), red.p_conj - 1.0))
        .collect();
    TrajectoryPair { grid: *grid, g, f, red: *red }
}

/// Shortest descent chunk after which an unchanged candidate counts as a
/// plateau.
const PROBE_PLATEAU_CHUNK: usize = 64;

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Probe from one start: projected descent on `{g ≥ 0}` with `f` clamped to
/// `{f ≥ 0}`, tracking the rescaled candidate.
pub fn nonneg_probe_from(
    red: &ReducedParams,
    grid: &LineGrid,
    start: &[f64],
    opts: &SolverOptions,
) -> Result<ProbeRun> {
    check_probe(red)?;
    let prob = QuotientProblem::primal(red);
    let mut trend = Vec::new();
    let mut best_residual = f64::INFINITY;
    let mut iterations = 0;
    let mut g_hat = start.iter().map(|v| v.max(0.0)).collect::<Vec<_>>();
    if sup(&g_hat) == 0.0 {
        return Ok(ProbeRun {
            start_index: 0,
            verdict: ProbeVerdict::Collapse,
            final_sup: 0.0,
            sup_trend: vec![0.0],
            best_residual: 0.0,
            iterations: 0,
        });
    }
    // Run the descent in doubling chunks so the candidate trend is recorded.
    let mut chunk = 1usize;
    loop {
        let cand = nonneg_candidate(grid, red, &g_hat);
        trend.push(sup(&cand.g));
        let (r1, r2) = system_residual(&cand).norms;
        best_residual = best_residual.min(r1.max(r2));
        if iterations >= opts.max_iter {
            break;
        }
        let local = SolverOptions { max_iter: chunk.min(opts.max_iter - iterations), ..*opts };
        let Some(d) = descend(grid, prob, Cone::Nonneg, &g_hat, &local)? else {
            break;
        };
        let stalled = d.iterations < local.max_iter;
        iterations += d.iterations;
        g_hat = d.g;
        let prev = *trend.last().unwrap_or(&0.0);
        let now = sup(&nonneg_candidate(grid, red, &g_hat).g);
        let plateau = chunk >= PROBE_PLATEAU_CHUNK && (now - prev).abs() <= 1e-9 * prev;
        if stalled || d.converged || plateau {
            let cand = nonneg_candidate(grid, red, &g_hat);
            trend.push(sup(&cand.g));
            let (r1, r2) = system_residual(&cand).norms;
            best_residual = best_residual.min(r1.max(r2));
            break;
        }
        chunk *= 2;
    }
    let final_sup = *trend.last().unwrap_or(&0.0);
    let verdict = if final_sup < opts.trivial_tol {
        ProbeVerdict::Collapse
    } else {
        ProbeVerdict::ResidualFloor
    };
    Ok(ProbeRun { start_index: 0, verdict, final_sup, sup_trend: trend, best_residual, iterations })
}

fn check_probe(red: &ReducedParams) -> Result<()> {
    if red.gamma > 0.0 {
        return Err(Error::Precondition(
            "nonnegativity probe needs Gamma <= 0; for Gamma > 0 sign-definite solutions exist"
                .into(),
        ));
    }
    Ok(())
}

/// Runs the probe from the multistart battery; the verdict is `Collapse`
/// only if every start collapses.
pub fn nonneg_probe(red: &ReducedParams, grid: &LineGrid, opts: &SolverOptions) -> Result<ProbeReport> {
    check_probe(red)?;
    let starts = initial_guesses(grid, opts.multistarts, opts.seed);
    let runs: Vec<Result<ProbeRun>> = starts
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            nonneg_probe_from(red, grid, s, opts).map(|mut r| {
                r.start_index = i;
                r
            })
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let verdict = if runs.iter().all(|r| r.verdict == ProbeVerdict::Collapse) {
        ProbeVerdict::Collapse
    } else {
        ProbeVerdict::ResidualFloor
    };
    let note = match verdict {
        ProbeVerdict::Collapse => {
            "every nonnegative candidate collapsed to zero; consistent with nonexistence of \
             nonnegative decaying solutions (numerical witness, not a proof)"
        }
        ProbeVerdict::ResidualFloor => {
            "some nonnegative candidate stayed nontrivial with a residual floor"
        }
    }
    .to_string();
    Ok(ProbeReport { verdict, runs, note })
}
