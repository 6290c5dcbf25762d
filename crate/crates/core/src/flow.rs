//! Fixed-step RK4 integration of the first-order Hamiltonian form
//!
//! ```text
//! X' = ∂_Y H(X, Y),   Y' = -∂_X H(X, Y)
//! ```
//!
//! used as an independent check on grid solutions and for monitoring the
//! conservation of `H`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{derivative, hamiltonian, signed_pow, HamiltonianState, TrajectoryPair};
use crate::params::ReducedParams;
use crate::variational::VariationalResult;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    pub dt: f64,
    /// State sup-norm at which integration stops and reports blow-up.
    pub blowup_cap: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { dt: 1e-3, blowup_cap: 1e8 }
    }
}

#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<HamiltonianState>,
    pub h_values: Vec<f64>,
    pub red: ReducedParams,
    pub blew_up: bool,
}

impl FlowTrajectory {
    /// `max |H(t) - H(t₀)|`.
    pub fn drift(&self) -> f64 {
        let h0 = self.h_values[0];
        self.h_values.iter().fold(0.0, |m, h| m.max((h - h0).abs()))
    }

    pub fn last(&self) -> &HamiltonianState {
        self.states.last().expect("trajectory holds the start state")
    }
}

fn rhs(s: &HamiltonianState, red: &ReducedParams) -> HamiltonianState {
    let a = red.drift;
    let c = a * a + red.gamma;
    let [x1, x2] = s.x;
    let [y1, y2] = s.y;
    HamiltonianState {
        x: [y2 + a * x1, y1 - a * x2],
        y: [
            -(a * y1 - c * x2 + signed_pow(x1, red.q - 1.0)),
            -(-a * y2 - c * x1 + signed_pow(x2, red.p - 1.0)),
        ],
    }
}

fn axpy(s: &HamiltonianState, k: &HamiltonianState, t: f64) -> HamiltonianState {
    HamiltonianState {
        x: [s.x[0] + t * k.x[0], s.x[1] + t * k.x[1]],
        y: [s.y[0] + t * k.y[0], s.y[1] + t * k.y[1]],
    }
}

/// RK4 increment `dt/6 (k₁ + 2k₂ + 2k₃ + k₄)` as `[x₁, x₂, y₁, y₂]`.
fn rk4_increment(s: &HamiltonianState, red: &ReducedParams, dt: f64) -> [f64; 4] {
    let k1 = rhs(s, red);
    let k2 = rhs(&axpy(s, &k1, 0.5 * dt), red);
    let k3 = rhs(&axpy(s, &k2, 0.5 * dt), red);
    let k4 = rhs(&axpy(s, &k3, dt), red);
    let w = dt / 6.0;
    let comb = |a: f64, b: f64, c: f64, d: f64| w * (a + 2.0 * b + 2.0 * c + d);
    [
        comb(k1.x[0], k2.x[0], k3.x[0], k4.x[0]),
        comb(k1.x[1], k2.x[1], k3.x[1], k4.x[1]),
        comb(k1.y[0], k2.y[0], k3.y[0], k4.y[0]),
        comb(k1.y[1], k2.y[1], k3.y[1], k4.y[1]),
    ]
}

/// Integrates from `start` at `t_span.0` to `t_span.1`. The step is
/// `opts.dt`, shrunk if necessary so that it divides the span.
pub fn integrate(
    start: HamiltonianState,
    red: &ReducedParams,
    t_span: (f64, f64),
    opts: &FlowOptions,
) -> Result<FlowTrajectory> {
    let (t0, t1) = t_span;
    if !(t0.is_finite() && t1.is_finite() && t1 >= t0) {
        return Err(Error::Precondition(format!("time span ({t0}, {t1}) is not ordered")));
    }
    if !(opts.dt > 0.0) {
        return Err(Error::Precondition(format!("step dt = {} must be positive", opts.dt)));
    }
    if !(start.x.iter().chain(&start.y).all(|v| v.is_finite())) {
        return Err(Error::Precondition("start state is not finite".into()));
    }
    let steps = ((t1 - t0) / opts.dt - 1e-9).ceil().max(0.0) as usize;
    Ok(run(start, red, t0, if steps == 0 { 0.0 } else { (t1 - t0) / steps as f64 }, steps, opts))
}

/// `steps` RK4 steps of signed size `dt` from time `t0`.
fn run(
    start: HamiltonianState,
    red: &ReducedParams,
    t0: f64,
    dt: f64,
    steps: usize,
    opts: &FlowOptions,
) -> FlowTrajectory {
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut h_values = Vec::with_capacity(steps + 1);
    let mut state = start;
    times.push(t0);
    states.push(state);
    h_values.push(hamiltonian(&state, red));
    let mut blew_up = false;
    // Compensated summation keeps the accumulated round-off of the state at
    // O(ε) instead of O(ε · steps), so the O(dt⁴) drift stays measurable.
    let mut carry = [0.0f64; 4];
    for k in 1..=steps {
        let inc = rk4_increment(&state, red, dt);
        let mut comp = [state.x[0], state.x[1], state.y[0], state.y[1]];
        for ((v, c), d) in comp.iter_mut().zip(carry.iter_mut()).zip(inc) {
            let y = d - *c;
            let t = *v + y;
            *c = (t - *v) - y;
            *v = t;
        }
        state = HamiltonianState { x: [comp[0], comp[1]], y: [comp[2], comp[3]] };
        let norm = state.norm_inf();
        if !(norm <= opts.blowup_cap) {
            blew_up = true;
            break;
        }
        times.push(t0 + k as f64 * dt);
        states.push(state);
        h_values.push(hamiltonian(&state, red));
    }
    FlowTrajectory { times, states, h_values, red: *red, blew_up }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossCheckOptions {
    pub flow: FlowOptions,
    /// Half-width of the comparison window around the anchor node;
    /// `None` means `0.8 L`. Always capped at `0.8 L`.
    pub window: Option<f64>,
    /// Nodes where `max(|g|, |f|)` is below this are not compared.
    pub magnitude_floor: f64,
}

impl Default for CrossCheckOptions {
    fn default() -> Self {
        Self { flow: FlowOptions::default(), window: None, magnitude_floor: 1e-6 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossCheckReport {
    pub anchor_index: usize,
    pub anchor_s: f64,
    /// Sup over compared nodes of `max(|X₁ - g|, |X₂ - f|)`.
    pub deviation: f64,
    pub compared_nodes: usize,
    pub window: f64,
    pub blew_up_forward: bool,
    pub blew_up_backward: bool,
    /// `H` drift along both integrations.
    pub drift: f64,
}

/// Integrates from the node of the grid solution where `|g|` peaks in both
/// directions and measures the deviation from the grid trajectory.
pub fn cross_check(vr: &VariationalResult, opts: &CrossCheckOptions) -> Result<CrossCheckReport> {
    if !vr.converged {
        return Err(Error::Precondition("cross-check needs a converged solution".into()));
    }
    cross_check_pair(&vr.pair, opts)
}

/// [`cross_check`] for any sampled pair.
pub fn cross_check_pair(pair: &TrajectoryPair, opts: &CrossCheckOptions) -> Result<CrossCheckReport> {
    let grid = pair.grid;
    let h = grid.spacing();
    let cap = 0.8 * grid.half_length();
    let window = opts.window.map_or(cap, |w| w.min(cap));
    let anchor = (0..pair.g.len())
        .max_by(|&i, &j| pair.g[i].abs().total_cmp(&pair.g[j].abs()))
        .unwrap_or(0);
    let gp = derivative(&grid, &pair.g);
    let fp = derivative(&grid, &pair.f);
    let start = HamiltonianState::from_line(pair.g[anchor], pair.f[anchor], gp[anchor], fp[anchor], &pair.red);

    // Land exactly on grid nodes.
    let sub = (h / opts.flow.dt).ceil().max(1.0) as usize;
    let dt = h / sub as f64;
    let nodes_ahead = ((window / h + 1e-9).floor() as usize).min(pair.g.len() - 1 - anchor);
    let nodes_behind = ((window / h + 1e-9).floor() as usize).min(anchor);
    let fwd = run(start, &pair.red, 0.0, dt, nodes_ahead * sub, &opts.flow);
    let bwd = run(start, &pair.red, 0.0, -dt, nodes_behind * sub, &opts.flow);

    let mut deviation = 0.0f64;
    let mut compared = 0;
    let mut compare = |traj: &FlowTrajectory, dir: isize, count: usize| {
        for k in 0..=count {
            let idx = k * sub;
            if idx >= traj.states.len() {
                break;
            }
            let i = (anchor as isize + dir * k as isize) as usize;
            if pair.g[i].abs().max(pair.f[i].abs()) <= opts.magnitude_floor {
                continue;
            }
            let st = &traj.states[idx];
            deviation = deviation.max((st.x[0] - pair.g[i]).abs()).max((st.x[1] - pair.f[i]).abs());
            compared += 1;
        }
    };
    compare(&fwd, 1, nodes_ahead);
    compare(&bwd, -1, nodes_behind);
    Ok(CrossCheckReport {
        anchor_index: anchor,
        anchor_s: grid.node(anchor),
        deviation,
        compared_nodes: compared,
        window,
        blew_up_forward: fwd.blew_up,
        blew_up_backward: bwd.blew_up,
        drift: fwd.drift().max(bwd.drift()),
    })
}
