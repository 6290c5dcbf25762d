//! Command-line front end: classification, solving, verification of saved
//! trajectories, Rellich constants and parameter sweeps.
//!
//! Every command writes one JSON document (or a flattened CSV table) to
//! `--out`, or to standard output when no path is given. Reports carry a
//! top-level `schema_version`. Exit codes: 0 success, 2 invalid parameters,
//! 3 solver nonconvergence, 4 I/O or input-format failure.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::operators::{energy, energy_terms, system_residual, LineGrid, TrajectoryPair};
use crate::params::{
    apriori_bounds, classify_regime, derive_reduced, equilibria, RegimeTag, SystemParams,
};
use crate::radial::{decay_limits, p2_qualitative_check, pde_residual, to_radial, DecayReport, P2Report};
use crate::rellich::{self, RellichParams};
use crate::variational::{duality_check, minimize_quotient, SolverOptions};

pub const SCHEMA_VERSION: u32 = 1;

/// Nodes where both components are below this magnitude are not sign-checked.
pub const SIGN_FLOOR: f64 = 1e-6;

pub const TRAJECTORY_COLUMNS: [&str; 6] = ["s", "g", "f", "gp", "fp", "energy"];
pub const RADIAL_COLUMNS: [&str; 5] = ["r", "u", "v", "residual1", "residual2"];

#[derive(Debug, Parser)]
#[command(name = "hle", version, about = "Radial Lane-Emden systems on the critical hyperbola")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reduced coefficients, regime, a-priori bounds and equilibria.
    Classify(ClassifyArgs),
    /// Compute a ground state and write the report plus trajectory CSVs.
    Solve(SolveArgs),
    /// Re-run every verifier on a saved trajectory CSV.
    Verify(VerifyArgs),
    /// Weighted Rellich constants for `(n, θ, α)`.
    Rellich(RellichArgs),
    /// Classify (and optionally solve) a cartesian grid of parameters.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SystemArgs {
    #[arg(long)]
    pub n: u32,
    #[arg(long, allow_negative_numbers = true)]
    pub a: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub b: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub p: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub q: f64,
}

impl SystemArgs {
    pub fn params(&self) -> SystemParams {
        SystemParams::new(self.n, self.a, self.b, self.p, self.q)
    }
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Half-length of the truncated line `[-L, L]`.
    #[arg(long = "L", default_value_t = 15.0)]
    pub half_length: f64,
    #[arg(long, default_value_t = 0.01)]
    pub h: f64,
}

impl GridArgs {
    fn grid(&self) -> Result<LineGrid> {
        positive("L", self.half_length)?;
        positive("h", self.h)?;
        LineGrid::new(self.half_length, self.h)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long = "max-iter", default_value_t = 200_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub multistarts: usize,
}

impl SolverArgs {
    fn options(&self) -> Result<SolverOptions> {
        positive("tol", self.tol)?;
        if self.max_iter == 0 || self.multistarts == 0 {
            return Err(Error::InvalidParams("max-iter and multistarts must be positive".into()));
        }
        Ok(SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            seed: self.seed,
            multistarts: self.multistarts,
            ..SolverOptions::default()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Also solve the dual problem and report the duality defect.
    #[arg(long)]
    pub duality: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Trajectory CSV written by `solve`.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct RellichArgs {
    #[arg(long)]
    pub n: u32,
    #[arg(long, allow_negative_numbers = true)]
    pub theta: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Comma-separated dimensions.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<u32>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub a: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub p: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub q: Vec<f64>,
    /// Only classify; skip the solver.
    #[arg(long)]
    pub classify_only: bool,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} = {v} must be positive")))
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidParams(_) | Error::Precondition(_) => 2,
        Error::NonConvergence(_) => 3,
        Error::Parse(_) | Error::Io(_) | Error::Json(_) => 4,
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Classify(args) => classify(&args),
        Command::Solve(args) => solve(&args),
        Command::Verify(args) => verify(&args),
        Command::Rellich(args) => rellich_cmd(&args),
        Command::Sweep(args) => sweep(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignReport {
    pub expected_positive: bool,
    pub nodes_checked: usize,
    pub violations: usize,
    pub all_positive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub g_sup: f64,
    pub f_sup: f64,
    pub g_bound: f64,
    pub f_bound: f64,
    pub within: bool,
}

/// Everything that can be recomputed from a saved trajectory alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub residual_norms: (f64, f64),
    /// Largest `|E(s)|` over the grid.
    pub energy_drift: f64,
    /// Largest magnitude of any single energy summand.
    pub energy_scale: f64,
    pub sign_report: SignReport,
    pub bound_check: BoundCheck,
    pub decay_report: Option<DecayReport>,
    /// Sup-norms of the relative radial residuals.
    pub pde_residual: (f64, f64),
    pub p2_report: Option<P2Report>,
}

pub fn verify_pair(pair: &TrajectoryPair, params: &SystemParams) -> Result<Verification> {
    let red = &pair.red;
    let residual_norms = system_residual(pair).norms;
    let energy_drift = energy(pair).iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let energy_scale = energy_terms(pair)
        .iter()
        .flat_map(|t| t.iter())
        .fold(0.0f64, |m, e| m.max(e.abs()));

    let mut nodes_checked = 0;
    let mut violations = 0;
    for (&g, &f) in pair.g.iter().zip(&pair.f) {
        if g.abs().max(f.abs()) > SIGN_FLOOR {
            nodes_checked += 1;
            if g * f <= 0.0 {
                violations += 1;
            }
        }
    }
    let sign_report = SignReport {
        expected_positive: red.gamma > 0.0,
        nodes_checked,
        violations,
        all_positive: violations == 0,
    };

    let (g_bound, f_bound) = apriori_bounds(red);
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let (g_sup, f_sup) = (sup(&pair.g), sup(&pair.f));
    let bound_check = BoundCheck {
        g_sup,
        f_sup,
        g_bound,
        f_bound,
        within: g_sup <= g_bound && f_sup <= f_bound,
    };

    let decay_report = decay_limits(pair).ok();
    let pde = pde_residual(&to_radial(pair, params)?)?;
    let p2_report = if red.p == 2.0 { p2_qualitative_check(pair).ok() } else { None };
    Ok(Verification {
        residual_norms,
        energy_drift,
        energy_scale,
        sign_report,
        bound_check,
        decay_report,
        pde_residual: pde.norms,
        p2_report,
    })
}

fn grid_json(grid: &LineGrid) -> Value {
    json!({ "L": grid.half_length(), "h": grid.spacing(), "nodes": grid.len() })
}

fn classify(args: &ClassifyArgs) -> Result<i32> {
    let params = args.system.params();
    let red = derive_reduced(&params)?;
    let regime = classify_regime(&params)?;
    let (g_bound, f_bound) = apriori_bounds(&red);
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "classify",
        "params": params,
        "hyperbola_defect": params.hyperbola_defect(),
        "reduced": red,
        "regime": regime,
        "apriori_bounds": { "g_bound": g_bound, "f_bound": f_bound },
        "equilibria": equilibria(&red),
    });
    emit(&report, &args.output)?;
    Ok(0)
}

fn solve(args: &SolveArgs) -> Result<i32> {
    let params = args.system.params();
    let red = derive_reduced(&params)?;
    let grid = args.grid.grid()?;
    let opts = args.solver.options()?;
    let regime = classify_regime(&params)?;
    let vr = minimize_quotient(&red, &grid, &opts)?;
    let verification = verify_pair(&vr.pair, &params)?;
    let duality_defect = if args.duality {
        Some(duality_check(&params, &grid, &opts)?.defect)
    } else {
        None
    };

    let mut report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "solve",
        "params": params,
        "reduced": red,
        "regime": regime.tag,
        "grid": grid_json(&grid),
        "options": opts,
        "m": vr.m,
        "mu": vr.mu,
        "converged": vr.converged,
        "iterations": vr.iterations,
        "start_index": vr.start_index,
        "stationarity": vr.stationarity,
        "duality_defect": duality_defect,
    });
    merge(&mut report, serde_json::to_value(&verification)?);
    emit(&report, &args.output)?;

    if let Some(out) = &args.output.out {
        write_trajectory_csv(&companion(out, "trajectory"), &vr.pair)?;
        let sol = to_radial(&vr.pair, &params)?;
        let res = pde_residual(&sol)?;
        let mut rows = Vec::with_capacity(sol.radii.len());
        for i in 0..sol.radii.len() {
            rows.push([sol.radii[i], sol.u[i], sol.v[i], res.rel1[i], res.rel2[i]]);
        }
        write_csv(&companion(out, "radial"), &RADIAL_COLUMNS, &rows)?;
    }
    Ok(if vr.converged { 0 } else { 3 })
}

fn verify(args: &VerifyArgs) -> Result<i32> {
    let params = args.system.params();
    let red = derive_reduced(&params)?;
    let pair = read_trajectory_csv(&args.input, red)?;
    let verification = verify_pair(&pair, &params)?;
    let mut report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "verify",
        "params": params,
        "grid": grid_json(&pair.grid),
    });
    merge(&mut report, serde_json::to_value(&verification)?);
    emit(&report, &args.output)?;
    Ok(0)
}

fn rellich_cmd(args: &RellichArgs) -> Result<i32> {
    let rp = RellichParams::new(args.n, args.theta, args.alpha)?;
    let mu2 = (args.theta == 2.0).then(|| {
        let (value, k) = rellich::mu2(args.n, args.alpha);
        json!({ "value": value, "k": k })
    });
    let (mu_theta, note) = match rellich::mu_theta(args.n, args.theta, args.alpha) {
        Ok(v) => (Some(v), None),
        Err(Error::Precondition(msg)) => (None, Some(msg)),
        Err(e) => return Err(e),
    };
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "rellich",
        "n": rp.n,
        "theta": rp.theta,
        "alpha": rp.alpha,
        "Gamma_appx": rp.gamma,
        "A_appx": rp.drift,
        "mu2": mu2,
        "mu_theta": mu_theta,
        "mu_theta_note": note,
        "theta_double_star": rellich::theta_double_star(args.n, args.theta),
    });
    emit(&report, &args.output)?;
    Ok(0)
}

/// Canonically ordered, duplicate-free `(n, a, p, q)` tuples.
pub fn sweep_tuples(n: &[u32], a: &[f64], p: &[f64], q: &[f64]) -> Vec<(u32, f64, f64, f64)> {
    let mut out = Vec::with_capacity(n.len() * a.len() * p.len() * q.len());
    for &ni in n {
        for &ai in a {
            for &pi in p {
                for &qi in q {
                    out.push((ni, ai, pi, qi));
                }
            }
        }
    }
    out.sort_by(|x, y| {
        x.0.cmp(&y.0)
            .then(x.1.total_cmp(&y.1))
            .then(x.2.total_cmp(&y.2))
            .then(x.3.total_cmp(&y.3))
    });
    out.dedup_by(|x, y| {
        x.0 == y.0 && x.1.to_bits() == y.1.to_bits() && x.2.to_bits() == y.2.to_bits()
            && x.3.to_bits() == y.3.to_bits()
    });
    out
}

fn sweep_record(
    (n, a, p, q): (u32, f64, f64, f64),
    grid: &LineGrid,
    opts: &SolverOptions,
    classify_only: bool,
) -> (Value, i32) {
    let params = SystemParams::on_hyperbola(n, a, p, q);
    let mut rec = json!({ "params": params });
    let outcome = (|| -> Result<i32> {
        let red = derive_reduced(&params)?;
        let regime = classify_regime(&params)?;
        rec["regime"] = serde_json::to_value(regime.tag)?;
        rec["gamma"] = json!(red.gamma);
        if classify_only || regime.tag != RegimeTag::PositiveExistence {
            return Ok(0);
        }
        let vr = minimize_quotient(&red, grid, opts)?;
        rec["m"] = json!(vr.m);
        rec["mu"] = json!(vr.mu);
        rec["converged"] = json!(vr.converged);
        rec["residual_norms"] = json!(vr.residual_norms);
        Ok(if vr.converged { 0 } else { 3 })
    })();
    match outcome {
        Ok(code) => (rec, code),
        Err(e) => {
            let code = exit_code(&e);
            rec["error"] = json!({ "code": code, "message": e.to_string() });
            (rec, code)
        }
    }
}

fn sweep(args: &SweepArgs) -> Result<i32> {
    let grid = args.grid.grid()?;
    let opts = args.solver.options()?;
    let tuples = sweep_tuples(&args.n, &args.a, &args.p, &args.q);
    let results: Vec<(Value, i32)> = tuples
        .par_iter()
        .map(|&t| sweep_record(t, &grid, &opts, args.classify_only))
        .collect();
    let code = results.iter().map(|r| r.1).find(|&c| c != 0).unwrap_or(0);
    let records: Vec<Value> = results.into_iter().map(|r| r.0).collect();
    match args.output.format {
        Format::Json => {
            let report = json!({
                "schema_version": SCHEMA_VERSION,
                "command": "sweep",
                "grid": grid_json(&grid),
                "options": opts,
                "records": records,
            });
            write_text(args.output.out.as_deref(), &to_json_text(&report)?)?;
        }
        Format::Csv => write_text(args.output.out.as_deref(), &records_to_csv(&records)?)?,
    }
    Ok(code)
}

fn merge(target: &mut Value, extra: Value) {
    if let (Value::Object(t), Value::Object(e)) = (target, extra) {
        t.extend(e);
    }
}

fn to_json_text(v: &Value) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn emit(report: &Value, output: &OutputArgs) -> Result<()> {
    let text = match output.format {
        Format::Json => to_json_text(report)?,
        Format::Csv => records_to_csv(std::slice::from_ref(report))?,
    };
    write_text(output.out.as_deref(), &text)
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

/// `dir/stem.ext` becomes `dir/stem_<tag>.csv`.
pub fn companion(out: &Path, tag: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}_{tag}.csv"))
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn flatten(prefix: &str, v: &Value, out: &mut Map<String, Value>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}.{i}"), x, out);
            }
        }
        _ => {
            out.insert(prefix.to_string(), v.clone());
        }
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) if n.is_f64() => fmt_f64(n.as_f64().unwrap_or(f64::NAN)),
        other => other.to_string(),
    }
}

/// One CSV row per record with nested keys joined by dots; columns are the
/// sorted union of all keys.
pub fn records_to_csv(records: &[Value]) -> Result<String> {
    let flat: Vec<Map<String, Value>> = records
        .iter()
        .map(|r| {
            let mut m = Map::new();
            flatten("", r, &mut m);
            m
        })
        .collect();
    let columns: BTreeSet<&String> = flat.iter().flat_map(|m| m.keys()).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns.iter().map(|c| c.as_str()))?;
    for m in &flat {
        w.write_record(columns.iter().map(|c| m.get(*c).map(cell).unwrap_or_default()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

fn write_csv<const K: usize>(path: &Path, header: &[&str; K], rows: &[[f64; K]]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|&x| fmt_f64(x)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory_csv(path: &Path, pair: &TrajectoryPair) -> Result<()> {
    let gp = pair.g_prime();
    let fp = pair.f_prime();
    let e = energy(pair);
    let rows: Vec<[f64; 6]> = (0..pair.g.len())
        .map(|i| [pair.grid.node(i), pair.g[i], pair.f[i], gp[i], fp[i], e[i]])
        .collect();
    write_csv(path, &TRAJECTORY_COLUMNS, &rows)
}

/// Rebuilds a pair from the `s`, `g` and `f` columns; the derived columns are
/// ignored and recomputed by the verifiers.
pub fn read_trajectory_csv(path: &Path, red: crate::params::ReducedParams) -> Result<TrajectoryPair> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(TRAJECTORY_COLUMNS.iter().copied()) {
        return Err(Error::Parse(format!(
            "expected columns {}, found {}",
            TRAJECTORY_COLUMNS.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let (mut s, mut g, mut f) = (Vec::new(), Vec::new(), Vec::new());
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |j: usize| -> Result<f64> {
            rec.get(j)
                .unwrap_or_default()
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("row {}: column {}: {e}", line + 2, TRAJECTORY_COLUMNS[j])))
        };
        s.push(num(0)?);
        g.push(num(1)?);
        f.push(num(2)?);
    }
    let grid = LineGrid::from_nodes(&s)?;
    TrajectoryPair::new(grid, g, f, red)
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::Io(io),
                other => Error::Parse(format!("{other:?}")),
            }
        } else {
            Error::Parse(e.to_string())
        }
    }
}
