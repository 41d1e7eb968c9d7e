//! Runs a scenario: simulation, requested checks, and the `timeseries.csv` /
//! `report.json` artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::comparison::{
    check_subsolution, monotone_iterate, sandwich_verify, transport_candidate, volterra_iterate_b, IterateOptions,
    Location, OrderVerdict,
};
use crate::discretization::{AgeGrid, AgeProfile, ORDER_TOL_FACTOR};
use crate::error::{Error, Result};
use crate::general::{
    assumption_probe, general_simulate, random_profile, trajectory_monotone_check, GeneralModel, GeneralParams,
    GeneralState, TimeMonotonicity,
};
use crate::hiv::{hiv_bounds, hiv_frozen_simulate, HivBounds, HivModel, HivParams, HivState};
use crate::invariance::{a_star, invariance_check, BoundaryChecks, Region};
use crate::operator::{transport_step, SurvivalFactors};
use crate::sir::{sir_bounds, sir_frozen_simulate, SirBounds, SirModel, SirParams, SirState};
use crate::spectral::{functional_series, spectral_hiv, spectral_sir, SpectralData};
use crate::trajectory::{march, march_partial, CharacteristicModel, ModelState, Trajectory};

use super::config::{BuiltModel, CheckKind, Scenario};
use super::convergence::convergence_study;

pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const REPORT_FILE: &str = "report.json";
pub const GAMMA_PROFILES_FILE: &str = "gamma_profiles.csv";

/// Subcommands of the runner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Bounds,
    Spectral,
    Compare,
    Invariance,
    Probe,
    Convergence { levels: usize },
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Bounds => "bounds",
            Command::Spectral => "spectral",
            Command::Compare => "compare",
            Command::Invariance => "invariance",
            Command::Probe => "probe",
            Command::Convergence { .. } => "convergence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Outcome of one check with its tightest point.
#[derive(Debug, Clone, Serialize)]
pub struct CheckVerdict {
    pub name: String,
    pub verdict: Verdict,
    /// Smallest slack of the checked inequalities; negative means violated.
    pub worst_margin: f64,
    pub location: Option<Location>,
    pub details: Value,
}

impl CheckVerdict {
    pub(crate) fn new(name: &str, passed: bool, worst_margin: f64, location: Option<Location>, details: Value) -> Self {
        CheckVerdict {
            name: name.to_string(),
            verdict: if passed { Verdict::Pass } else { Verdict::Fail },
            // drops the sign of a negative zero
            worst_margin: worst_margin + 0.0,
            location,
            details,
        }
    }

    fn errored(name: &str, err: &Error) -> Self {
        Self::new(
            name,
            false,
            f64::NEG_INFINITY,
            None,
            json!({ "error": err.to_string() }),
        )
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverFailure {
    pub step: Option<usize>,
    pub message: String,
}

impl SolverFailure {
    fn from_error(e: &Error) -> Self {
        let step = match e {
            Error::AtStep { step, .. } => Some(*step),
            _ => None,
        };
        SolverFailure {
            step,
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub output_dir: PathBuf,
    pub quiet: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub checks: Vec<CheckVerdict>,
    pub solver_error: Option<SolverFailure>,
    pub report: Value,
    pub artifacts: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.solver_error.is_none() && self.checks.iter().all(CheckVerdict::passed)
    }

    /// 0 when every check passed, 1 when a check failed, 2 on solver errors.
    pub fn exit_code(&self) -> i32 {
        if self.solver_error.is_some() {
            2
        } else if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let v = if c.passed() { "pass" } else { "FAIL" };
            out.push_str(&format!("{:<22} {v}  worst margin {:.3e}", c.name, c.worst_margin));
            if let Some(loc) = &c.location {
                match loc.a {
                    Some(a) => out.push_str(&format!(" at t={} a={} ({})", loc.t, a, loc.component)),
                    None => out.push_str(&format!(" at t={} ({})", loc.t, loc.component)),
                }
            }
            out.push('\n');
        }
        if let Some(e) = &self.solver_error {
            out.push_str(&format!("solver error: {}\n", e.message));
        }
        for a in &self.artifacts {
            out.push_str(&format!("wrote {}\n", a.display()));
        }
        out
    }
}

/// Column-oriented table written as CSV with a header row.
struct Table {
    columns: Vec<(String, Vec<f64>)>,
}

impl Table {
    fn new() -> Self {
        Table { columns: Vec::new() }
    }

    fn push(&mut self, name: impl Into<String>, values: Vec<f64>) {
        self.columns.push((name.into(), values));
    }

    fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.columns.iter().map(|(n, _)| n.as_str()))?;
        let rows = self.columns.iter().map(|(_, v)| v.len()).min().unwrap_or(0);
        for r in 0..rows {
            // `Display` for f64 prints the shortest string that round-trips.
            w.write_record(self.columns.iter().map(|(_, v)| v[r].to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn base_columns<S: ModelState>(traj: &Trajectory<S>) -> Table {
    let mut t = Table::new();
    t.push("t", traj.times());
    if let Some(first) = traj.states.first() {
        for (k, name) in first.scalar_names().iter().enumerate() {
            t.push(*name, traj.states.iter().map(|s| s.scalars()[k]).collect());
        }
        let dim = first.profile().dim();
        if dim > 1 {
            for r in 0..dim {
                t.push(
                    format!("mass_{r}"),
                    traj.states.iter().map(|s| s.profile().total()[r]).collect(),
                );
            }
        }
    }
    t.push("mass", traj.diagnostics.iter().map(|d| d.total_mass).collect());
    t.push(
        "weighted_mass",
        traj.diagnostics.iter().map(|d| d.weighted_mass).collect(),
    );
    t.push("boundary", traj.boundary_trace());
    t.push(
        "dropped_mass",
        traj.diagnostics.iter().map(|d| d.dropped_mass).collect(),
    );
    t
}

fn flat<S: ModelState>(s: &S) -> Vec<f64> {
    let mut v = s.scalars();
    v.extend_from_slice(s.profile().values());
    v
}

fn order_tol(factor: f64, scale: f64) -> f64 {
    factor * (1.0 + scale)
}

/// Relative drift of `e^{-lambda t} F(t)` per step and its worst point.
fn conservation_verdict<S: ModelState>(runs: &[(&str, &Trajectory<S>, &SpectralData)], tol: f64) -> CheckVerdict {
    let mut worst = 0.0f64;
    let mut loc = None;
    let mut details = serde_json::Map::new();
    for (label, traj, sd) in runs {
        let series = match functional_series(traj, sd) {
            Ok(s) => s,
            Err(e) => return CheckVerdict::errored("conservation", &e),
        };
        let f0 = series[0];
        let denom = f0.abs().max(1e-300);
        let mut run_worst = 0.0f64;
        for (n, f) in series.iter().enumerate() {
            let t = traj.grid.time(n);
            let r = ((-sd.lambda * t).exp() * f - f0).abs() / denom;
            if r > run_worst {
                run_worst = r;
            }
            if r > worst {
                worst = r;
                loc = Some(Location {
                    step: n,
                    t,
                    a: None,
                    component: format!("functional_{label}"),
                });
            }
        }
        details.insert(
            label.to_string(),
            json!({ "lambda": sd.lambda, "residual": run_worst, "initial_functional": f0 }),
        );
    }
    details.insert("tolerance".into(), json!(tol));
    CheckVerdict::new("conservation", worst <= tol, tol - worst, loc, Value::Object(details))
}

fn sandwich_verdict<S: ModelState>(
    lower: &Trajectory<S>,
    mid: &Trajectory<S>,
    upper: &Trajectory<S>,
    tol: f64,
) -> CheckVerdict {
    match sandwich_verify(lower, mid, upper, tol) {
        Ok(r) => {
            let (margin, loc) = if r.lower_margin <= r.upper_margin {
                (r.lower_margin, r.lower_location.clone())
            } else {
                (r.upper_margin, r.upper_location.clone())
            };
            CheckVerdict::new(
                "sandwich",
                r.passed,
                margin,
                loc,
                serde_json::to_value(&r).unwrap_or(Value::Null),
            )
        }
        Err(e) => CheckVerdict::errored("sandwich", &e),
    }
}

struct InvarianceInputs<'a> {
    kernel: &'a AgeProfile,
    survival: SurvivalFactors,
    decay_rate: f64,
    mass_factor: f64,
}

fn invariance_verdict<S: ModelState>(traj: &Trajectory<S>, inp: &InvarianceInputs<'_>) -> CheckVerdict {
    let name = "invariance";
    let astar = match a_star(inp.kernel) {
        Ok(a) => a,
        Err(e) => return CheckVerdict::errored(name, &e),
    };
    let first = &traj.states[0];
    let mass0 = first.profile().total().iter().sum::<f64>() + first.head_value().abs();
    let tol_mass = inp.mass_factor * mass0;
    let extra = BoundaryChecks {
        kernel: Some(inp.kernel),
        decay_rate: Some(inp.decay_rate),
    };
    let rep = match invariance_check(traj, astar, tol_mass, &extra) {
        Ok(r) => r,
        Err(e) => return CheckVerdict::errored(name, &e),
    };
    let grid = traj.grid;
    let mut passed = rep.passed;
    let mut details = serde_json::to_value(&rep).unwrap_or(Value::Null);
    let (margin, location) = match rep.initial_region {
        Region::Interior => (
            rep.min_mass - tol_mass,
            Some(Location {
                step: rep.min_mass_step,
                t: grid.time(rep.min_mass_step),
                a: None,
                component: "mass_below_astar".into(),
            }),
        ),
        Region::Boundary => {
            // pure aging: compare with the shifted initial profile step by step
            let zero = vec![0.0; first.profile().dim()];
            let mut expected = first.profile().clone();
            let mut worst = 0.0f64;
            let mut at = (0usize, 0usize);
            for (n, s) in traj.states.iter().enumerate() {
                if n > 0 {
                    match transport_step(&expected, &inp.survival, &zero) {
                        Ok(t) => expected = t.profile,
                        Err(e) => return CheckVerdict::errored(name, &e),
                    }
                }
                for j in 0..grid.len() {
                    let d = (s.profile().get(j, 0) - expected.get(j, 0)).abs();
                    if d > worst {
                        worst = d;
                        at = (n, j);
                    }
                }
            }
            let dev_tol = 1e-10 * first.profile().max_abs().max(1.0);
            passed &= worst <= dev_tol;
            details["explicit_deviation"] = json!(worst);
            details["explicit_tolerance"] = json!(dev_tol);
            let kernel_margin = tol_mass - rep.max_kernel_mass.unwrap_or(0.0);
            let decay_margin = 1e-9 - rep.decay_excess.unwrap_or(0.0);
            let dev_margin = dev_tol - worst;
            let margin = kernel_margin.min(decay_margin).min(dev_margin);
            (
                margin,
                Some(Location {
                    step: at.0,
                    t: grid.time(at.0),
                    a: Some(grid.node(at.1)),
                    component: profile_label(first).into(),
                }),
            )
        }
    };
    let location = match &rep.first_flip {
        Some(f) => Some(Location {
            step: f.step,
            t: f.t,
            a: None,
            component: "region".into(),
        }),
        None => location,
    };
    CheckVerdict::new(name, passed, margin, location, details)
}

fn profile_label<S: ModelState>(s: &S) -> &'static str {
    if s.scalar_names().is_empty() {
        "u"
    } else {
        "i"
    }
}

/// Ordered random initial pairs; `run` maps `(profile, head)` to a
/// trajectory and each step must keep `lower <= upper` within `tol(scale)`.
#[allow(clippy::too_many_arguments)]
fn pairs_verdict<S: ModelState>(
    grid: AgeGrid,
    dim: usize,
    bound: f64,
    pairs: usize,
    seed: u64,
    with_head: bool,
    extra_tol: f64,
    factor: f64,
    run: impl Fn(&AgeProfile, f64) -> Result<Trajectory<S>>,
) -> CheckVerdict {
    let name = "monotone_pairs";
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut loc = None;
    let mut ordered = 0usize;
    for k in 0..pairs {
        let lo = random_profile(&mut rng, grid, dim, bound);
        let add = random_profile(&mut rng, grid, dim, bound);
        let hi = match lo.try_add(&add) {
            Ok(h) => h,
            Err(e) => return CheckVerdict::errored(name, &e),
        };
        let (h_lo, h_hi) = if with_head {
            let a: f64 = rng.gen::<f64>() * bound;
            (a, a + rng.gen::<f64>() * bound)
        } else {
            (0.0, 0.0)
        };
        let (tl, th) = match (run(&lo, h_lo), run(&hi, h_hi)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return CheckVerdict::errored(name, &e),
        };
        let mut pair_ok = true;
        for (n, (a, b)) in tl.states.iter().zip(&th.states).enumerate() {
            let (fa, fb) = (flat(a), flat(b));
            let scale = fa.iter().chain(&fb).fold(0.0f64, |m, v| m.max(v.abs()));
            let tol = order_tol(factor, scale) + extra_tol;
            let n_scalars = a.scalars().len();
            for (idx, (x, y)) in fa.iter().zip(&fb).enumerate() {
                let margin = y - x + tol;
                if margin < 0.0 {
                    pair_ok = false;
                }
                if margin < worst {
                    worst = margin;
                    let (a_node, comp) = if idx < n_scalars {
                        (None, a.scalar_names()[idx].to_string())
                    } else {
                        let flat_j = idx - n_scalars;
                        (
                            Some(grid.node(flat_j / dim)),
                            format!("pair {k}, component {}", flat_j % dim),
                        )
                    };
                    loc = Some(Location {
                        step: n,
                        t: grid.time(n),
                        a: a_node,
                        component: comp,
                    });
                }
            }
        }
        if pair_ok {
            ordered += 1;
        }
    }
    CheckVerdict::new(
        name,
        ordered == pairs,
        if worst.is_finite() { worst } else { 0.0 },
        loc,
        json!({ "pairs": pairs, "ordered": ordered, "seed": seed, "extra_tolerance": extra_tol }),
    )
}

fn iteration_verdict<M: CharacteristicModel>(model: &M, horizon: f64, seed: u64, factor: f64) -> CheckVerdict {
    let name = "monotone_iteration";
    let run = || -> Result<CheckVerdict> {
        let cand = transport_candidate(model, horizon)?;
        let scale = cand.iter().map(|s| s.profile().max_abs()).fold(0.0, f64::max);
        let sub = check_subsolution(model, &cand, order_tol(factor, scale))?;
        let opts = IterateOptions {
            seed,
            ..IterateOptions::default()
        };
        let rep = monotone_iterate(model, &cand, horizon, &opts)?;
        let direct = march(model, horizon)?;
        let mut dist = 0.0f64;
        let mut at = 0usize;
        let mut max_abs = 0.0f64;
        for (n, (a, b)) in rep.fixed_point.states.iter().zip(&direct.states).enumerate() {
            for (x, y) in flat(a).iter().zip(flat(b)) {
                max_abs = max_abs.max(y.abs());
                if (x - y).abs() > dist {
                    dist = (x - y).abs();
                    at = n;
                }
            }
        }
        let agree_tol = 1e-8 * (1.0 + max_abs);
        let unordered = rep
            .monotone_flags
            .iter()
            .filter(|f| !matches!(f, OrderVerdict::Increasing | OrderVerdict::Equal))
            .count();
        let passed = sub.passed && rep.converged && unordered == 0 && dist <= agree_tol;
        let grid = model.grid();
        Ok(CheckVerdict::new(
            name,
            passed,
            agree_tol - dist,
            Some(Location {
                step: at,
                t: grid.time(at),
                a: None,
                component: "fixed_point_vs_direct".into(),
            }),
            json!({
                "subsolution": sub,
                "converged": rep.converged,
                "iterations": rep.iterations,
                "windows": rep.windows,
                "window_splits": rep.window_splits,
                "final_gap": rep.final_gap,
                "gamma": rep.gamma,
                "gamma_verified": rep.gamma_verified,
                "pairs_checked": rep.monotone_flags.len(),
                "pairs_not_increasing": unordered,
                "distance_to_direct": dist,
            }),
        ))
    };
    run().unwrap_or_else(|e| CheckVerdict::errored(name, &e))
}

fn volterra_verdict(i0: &AgeProfile, s_plus: f64, p: &SirParams, g: &AgeGrid, horizon: f64, n: usize) -> CheckVerdict {
    let name = "volterra_iteration";
    let run = || -> Result<CheckVerdict> {
        let steps = g.steps_for(horizon)?;
        let b0 = vec![0.0; steps + 1];
        let rep = volterra_iterate_b(i0, s_plus, p, g, horizon, n, &b0)?;
        let unordered = rep
            .monotone_flags
            .iter()
            .filter(|f| !matches!(f, OrderVerdict::Increasing | OrderVerdict::Equal))
            .count();
        // distance of the last iterate below the exact renewal solution
        let last = rep.iterates.last().cloned().unwrap_or_default();
        let scale = rep.limit.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut margin = f64::INFINITY;
        let mut at = 0;
        for (k, (b, l)) in last.iter().zip(&rep.limit).enumerate() {
            let m = l - b + order_tol(ORDER_TOL_FACTOR, scale);
            if m < margin {
                margin = m;
                at = k;
            }
        }
        Ok(CheckVerdict::new(
            name,
            unordered == 0 && margin >= 0.0,
            if margin.is_finite() { margin } else { 0.0 },
            Some(Location {
                step: at,
                t: g.time(at),
                a: Some(0.0),
                component: "B".into(),
            }),
            json!({
                "iterations": n,
                "flags": rep.monotone_flags,
                "converged": rep.converged,
                "final_gap": rep.final_gap,
            }),
        ))
    };
    run().unwrap_or_else(|e| CheckVerdict::errored(name, &e))
}

/// Runs `cmd` on `sc`, writing artifacts into `opts.output_dir`.
///
/// Configuration and I/O problems are returned as errors; solver failures
/// are recorded in the outcome after flushing whatever was computed.
pub fn run(sc: &Scenario, cmd: Command, opts: &RunOptions) -> Result<RunOutcome> {
    fs::create_dir_all(&opts.output_dir)?;
    if let Command::Convergence { levels } = cmd {
        return convergence_study(sc, levels, opts);
    }
    let built = sc.build()?;
    let out = match built {
        BuiltModel::Sir { params, initial } => run_sir(sc, cmd, opts, &params, &initial)?,
        BuiltModel::Hiv { params, initial } => run_hiv(sc, cmd, opts, &params, &initial)?,
        BuiltModel::General { params, initial } => run_general(sc, cmd, opts, &params, &initial)?,
    };
    finalize(sc, cmd, opts, out)
}

fn wanted(sc: &Scenario, cmd: Command, check: CheckKind) -> bool {
    match cmd {
        Command::Simulate => sc.checks.contains(&check),
        Command::Bounds => false,
        Command::Spectral => check == CheckKind::Conservation,
        Command::Compare => matches!(check, CheckKind::Sandwich | CheckKind::MonotonePairs),
        Command::Invariance => check == CheckKind::Invariance,
        Command::Probe => check == CheckKind::AssumptionProbe,
        Command::Convergence { .. } => false,
    }
}

fn lambda_json(sd: &Result<SpectralData>) -> Value {
    match sd {
        Ok(d) => json!(d.lambda),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn write_gamma_profiles(
    path: &Path,
    grid: AgeGrid,
    plus: &Result<SpectralData>,
    minus: &Result<SpectralData>,
) -> Result<()> {
    let mut t = Table::new();
    t.push("a", grid.nodes());
    if let Ok(p) = plus {
        t.push("gamma_plus", p.gamma_profile.values().to_vec());
    }
    if let Ok(m) = minus {
        t.push("gamma_minus", m.gamma_profile.values().to_vec());
    }
    t.write(path)
}

fn margins_verdict(name: &str, table: &Table, cols: &[&str], times: &[f64], factor: f64) -> CheckVerdict {
    let mut worst = f64::INFINITY;
    let mut loc = None;
    for (cname, vals) in &table.columns {
        if !cols.contains(&cname.as_str()) {
            continue;
        }
        for (n, v) in vals.iter().enumerate() {
            if *v < worst {
                worst = *v;
                loc = Some(Location {
                    step: n,
                    t: times[n],
                    a: None,
                    component: cname.clone(),
                });
            }
        }
    }
    let worst = if worst.is_finite() { worst } else { 0.0 };
    CheckVerdict::new(name, worst >= -factor, worst, loc, json!({ "columns": cols }))
}

fn pair_bound<S: ModelState>(initial: &S) -> f64 {
    (initial.profile().total().iter().sum::<f64>() + initial.head_value()).max(1.0)
}

fn run_sir(sc: &Scenario, cmd: Command, opts: &RunOptions, p: &SirParams, x0: &SirState) -> Result<RunOutcome> {
    let grid = sc.age_grid();
    if cmd == Command::Probe {
        return Err(Error::config("/model", "probe applies to the general model"));
    }
    let model = SirModel::new(p.clone(), x0.clone())?;
    let (traj, err) = march_partial(&model, sc.horizon);
    let bounds: Result<SirBounds> = sir_bounds(x0, p);
    let (plus, minus) = match &bounds {
        Ok(b) => (spectral_sir(b.s_plus, p, &grid), spectral_sir(b.s_minus, p, &grid)),
        Err(e) => (
            Err(Error::Precondition(e.to_string())),
            Err(Error::Precondition(e.to_string())),
        ),
    };

    let mut table = base_columns(&traj);
    if let Ok(sd) = &plus {
        table.push("functional_plus", functional_series(&traj, sd)?);
    }
    if let Ok(sd) = &minus {
        table.push("functional_minus", functional_series(&traj, sd)?);
    }
    if let Ok(b) = &bounds {
        table.push("margin_S_lower", traj.states.iter().map(|s| s.s - b.s_minus).collect());
        table.push("margin_S_upper", traj.states.iter().map(|s| b.s_plus - s.s).collect());
        table.push(
            "margin_M",
            traj.states
                .iter()
                .zip(&traj.diagnostics)
                .map(|(s, d)| b.m - (s.s + d.total_mass))
                .collect(),
        );
    }
    let mut artifacts = Vec::new();
    let ts = opts.output_dir.join(TIMESERIES_FILE);
    table.write(&ts)?;
    artifacts.push(ts);

    let mut report = serde_json::Map::new();
    report.insert(
        "bounds".into(),
        match &bounds {
            Ok(b) => json!({ "S_minus": b.s_minus, "S_plus": b.s_plus, "M": b.m }),
            Err(e) => json!({ "error": e.to_string() }),
        },
    );
    report.insert(
        "lambda".into(),
        json!({ "plus": lambda_json(&plus), "minus": lambda_json(&minus) }),
    );
    report.insert(
        "dropped_mass".into(),
        json!({ "total": traj.dropped_mass(), "above_threshold": traj.dropped_exceeds_threshold() }),
    );

    let mut checks = Vec::new();
    if let Some(e) = err {
        return Ok(RunOutcome {
            checks,
            solver_error: Some(SolverFailure::from_error(&e)),
            report: Value::Object(report),
            artifacts,
        });
    }
    let factor = sc.tolerances.order_factor;
    if cmd == Command::Bounds {
        let times = traj.times();
        checks.push(match &bounds {
            Ok(_) => margins_verdict(
                "bounds",
                &table,
                &["margin_S_lower", "margin_S_upper", "margin_M"],
                &times,
                order_tol(factor, pair_bound(x0)),
            ),
            Err(e) => CheckVerdict::errored("bounds", e),
        });
    }
    if cmd == Command::Spectral {
        let path = opts.output_dir.join(GAMMA_PROFILES_FILE);
        write_gamma_profiles(&path, grid, &plus, &minus)?;
        artifacts.push(path);
    }
    let frozen = |s: f64| sir_frozen_simulate(&x0.i, s, p, &grid, sc.horizon);
    if wanted(sc, cmd, CheckKind::Sandwich) {
        checks.push(match &bounds {
            Ok(b) => match (frozen(b.s_minus), frozen(b.s_plus)) {
                (Ok(lo), Ok(hi)) => sandwich_verdict(&lo, &traj, &hi, sc.sandwich_tol()),
                (Err(e), _) | (_, Err(e)) => CheckVerdict::errored("sandwich", &e),
            },
            Err(e) => CheckVerdict::errored("sandwich", e),
        });
    }
    if wanted(sc, cmd, CheckKind::Conservation) {
        checks.push(match (&bounds, &plus, &minus) {
            (Ok(b), Ok(sp), Ok(sm)) => match (frozen(b.s_plus), frozen(b.s_minus)) {
                (Ok(tp), Ok(tm)) => {
                    conservation_verdict(&[("plus", &tp, sp), ("minus", &tm, sm)], sc.tolerances.conservation)
                }
                (Err(e), _) | (_, Err(e)) => CheckVerdict::errored("conservation", &e),
            },
            (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => CheckVerdict::errored("conservation", e),
        });
    }
    if wanted(sc, cmd, CheckKind::Invariance) {
        checks.push(invariance_verdict(
            &traj,
            &InvarianceInputs {
                kernel: &p.beta,
                survival: p.survival(),
                decay_rate: p.delta_floor,
                mass_factor: sc.tolerances.mass_factor,
            },
        ));
    }
    if wanted(sc, cmd, CheckKind::MonotonePairs) {
        checks.push(match &bounds {
            Ok(b) => {
                let horizon = sc.options.pair_horizon.unwrap_or(sc.horizon);
                pairs_verdict(
                    grid,
                    1,
                    pair_bound(x0),
                    sc.options.pairs,
                    sc.seed,
                    false,
                    0.0,
                    factor,
                    |i, _| sir_frozen_simulate(i, b.s_plus, p, &grid, horizon),
                )
            }
            Err(e) => CheckVerdict::errored("monotone_pairs", e),
        });
    }
    if wanted(sc, cmd, CheckKind::Convergence) {
        checks.push(convergence_check(sc)?);
    }
    if cmd == Command::Compare {
        match &bounds {
            Ok(b) => {
                let frozen_model = SirModel::frozen(p.clone(), x0.i.clone(), b.s_plus)?;
                checks.push(iteration_verdict(
                    &frozen_model,
                    sc.options.iterate_horizon,
                    sc.seed,
                    factor,
                ));
                checks.push(volterra_verdict(
                    &x0.i,
                    b.s_plus,
                    p,
                    &grid,
                    sc.options.iterate_horizon,
                    sc.options.volterra_iterations,
                ));
            }
            Err(e) => checks.push(CheckVerdict::errored("monotone_iteration", e)),
        }
    }
    Ok(RunOutcome {
        checks,
        solver_error: None,
        report: Value::Object(report),
        artifacts,
    })
}

fn run_hiv(sc: &Scenario, cmd: Command, opts: &RunOptions, p: &HivParams, x0: &HivState) -> Result<RunOutcome> {
    let grid = sc.age_grid();
    if cmd == Command::Probe {
        return Err(Error::config("/model", "probe applies to the general model"));
    }
    let model = HivModel::new(p.clone(), x0.clone())?;
    let (traj, err) = march_partial(&model, sc.horizon);
    let bounds: Result<HivBounds> = hiv_bounds(x0, p);
    let (plus, minus) = match &bounds {
        Ok(b) => (spectral_hiv(b.t_plus, p, &grid), spectral_hiv(b.t_minus, p, &grid)),
        Err(e) => (
            Err(Error::Precondition(e.to_string())),
            Err(Error::Precondition(e.to_string())),
        ),
    };

    let mut table = base_columns(&traj);
    if let Ok(sd) = &plus {
        table.push("functional_plus", functional_series(&traj, sd)?);
    }
    if let Ok(sd) = &minus {
        table.push("functional_minus", functional_series(&traj, sd)?);
    }
    if let Ok(b) = &bounds {
        table.push("margin_T_lower", traj.states.iter().map(|s| s.t - b.t_minus).collect());
        table.push("margin_T_upper", traj.states.iter().map(|s| b.t_plus - s.t).collect());
        table.push("margin_V", traj.states.iter().map(|s| b.v_cap - s.v).collect());
    }
    let mut artifacts = Vec::new();
    let ts = opts.output_dir.join(TIMESERIES_FILE);
    table.write(&ts)?;
    artifacts.push(ts);

    let mut report = serde_json::Map::new();
    report.insert(
        "bounds".into(),
        match &bounds {
            Ok(b) => json!({ "T_minus": b.t_minus, "T_plus": b.t_plus, "V_cap": b.v_cap, "d_1": b.d_1 }),
            Err(e) => json!({ "error": e.to_string() }),
        },
    );
    report.insert(
        "lambda".into(),
        json!({ "plus": lambda_json(&plus), "minus": lambda_json(&minus) }),
    );
    for (label, sd) in [("plus", &plus), ("minus", &minus)] {
        if let Ok(d) = sd {
            report.insert(format!("head_coeff_{label}"), json!(d.head_coeff));
        }
    }
    report.insert(
        "dropped_mass".into(),
        json!({ "total": traj.dropped_mass(), "above_threshold": traj.dropped_exceeds_threshold() }),
    );

    let mut checks = Vec::new();
    if let Some(e) = err {
        return Ok(RunOutcome {
            checks,
            solver_error: Some(SolverFailure::from_error(&e)),
            report: Value::Object(report),
            artifacts,
        });
    }
    let factor = sc.tolerances.order_factor;
    if cmd == Command::Bounds {
        let times = traj.times();
        checks.push(match &bounds {
            Ok(_) => margins_verdict(
                "bounds",
                &table,
                &["margin_T_lower", "margin_T_upper", "margin_V"],
                &times,
                order_tol(factor, pair_bound(x0)),
            ),
            Err(e) => CheckVerdict::errored("bounds", e),
        });
    }
    if cmd == Command::Spectral {
        let path = opts.output_dir.join(GAMMA_PROFILES_FILE);
        write_gamma_profiles(&path, grid, &plus, &minus)?;
        artifacts.push(path);
    }
    let frozen = |t: f64| hiv_frozen_simulate(&x0.i, x0.v, t, p, &grid, sc.horizon);
    if wanted(sc, cmd, CheckKind::Sandwich) {
        checks.push(match &bounds {
            Ok(b) => match (frozen(b.t_minus), frozen(b.t_plus)) {
                (Ok(lo), Ok(hi)) => sandwich_verdict(&lo, &traj, &hi, sc.sandwich_tol()),
                (Err(e), _) | (_, Err(e)) => CheckVerdict::errored("sandwich", &e),
            },
            Err(e) => CheckVerdict::errored("sandwich", e),
        });
    }
    if wanted(sc, cmd, CheckKind::Conservation) {
        checks.push(match (&bounds, &plus, &minus) {
            (Ok(b), Ok(sp), Ok(sm)) => match (frozen(b.t_plus), frozen(b.t_minus)) {
                (Ok(tp), Ok(tm)) => {
                    conservation_verdict(&[("plus", &tp, sp), ("minus", &tm, sm)], sc.tolerances.conservation)
                }
                (Err(e), _) | (_, Err(e)) => CheckVerdict::errored("conservation", &e),
            },
            (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => CheckVerdict::errored("conservation", e),
        });
    }
    if wanted(sc, cmd, CheckKind::Invariance) {
        checks.push(invariance_verdict(
            &traj,
            &InvarianceInputs {
                kernel: &p.p_prod,
                survival: p.survival(),
                decay_rate: p.delta0,
                mass_factor: sc.tolerances.mass_factor,
            },
        ));
    }
    if wanted(sc, cmd, CheckKind::MonotonePairs) {
        checks.push(match &bounds {
            Ok(b) => {
                let horizon = sc.options.pair_horizon.unwrap_or(sc.horizon);
                pairs_verdict(
                    grid,
                    1,
                    pair_bound(x0),
                    sc.options.pairs,
                    sc.seed,
                    true,
                    0.0,
                    factor,
                    |i, v| hiv_frozen_simulate(i, v, b.t_plus, p, &grid, horizon),
                )
            }
            Err(e) => CheckVerdict::errored("monotone_pairs", e),
        });
    }
    if wanted(sc, cmd, CheckKind::Convergence) {
        checks.push(convergence_check(sc)?);
    }
    if cmd == Command::Compare {
        match &bounds {
            Ok(b) => {
                let frozen_model = HivModel::frozen(p.clone(), x0.i.clone(), x0.v, b.t_plus)?;
                checks.push(iteration_verdict(
                    &frozen_model,
                    sc.options.iterate_horizon,
                    sc.seed,
                    factor,
                ));
            }
            Err(e) => checks.push(CheckVerdict::errored("monotone_iteration", e)),
        }
    }
    Ok(RunOutcome {
        checks,
        solver_error: None,
        report: Value::Object(report),
        artifacts,
    })
}

fn probe_bound(sc: &Scenario, x0: &GeneralState) -> f64 {
    sc.options
        .probe_norm_bound
        .unwrap_or_else(|| 2.0 * x0.u.l1_norm() + 1.0)
}

fn run_general(
    sc: &Scenario,
    cmd: Command,
    opts: &RunOptions,
    p: &GeneralParams,
    x0: &GeneralState,
) -> Result<RunOutcome> {
    let grid = sc.age_grid();
    if matches!(cmd, Command::Bounds | Command::Spectral | Command::Invariance) {
        return Err(Error::config(
            "/model",
            format!("{} applies to the sir and hiv models", cmd.name()),
        ));
    }
    let model = GeneralModel::new(p.clone(), x0.clone())?;
    let (traj, err) = march_partial(&model, sc.horizon);
    let table = base_columns(&traj);
    let mut artifacts = Vec::new();
    let ts = opts.output_dir.join(TIMESERIES_FILE);
    table.write(&ts)?;
    artifacts.push(ts);

    let mut report = serde_json::Map::new();
    report.insert("suggested_gamma".into(), json!(p.suggested_gamma()));
    report.insert(
        "dropped_mass".into(),
        json!({ "total": traj.dropped_mass(), "above_threshold": traj.dropped_exceeds_threshold() }),
    );
    let mut checks = Vec::new();
    if let Some(e) = err {
        return Ok(RunOutcome {
            checks,
            solver_error: Some(SolverFailure::from_error(&e)),
            report: Value::Object(report),
            artifacts,
        });
    }
    let factor = sc.tolerances.order_factor;
    if wanted(sc, cmd, CheckKind::AssumptionProbe) {
        let name = "assumption_probe";
        checks.push(
            match assumption_probe(p, probe_bound(sc, x0), sc.options.probe_samples, sc.seed) {
                Ok(r) => {
                    let margin = r.counterexample.as_ref().map(|c| c.margin).unwrap_or(0.0);
                    let location = r.counterexample.as_ref().map(|c| Location {
                        step: 0,
                        t: 0.0,
                        a: c.node.map(|j| grid.node(j)),
                        component: format!("{} (component {})", c.kind, c.component),
                    });
                    let certified = r.certified;
                    CheckVerdict::new(name, certified, margin, location, serde_json::to_value(&r)?)
                }
                Err(e) => CheckVerdict::errored(name, &e),
            },
        );
    }
    if wanted(sc, cmd, CheckKind::TrajectoryMonotone) {
        let name = "trajectory_monotone";
        checks.push(match trajectory_monotone_check(x0, p, &grid, sc.horizon) {
            Ok(r) => {
                let passed = r.initial_class == TimeMonotonicity::Neither || r.verified;
                let location = r.worst_step.map(|n| Location {
                    step: n,
                    t: grid.time(n),
                    a: None,
                    component: "u".into(),
                });
                CheckVerdict::new(name, passed, -r.worst_reversal, location, serde_json::to_value(&r)?)
            }
            Err(e) => CheckVerdict::errored(name, &e),
        });
    }
    if wanted(sc, cmd, CheckKind::MonotonePairs) {
        let horizon = sc.options.pair_horizon.unwrap_or(sc.horizon);
        checks.push(pairs_verdict(
            grid,
            p.dim,
            pair_bound(x0),
            sc.options.pairs,
            sc.seed,
            false,
            5.0 * grid.da(),
            factor,
            |u, _| general_simulate(&GeneralState { u: u.clone() }, p, &grid, horizon),
        ));
    }
    if wanted(sc, cmd, CheckKind::Convergence) {
        checks.push(convergence_check(sc)?);
    }
    if cmd == Command::Compare {
        checks.push(iteration_verdict(&model, sc.options.iterate_horizon, sc.seed, factor));
    }
    Ok(RunOutcome {
        checks,
        solver_error: None,
        report: Value::Object(report),
        artifacts,
    })
}

/// The convergence study as a single verdict, without writing its table.
fn convergence_check(sc: &Scenario) -> Result<CheckVerdict> {
    let table = super::convergence::convergence_table(sc, sc.options.convergence_levels)?;
    Ok(table.verdict())
}

/// Writes `report.json`; `out.report` holds the command-specific fields.
fn finalize(sc: &Scenario, cmd: Command, opts: &RunOptions, mut out: RunOutcome) -> Result<RunOutcome> {
    let mut report = serde_json::Map::new();
    report.insert("command".into(), json!(cmd.name()));
    report.insert("passed".into(), json!(out.passed()));
    report.insert("solver_error".into(), serde_json::to_value(&out.solver_error)?);
    report.insert("checks".into(), serde_json::to_value(&out.checks)?);
    if let Value::Object(extra) = std::mem::take(&mut out.report) {
        report.extend(extra);
    }
    report.insert("scenario".into(), sc.echo());
    out.report = Value::Object(report);
    let path = opts.output_dir.join(REPORT_FILE);
    fs::write(&path, serde_json::to_string_pretty(&out.report)? + "\n")?;
    out.artifacts.push(path);
    if !opts.quiet {
        print!("{}", out.summary());
    }
    Ok(out)
}

/// Writes `report.json` for a run that produced only verdicts.
pub(crate) fn finish_report(
    sc: &Scenario,
    cmd: Command,
    opts: &RunOptions,
    checks: Vec<CheckVerdict>,
    extra: Value,
    artifacts: Vec<PathBuf>,
) -> Result<RunOutcome> {
    let out = RunOutcome {
        checks,
        solver_error: None,
        report: extra,
        artifacts,
    };
    finalize(sc, cmd, opts, out)
}

pub(crate) fn write_table(path: &Path, columns: Vec<(String, Vec<f64>)>) -> Result<()> {
    Table { columns }.write(path)
}
