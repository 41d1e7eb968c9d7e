//! Grid refinement study: reruns a scenario at `n_cells * 2^k` and reports
//! how the conservation residual and the solution differences shrink.

use serde::Serialize;
use serde_json::json;

use crate::comparison::Location;
use crate::error::{Error, Result};
use crate::general::general_simulate;
use crate::hiv::{hiv_bounds, hiv_frozen_simulate, hiv_simulate};
use crate::sir::{sir_bounds, sir_frozen_simulate, sir_simulate};
use crate::spectral::{conservation_residual, spectral_hiv, spectral_sir};
use crate::trajectory::{ModelState, Trajectory};

use super::config::{BuiltModel, Scenario};
use super::runner::{finish_report, write_table, CheckVerdict, Command, RunOptions, RunOutcome};

pub const CONVERGENCE_FILE: &str = "convergence.csv";

/// Differences below this are treated as rounding.
const ROUNDING_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct LevelRow {
    pub level: usize,
    pub n_cells: usize,
    pub da: f64,
    /// Relative conservation residual of the frozen upper system.
    pub conservation_residual: Option<f64>,
    /// Sup over the coarse time nodes of the tracked series against the finest level.
    pub series_error: Option<f64>,
    /// Sup over coarse age nodes of the final profile against the finest level.
    pub profile_error: Option<f64>,
    /// Sup difference of the tracked series to the next finer level.
    pub series_step: Option<f64>,
    pub profile_step: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    /// Tracked scalar series: `S` (SIR), `V` (HIV) or `mass` (general).
    pub series: &'static str,
    pub rows: Vec<LevelRow>,
    /// `log2` ratios of consecutive conservation residuals.
    pub conservation_orders: Vec<f64>,
    /// `log2` ratios of consecutive level-to-level differences of the series.
    pub series_orders: Vec<f64>,
    pub profile_orders: Vec<f64>,
}

fn log2_ratios(v: &[f64]) -> Vec<f64> {
    v.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn shrinking(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0] || w[1] < ROUNDING_FLOOR)
}

impl ConvergenceTable {
    pub fn passed(&self) -> bool {
        let cons: Vec<f64> = self.rows.iter().filter_map(|r| r.conservation_residual).collect();
        let series: Vec<f64> = self.rows.iter().filter_map(|r| r.series_error).collect();
        let profile: Vec<f64> = self.rows.iter().filter_map(|r| r.profile_error).collect();
        shrinking(&cons) && shrinking(&series) && shrinking(&profile)
    }

    /// The study as a check verdict; the margin is the smallest observed order.
    pub fn verdict(&self) -> CheckVerdict {
        let orders = self
            .conservation_orders
            .iter()
            .chain(&self.series_orders)
            .filter(|o| o.is_finite())
            .fold(f64::INFINITY, |m, o| m.min(*o));
        let coarse = &self.rows[0];
        CheckVerdict::new(
            "convergence",
            self.passed(),
            if orders.is_finite() { orders } else { 0.0 },
            Some(Location {
                step: 0,
                t: 0.0,
                a: None,
                component: format!("{} (n_cells {})", self.series, coarse.n_cells),
            }),
            serde_json::to_value(self).unwrap_or(serde_json::Value::Null),
        )
    }
}

struct LevelRun {
    series: Vec<f64>,
    final_profile: Vec<f64>,
    n_cells: usize,
    conservation: Option<f64>,
}

fn sample_level<S: ModelState>(
    traj: &Trajectory<S>,
    stride: usize,
    n_cells: usize,
    series: impl Fn(&S, f64) -> f64,
) -> (Vec<f64>, Vec<f64>) {
    let picked: Vec<f64> = traj
        .states
        .iter()
        .zip(&traj.diagnostics)
        .step_by(stride)
        .map(|(s, d)| series(s, d.total_mass))
        .collect();
    let last = traj.last().profile();
    let dim = last.dim();
    let mut prof = Vec::new();
    for j in (0..=n_cells).step_by(stride) {
        prof.extend_from_slice(&last.values()[j * dim..(j + 1) * dim]);
    }
    (picked, prof)
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Runs every level and tabulates residuals and differences.
pub fn convergence_table(sc: &Scenario, levels: usize) -> Result<ConvergenceTable> {
    if levels < 2 {
        return Err(Error::invalid(format!(
            "convergence needs at least 2 levels, got {levels}"
        )));
    }
    let base = sc.grid.n_cells;
    // frozen levels taken from the coarsest grid so every level freezes the same value
    let frozen_at = match sc.build()? {
        BuiltModel::Sir { params, initial } => Some(sir_bounds(&initial, &params)?.s_plus),
        BuiltModel::Hiv { params, initial } => Some(hiv_bounds(&initial, &params)?.t_plus),
        BuiltModel::General { .. } => None,
    };
    let mut runs = Vec::with_capacity(levels);
    let mut series_name = "mass";
    for k in 0..levels {
        let stride = 1usize << k;
        let n_cells = base * stride;
        let lsc = sc.with_cells(n_cells);
        let g = lsc.age_grid();
        let run = match lsc.build()? {
            BuiltModel::Sir { params, initial } => {
                series_name = "S";
                let s_plus = frozen_at.expect("epidemic model");
                let traj = sir_simulate(&initial, &params, &g, sc.horizon)?;
                let frozen = sir_frozen_simulate(&initial.i, s_plus, &params, &g, sc.horizon)?;
                let sd = spectral_sir(s_plus, &params, &g)?;
                let (series, final_profile) = sample_level(&traj, stride, n_cells, |s, _| s.s);
                LevelRun {
                    series,
                    final_profile,
                    n_cells,
                    conservation: Some(conservation_residual(&frozen, &sd)?),
                }
            }
            BuiltModel::Hiv { params, initial } => {
                series_name = "V";
                let t_plus = frozen_at.expect("epidemic model");
                let traj = hiv_simulate(&initial, &params, &g, sc.horizon)?;
                let frozen = hiv_frozen_simulate(&initial.i, initial.v, t_plus, &params, &g, sc.horizon)?;
                let sd = spectral_hiv(t_plus, &params, &g)?;
                let (series, final_profile) = sample_level(&traj, stride, n_cells, |s, _| s.v);
                LevelRun {
                    series,
                    final_profile,
                    n_cells,
                    conservation: Some(conservation_residual(&frozen, &sd)?),
                }
            }
            BuiltModel::General { params, initial } => {
                let traj = general_simulate(&initial, &params, &g, sc.horizon)?;
                let (series, final_profile) = sample_level(&traj, stride, n_cells, |_, m| m);
                LevelRun {
                    series,
                    final_profile,
                    n_cells,
                    conservation: None,
                }
            }
        };
        log::info!("convergence level {k}: n_cells = {n_cells}");
        runs.push(run);
    }

    let finest = runs.last().expect("levels >= 2");
    let mut rows = Vec::with_capacity(levels);
    for (k, r) in runs.iter().enumerate() {
        let is_finest = k + 1 == levels;
        let next = runs.get(k + 1);
        rows.push(LevelRow {
            level: k,
            n_cells: r.n_cells,
            da: sc.grid.a_max / r.n_cells as f64,
            conservation_residual: r.conservation,
            series_error: (!is_finest).then(|| sup_diff(&r.series, &finest.series)),
            profile_error: (!is_finest).then(|| sup_diff(&r.final_profile, &finest.final_profile)),
            series_step: next.map(|n| sup_diff(&r.series, &n.series)),
            profile_step: next.map(|n| sup_diff(&r.final_profile, &n.final_profile)),
        });
    }
    let cons: Vec<f64> = rows.iter().filter_map(|r| r.conservation_residual).collect();
    let steps: Vec<f64> = rows.iter().filter_map(|r| r.series_step).collect();
    let psteps: Vec<f64> = rows.iter().filter_map(|r| r.profile_step).collect();
    Ok(ConvergenceTable {
        series: series_name,
        rows,
        conservation_orders: log2_ratios(&cons),
        series_orders: log2_ratios(&steps),
        profile_orders: log2_ratios(&psteps),
    })
}

fn column(rows: &[LevelRow], f: impl Fn(&LevelRow) -> Option<f64>) -> Vec<f64> {
    rows.iter().map(|r| f(r).unwrap_or(f64::NAN)).collect()
}

/// Runs the study, writes `convergence.csv` and `report.json`.
pub fn convergence_study(sc: &Scenario, levels: usize, opts: &RunOptions) -> Result<RunOutcome> {
    let table = convergence_table(sc, levels)?;
    let rows = &table.rows;
    let path = opts.output_dir.join(CONVERGENCE_FILE);
    write_table(
        &path,
        vec![
            ("level".into(), rows.iter().map(|r| r.level as f64).collect()),
            ("n_cells".into(), rows.iter().map(|r| r.n_cells as f64).collect()),
            ("da".into(), rows.iter().map(|r| r.da).collect()),
            (
                "conservation_residual".into(),
                column(rows, |r| r.conservation_residual),
            ),
            ("series_error".into(), column(rows, |r| r.series_error)),
            ("profile_error".into(), column(rows, |r| r.profile_error)),
            ("series_step".into(), column(rows, |r| r.series_step)),
            ("profile_step".into(), column(rows, |r| r.profile_step)),
        ],
    )?;
    let verdict = table.verdict();
    finish_report(
        sc,
        Command::Convergence { levels },
        opts,
        vec![verdict],
        json!({ "levels": levels }),
        vec![path],
    )
}
