//! JSON scenario documents: parsing, validation and the echoed form with
//! every default filled in.

use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agefn::AgeFunction;
use crate::discretization::{AgeGrid, AgeProfile};
use crate::error::{Error, Result};
use crate::general::{GeneralParams, GeneralState, ScalarResponse, SeparableSpec};
use crate::hiv::{HivParams, HivState};
use crate::sir::{SirParams, SirState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Sir,
    Hiv,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Sandwich,
    Conservation,
    Invariance,
    MonotonePairs,
    TrajectoryMonotone,
    AssumptionProbe,
    Convergence,
}

impl CheckKind {
    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Sandwich => "sandwich",
            CheckKind::Conservation => "conservation",
            CheckKind::Invariance => "invariance",
            CheckKind::MonotonePairs => "monotone_pairs",
            CheckKind::TrajectoryMonotone => "trajectory_monotone",
            CheckKind::AssumptionProbe => "assumption_probe",
            CheckKind::Convergence => "convergence",
        }
    }

    fn applies_to(self, model: ModelKind) -> bool {
        match self {
            CheckKind::Sandwich | CheckKind::Conservation | CheckKind::Invariance => model != ModelKind::General,
            CheckKind::TrajectoryMonotone | CheckKind::AssumptionProbe => model == ModelKind::General,
            CheckKind::MonotonePairs | CheckKind::Convergence => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub a_max: f64,
    pub n_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SirConfig {
    pub gamma: f64,
    #[serde(rename = "nu_S")]
    pub nu_s: f64,
    pub eta: f64,
    pub beta: AgeFunction,
    #[serde(rename = "nu_I")]
    pub nu_i: AgeFunction,
    /// Floor of `nu_I`; the smallest sample when absent.
    #[serde(default)]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SirInitial {
    #[serde(rename = "S")]
    pub s: f64,
    pub i: AgeFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HivConfig {
    pub s: f64,
    pub d: f64,
    pub k: f64,
    pub c: f64,
    pub p: AgeFunction,
    pub delta: AgeFunction,
    /// Floor of `delta`; the smallest sample when absent.
    #[serde(default)]
    pub delta0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HivInitial {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub i: AgeFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneralInitial {
    /// One age function per component.
    pub u: Vec<AgeFunction>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Sir {
        params: SirConfig,
        initial: SirInitial,
    },
    Hiv {
        params: HivConfig,
        initial: HivInitial,
    },
    General {
        params: SeparableSpec,
        initial: GeneralInitial,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative factor of the order tolerance `factor * (1 + max |operand|)`.
    pub order_factor: f64,
    /// Region mass tolerance as a fraction of the initial mass.
    pub mass_factor: f64,
    /// Absolute sandwich slack; `1e-6 + 5 da` when absent.
    pub sandwich: Option<f64>,
    /// Largest accepted relative conservation residual.
    pub conservation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            order_factor: 1e-9,
            mass_factor: 1e-12,
            sandwich: None,
            conservation: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckOptions {
    /// Ordered initial pairs in `monotone_pairs`.
    pub pairs: usize,
    /// Horizon of each pair run; the scenario horizon when absent.
    pub pair_horizon: Option<f64>,
    pub probe_samples: usize,
    /// Norm bound of probe samples; twice the initial mass plus one when absent.
    pub probe_norm_bound: Option<f64>,
    /// Iterations of the renewal map in `compare`.
    pub volterra_iterations: usize,
    /// Horizon of the monotone iteration in `compare`.
    pub iterate_horizon: f64,
    /// Grid levels of the `convergence` check.
    pub convergence_levels: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            pairs: 20,
            pair_horizon: None,
            probe_samples: 64,
            probe_norm_bound: None,
            volterra_iterations: 10,
            iterate_horizon: 1.0,
            convergence_levels: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub model: ModelSpec,
    pub grid: GridSpec,
    pub horizon: f64,
    pub checks: Vec<CheckKind>,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub tolerances: Tolerances,
    pub options: CheckOptions,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    model: ModelKind,
    grid: GridSpec,
    horizon: f64,
    params: Value,
    initial: Value,
    #[serde(default)]
    checks: Vec<CheckKind>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    tolerances: Tolerances,
    #[serde(default)]
    options: CheckOptions,
}

fn pointer_of(path: &serde_path_to_error::Path, prefix: &str) -> String {
    let mut out = prefix.to_string();
    for seg in path.iter() {
        match seg {
            serde_path_to_error::Segment::Seq { index } => out.push_str(&format!("/{index}")),
            serde_path_to_error::Segment::Map { key } => out.push_str(&format!("/{key}")),
            serde_path_to_error::Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            serde_path_to_error::Segment::Unknown => {}
        }
    }
    if out.is_empty() {
        "/".to_string()
    } else {
        out
    }
}

fn typed<T: DeserializeOwned>(value: Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let pointer = pointer_of(e.path(), prefix);
        Error::config(pointer, e.into_inner().to_string())
    })
}

fn positive(pointer: &str, name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(pointer, format!("{name} must be positive, got {v}")))
    }
}

fn nonnegative(pointer: &str, name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(pointer, format!("{name} must be nonnegative, got {v}")))
    }
}

fn nonnegative_fn(pointer: &str, name: &str, f: &AgeFunction, grid: AgeGrid) -> Result<AgeProfile> {
    f.validate_domain(pointer, grid.a_max())?;
    let p = f.sample(grid);
    if p.min_value() < 0.0 {
        return Err(Error::config(
            pointer,
            format!("{name} must be nonnegative, found {}", p.min_value()),
        ));
    }
    Ok(p)
}

/// Parses and validates a scenario document.
pub fn parse_config(text: &str) -> Result<Scenario> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::config("/", e.to_string()))?;
    let raw: RawScenario = typed(value, "")?;
    positive("/grid/a_max", "a_max", raw.grid.a_max)?;
    if raw.grid.n_cells == 0 {
        return Err(Error::config("/grid/n_cells", "n_cells must be at least 1"));
    }
    let grid = AgeGrid::new(raw.grid.a_max, raw.grid.n_cells)?;
    grid.steps_for(raw.horizon)
        .map_err(|e| Error::config("/horizon", e.to_string()))?;

    let model = match raw.model {
        ModelKind::Sir => ModelSpec::Sir {
            params: typed(raw.params, "/params")?,
            initial: typed(raw.initial, "/initial")?,
        },
        ModelKind::Hiv => ModelSpec::Hiv {
            params: typed(raw.params, "/params")?,
            initial: typed(raw.initial, "/initial")?,
        },
        ModelKind::General => ModelSpec::General {
            params: typed(raw.params, "/params")?,
            initial: typed(raw.initial, "/initial")?,
        },
    };
    for (k, c) in raw.checks.iter().enumerate() {
        if !c.applies_to(raw.model) {
            return Err(Error::config(
                format!("/checks/{k}"),
                format!("check {} does not apply to this model", c.name()),
            ));
        }
    }
    let mut checks = raw.checks.clone();
    checks.sort();
    checks.dedup();

    let t = &raw.tolerances;
    positive("/tolerances/order_factor", "order_factor", t.order_factor)?;
    positive("/tolerances/mass_factor", "mass_factor", t.mass_factor)?;
    positive("/tolerances/conservation", "conservation", t.conservation)?;
    if let Some(s) = t.sandwich {
        nonnegative("/tolerances/sandwich", "sandwich", s)?;
    }
    let o = &raw.options;
    if o.probe_samples == 0 {
        return Err(Error::config(
            "/options/probe_samples",
            "probe_samples must be at least 1",
        ));
    }
    if o.convergence_levels < 2 {
        return Err(Error::config(
            "/options/convergence_levels",
            "convergence_levels must be at least 2",
        ));
    }
    if let Some(h) = o.pair_horizon {
        grid.steps_for(h)
            .map_err(|e| Error::config("/options/pair_horizon", e.to_string()))?;
    }
    grid.steps_for(o.iterate_horizon)
        .map_err(|e| Error::config("/options/iterate_horizon", e.to_string()))?;
    if let Some(b) = o.probe_norm_bound {
        positive("/options/probe_norm_bound", "probe_norm_bound", b)?;
    }

    let sc = Scenario {
        model,
        grid: raw.grid,
        horizon: raw.horizon,
        checks,
        seed: raw.seed,
        output_dir: raw.output_dir,
        tolerances: raw.tolerances,
        options: raw.options,
    };
    sc.build()?;
    Ok(sc)
}

/// Model objects built from a scenario.
#[derive(Debug, Clone)]
pub enum BuiltModel {
    Sir {
        params: SirParams,
        initial: SirState,
    },
    Hiv {
        params: HivParams,
        initial: HivState,
    },
    General {
        params: GeneralParams,
        initial: GeneralState,
    },
}

impl Scenario {
    pub fn age_grid(&self) -> AgeGrid {
        AgeGrid::new(self.grid.a_max, self.grid.n_cells).expect("validated grid")
    }

    pub fn kind(&self) -> ModelKind {
        match self.model {
            ModelSpec::Sir { .. } => ModelKind::Sir,
            ModelSpec::Hiv { .. } => ModelKind::Hiv,
            ModelSpec::General { .. } => ModelKind::General,
        }
    }

    /// Copy of the scenario on a grid with `n_cells` cells.
    pub fn with_cells(&self, n_cells: usize) -> Scenario {
        let mut sc = self.clone();
        sc.grid.n_cells = n_cells;
        sc
    }

    pub fn sandwich_tol(&self) -> f64 {
        self.tolerances.sandwich.unwrap_or(1e-6 + 5.0 * self.age_grid().da())
    }

    /// Builds parameter and state objects, naming the offending parameter on
    /// failure.
    pub fn build(&self) -> Result<BuiltModel> {
        let grid = self.age_grid();
        match &self.model {
            ModelSpec::Sir { params, initial } => {
                positive("/params/gamma", "gamma", params.gamma)?;
                positive("/params/nu_S", "nu_S", params.nu_s)?;
                positive("/params/eta", "eta", params.eta)?;
                let beta = nonnegative_fn("/params/beta", "beta", &params.beta, grid)?;
                params.nu_i.validate_domain("/params/nu_I", grid.a_max())?;
                let nu_i = params.nu_i.sample(grid);
                let delta = params.delta.unwrap_or_else(|| nu_i.min_value());
                positive("/params/delta", "delta", delta)?;
                if nu_i.min_value() < delta {
                    return Err(Error::config(
                        "/params/nu_I",
                        format!("nu_I must stay above delta = {delta}, found {}", nu_i.min_value()),
                    ));
                }
                nonnegative("/initial/S", "S", initial.s)?;
                let i0 = nonnegative_fn("/initial/i", "i", &initial.i, grid)?;
                let params = SirParams::new(params.gamma, params.nu_s, params.eta, beta, nu_i, delta)?;
                Ok(BuiltModel::Sir {
                    params,
                    initial: SirState { s: initial.s, i: i0 },
                })
            }
            ModelSpec::Hiv { params, initial } => {
                for (name, v) in [("s", params.s), ("d", params.d), ("k", params.k), ("c", params.c)] {
                    positive(&format!("/params/{name}"), name, v)?;
                }
                let prod = nonnegative_fn("/params/p", "p", &params.p, grid)?;
                params.delta.validate_domain("/params/delta", grid.a_max())?;
                let delta = params.delta.sample(grid);
                let delta0 = params.delta0.unwrap_or_else(|| delta.min_value());
                positive("/params/delta0", "delta0", delta0)?;
                if delta.min_value() < delta0 {
                    return Err(Error::config(
                        "/params/delta",
                        format!("delta must stay above delta0 = {delta0}, found {}", delta.min_value()),
                    ));
                }
                nonnegative("/initial/T", "T", initial.t)?;
                nonnegative("/initial/V", "V", initial.v)?;
                let i0 = nonnegative_fn("/initial/i", "i", &initial.i, grid)?;
                let params = HivParams::new(params.s, params.d, params.k, params.c, prod, delta, delta0)?;
                Ok(BuiltModel::Hiv {
                    params,
                    initial: HivState {
                        t: initial.t,
                        v: initial.v,
                        i: i0,
                    },
                })
            }
            ModelSpec::General { params, initial } => {
                let n = params.dim;
                if !(1..=3).contains(&n) {
                    return Err(Error::config("/params/dim", format!("dim must be 1, 2 or 3, got {n}")));
                }
                for (name, v) in [
                    ("mu0", &params.mu0),
                    ("beta0", &params.beta0),
                    ("alpha", &params.alpha),
                    ("sigma", &params.sigma),
                ] {
                    if v.len() != n * n {
                        return Err(Error::config(
                            format!("/params/{name}"),
                            format!("{name} needs {} entries (row-major), got {}", n * n, v.len()),
                        ));
                    }
                    for (k, f) in v.iter().enumerate() {
                        f.validate_domain(&format!("/params/{name}/{k}"), grid.a_max())?;
                    }
                }
                for (name, v) in [("alpha", &params.alpha), ("sigma", &params.sigma)] {
                    for (k, f) in v.iter().enumerate() {
                        nonnegative_fn(&format!("/params/{name}/{k}"), name, f, grid)?;
                    }
                }
                for (name, r) in [("chi", params.chi), ("psi", params.psi)] {
                    let ok = match r {
                        ScalarResponse::Constant { value } => value.is_finite(),
                        ScalarResponse::Linear { intercept, slope } => intercept.is_finite() && slope.is_finite(),
                        ScalarResponse::InverseLinear { scale } => scale.is_finite() && scale >= 0.0,
                        ScalarResponse::Exponential { rate } => rate.is_finite(),
                    };
                    if !ok {
                        return Err(Error::config(format!("/params/{name}"), "invalid response parameters"));
                    }
                }
                if initial.u.len() != n {
                    return Err(Error::config(
                        "/initial/u",
                        format!("u needs {n} components, got {}", initial.u.len()),
                    ));
                }
                let mut comps = Vec::with_capacity(n);
                for (k, f) in initial.u.iter().enumerate() {
                    comps.push(nonnegative_fn(&format!("/initial/u/{k}"), "u", f, grid)?);
                }
                let u = AgeProfile::from_fn_vec(grid, n, |_, _| {});
                let mut u = u;
                for j in 0..grid.len() {
                    for (k, c) in comps.iter().enumerate() {
                        u.at_mut(j)[k] = c.get(j, 0);
                    }
                }
                let gp = GeneralParams::separable(grid, params)?;
                Ok(BuiltModel::General {
                    params: gp,
                    initial: GeneralState { u },
                })
            }
        }
    }

    /// The scenario with all defaults filled, for echoing in reports.
    pub fn echo(&self) -> Value {
        let (model, params, initial) = match &self.model {
            ModelSpec::Sir { params, initial } => {
                let mut p = params.clone();
                if p.delta.is_none() {
                    p.delta = Some(params.nu_i.sample(self.age_grid()).min_value());
                }
                ("sir", serde_json::to_value(p), serde_json::to_value(initial))
            }
            ModelSpec::Hiv { params, initial } => {
                let mut p = params.clone();
                if p.delta0.is_none() {
                    p.delta0 = Some(params.delta.sample(self.age_grid()).min_value());
                }
                ("hiv", serde_json::to_value(p), serde_json::to_value(initial))
            }
            ModelSpec::General { params, initial } => {
                ("general", serde_json::to_value(params), serde_json::to_value(initial))
            }
        };
        let mut tol = self.tolerances.clone();
        tol.sandwich = Some(self.sandwich_tol());
        serde_json::json!({
            "model": model,
            "grid": self.grid,
            "horizon": self.horizon,
            "params": params.unwrap_or(Value::Null),
            "initial": initial.unwrap_or(Value::Null),
            "checks": self.checks,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "tolerances": tol,
            "options": self.options,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "model": "sir",
        "grid": {"a_max": 10, "n_cells": 100},
        "horizon": 2,
        "params": {"gamma": 1, "nu_S": 0.5, "eta": 1, "beta": {"const": 1}, "nu_I": {"const": 1}},
        "initial": {"S": 1, "i": {"nodes": [0, 1, 1, 10], "values": [1, 1, 0, 0]}}
    }"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let sc = parse_config(MINIMAL).unwrap();
        assert_eq!(sc.tolerances.order_factor, 1e-9);
        assert_eq!(sc.tolerances.mass_factor, 1e-12);
        assert!(sc.checks.is_empty());
        let echo = sc.echo();
        assert_eq!(echo["params"]["delta"], 1.0);
        assert!((echo["tolerances"]["sandwich"].as_f64().unwrap() - (1e-6 + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn negative_rate_is_named() {
        let text = MINIMAL.replace("\"nu_S\": 0.5", "\"nu_S\": -0.5");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("nu_S"), "{err}");
    }

    #[test]
    fn fractional_horizon_suggests_multiple() {
        let text = MINIMAL.replace("\"horizon\": 2", "\"horizon\": 2.05");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("/horizon") && err.contains("nearest multiple"), "{err}");
    }

    #[test]
    fn schema_errors_carry_pointer() {
        let text = MINIMAL.replace("\"eta\": 1", "\"eta\": \"one\"");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("/params/eta"), "{err}");
        let text = MINIMAL.replace("\"horizon\": 2,", "\"horizon\": 2, \"checks\": [\"assumption_probe\"],");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("/checks/0"), "{err}");
    }

    #[test]
    fn short_table_is_rejected() {
        let text = MINIMAL.replace(
            r#""beta": {"const": 1}"#,
            r#""beta": {"nodes": [0, 5], "values": [1, 1]}"#,
        );
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("/params/beta/nodes"), "{err}");
    }
}
