//! Declarative scenarios: JSON configuration, the runner behind the command
//! line, and grid refinement studies.

mod config;
mod convergence;
mod runner;

pub use config::{
    parse_config, BuiltModel, CheckKind, CheckOptions, GeneralInitial, GridSpec, HivConfig, HivInitial, ModelKind,
    ModelSpec, Scenario, SirConfig, SirInitial, Tolerances,
};
pub use convergence::{convergence_study, convergence_table, ConvergenceTable, LevelRow, CONVERGENCE_FILE};
pub use runner::{
    run, CheckVerdict, Command, RunOptions, RunOutcome, SolverFailure, Verdict, GAMMA_PROFILES_FILE, REPORT_FILE,
    TIMESERIES_FILE,
};
