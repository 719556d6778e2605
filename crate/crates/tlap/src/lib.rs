//! Scenario and report files, the grid oracle and run orchestration on top of
//! `tlap-core`.

pub mod config;
pub mod csv_matrix;
pub mod error;
pub mod harness;
pub mod oracle;
pub mod scenario_file;

pub use config::{load_config, RunConfig};
pub use error::{HarnessError, Result};
pub use harness::{compare_modes, run, solve, solve_and_summarize, summarize, EvaluationRule, ReportFile, RunSpec, SolverKind, Summary};
pub use oracle::{oracle_grid, oracle_grid_with, oracle_objective, GridOptimum, OracleConfig};
pub use scenario_file::{load_scenario, write_scenario, ScenarioFile};
