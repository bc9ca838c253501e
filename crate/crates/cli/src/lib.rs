//! Scenario loading, check orchestration, reports and CSV output for the
//! `gaugeops` command.

pub mod csv;
pub mod format;
pub mod scenario;
pub mod verify;

pub use csv::{run_eta, run_evolve, CsvError, CsvSummary};
pub use scenario::{load_scenario, parse_scenario, LoadError, Scenario, Tolerances};
pub use verify::{run_verify, CheckReport, RunError};
