//! Scenario-driven runner for delayed network simulations.

pub mod build;
pub mod run;
pub mod scenario;

pub use run::{execute, output_dir, run_scenario, Mode, Outcome, RunError, RunOptions};
pub use scenario::{load_scenario, parse_scenario, Issue, LoadError, Scenario, SCHEMA};
