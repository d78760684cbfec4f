//! Configuration, experiment orchestration and file output.

pub mod config;
pub mod oracle_validation;
pub mod output;
pub mod scenario;

pub use config::{load_config, parse_config, ExperimentConfig, OracleConfig, RunConfig};
pub use oracle_validation::{run_oracle_validation, write_oracle_report, OracleCase, OracleReport};
pub use output::{format_float, learning_csv, LEARNING_HEADER};
pub use scenario::{learning_file_name, run_pairs, run_scenario, PairResult, ScenarioOutput};
