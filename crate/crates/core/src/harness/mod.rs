//! Synthetic-data experiments: configuration, dataset generation, the
//! replication runner, output tables and the property suites behind the
//! `check`, `decay` and `oracle` commands.

pub mod config;
pub mod data;
pub mod experiment;
pub mod suites;
pub mod tables;

pub use config::ExperimentConfig;
pub use data::{generate_dataset, read_dataset_csv, write_dataset_csv, InputCodec};
pub use experiment::{run_experiment, ExperimentOutput, ExperimentRecord, Summary};
pub use tables::emit_tables;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "METANML_OUT_DIR";
