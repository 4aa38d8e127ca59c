//! Config-driven experiment runner: configuration surface, report emission,
//! and the simulate / drift / reduce / gradcheck / closure commands.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{cmd_closure, cmd_drift, cmd_gradcheck, cmd_reduce, cmd_simulate};
pub use config::{load_config, parse_override, ExperimentConfig};
pub use report::RunReport;
