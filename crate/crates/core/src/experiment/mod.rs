//! Configuration, instance generation, persistence and the sweep runner
//! behind the command-line tool.

pub mod config;
pub mod generate;
pub mod io;
pub mod runner;
pub mod verify;

pub use config::{ExperimentConfig, GeneratorKind, GeneratorSpec, InstanceSpec, Tolerances};
pub use generate::generate_instance;
pub use runner::{run_from_config, RunReport};
pub use verify::{verify, VerifyReport};
