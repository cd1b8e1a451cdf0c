//! Library side of the `wold2d` command-line tool: run configurations,
//! report assembly, canonical serialization, and the invariant batteries
//! behind `--verify`.

pub mod canonical;
pub mod config;
pub mod run;
pub mod verify;

pub use config::{CliError, Command, OutputFormat, RunConfig};
pub use run::{run, Report};
pub use verify::verify_suite;
