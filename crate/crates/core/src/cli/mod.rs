//! Command-line front end: config parsing, dispatch and output files.

pub mod config;
pub mod output;
pub mod run;

pub use config::{Command, ExperimentConfig, PhiSpec, VolterraSpec};
pub use output::{fmt_num, write_outputs, Table};
pub use run::{execute, exit_code, run, Outcome};
