//! The `riskplan` command line: scenario files in, policies, metrics,
//! trajectories and risk fields out, each run recorded in a manifest.
//!
//! Exit codes: 0 on success, 2 when a threshold admits no policy, 1 on
//! any error.

pub mod args;
pub mod commands;
pub mod error;
pub mod files;

pub use args::{Cli, Command};
pub use commands::{run, Outcome};
pub use error::{CliError, Stage};
