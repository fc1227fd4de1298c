//! Run orchestration for the `lvx` command-line tool.

pub mod commands;
pub mod config;
pub mod dot;
pub mod error;
pub mod manifest;

pub use commands::{run, Command, Outcome};
pub use config::{Overrides, RunConfig};
pub use error::{ErrorKind, HarnessError};
