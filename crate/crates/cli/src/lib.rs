//! Library surface of the `synth` executable: scenario parsing, element
//! generators, on-disk formats, and command execution. The binary is a thin
//! argument-parsing wrapper around [`runner::run`]; integration tests drive
//! these modules directly.

pub mod error;
pub mod formats;
pub mod generators;
pub mod runner;
pub mod scenario;

pub use error::{CliError, Result};
