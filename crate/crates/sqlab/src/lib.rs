//! Experiment harness for the random square-product process.
//!
//! Each command resolves an [`config::ExperimentConfig`], runs its trials in
//! parallel with per-trial seeds derived from the master seed, merges the
//! results in trial order and writes tables plus a run manifest. Outputs do
//! not depend on the number of worker threads.

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

use std::fmt;

/// Exit code for invariant and verification failures.
pub const EXIT_FAILURE: i32 = 1;
/// Exit code for configuration errors.
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug)]
pub enum HarnessError {
    Config(String),
    Invariant(String),
    Io(std::io::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => EXIT_CONFIG,
            HarnessError::Invariant(_) | HarnessError::Io(_) => EXIT_FAILURE,
        }
    }
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarnessError::Config(m) => write!(f, "configuration error: {m}"),
            HarnessError::Invariant(m) => write!(f, "invariant failure: {m}"),
            HarnessError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for HarnessError {}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e)
    }
}

impl From<sqlab_core::Error> for HarnessError {
    fn from(e: sqlab_core::Error) -> Self {
        HarnessError::Config(e.to_string())
    }
}
