//! Command-line front end: scenario configuration, runs, variant comparison
//! and the verification suites.
//!
//! Exit codes: 0 success, 1 verification failure, 2 invalid input,
//! 3 numerical divergence.

pub mod commands;
pub mod config;
pub mod svg;

pub use commands::{cmd_compare, cmd_run, cmd_verify, VerifyOptions};
pub use config::{Overrides, ScenarioConfig};

use std::fmt;

pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

/// Error with the process exit code it maps to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }

    pub fn diverged(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DIVERGED,
            message: message.into(),
        }
    }

    pub fn verify(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_VERIFY,
            message: message.into(),
        }
    }

    /// Run-time numerical failures map to 3, everything else to 2.
    pub fn from_core(e: ffnt_core::Error) -> Self {
        use ffnt_core::Error as E;
        match e {
            E::Diverged { .. }
            | E::NonFinite { .. }
            | E::NonFiniteStage { .. }
            | E::Domain { .. } => Self::diverged(e.to_string()),
            _ => Self::invalid(e.to_string()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}
