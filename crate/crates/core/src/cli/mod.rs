//! Command implementations behind the `dpsrk` binary.
//!
//! Every command writes to a caller-supplied sink and returns the process
//! exit code: 0 secure, 1 usage or parse failure, 2 insecure, 3 Monte Carlo
//! self-check failure.

pub mod commands;
pub mod plot;
pub mod presets;
pub mod scenario;

use thiserror::Error;

pub use commands::*;
pub use presets::{DetectorChoice, Preset, PresetRegistry};
pub use scenario::{ParseError, ScenarioFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INSECURE: i32 = 2;
pub const EXIT_MC_CHECK: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },

    #[error(transparent)]
    Model(#[from] crate::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(crate::Error::NoSecureDistance) => EXIT_INSECURE,
            _ => EXIT_USAGE,
        }
    }
}

/// Shortest round-trip rendering used in CSV output.
pub fn fmt_num(x: f64) -> String {
    format!("{x:e}")
}
