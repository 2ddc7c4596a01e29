//! Config-driven experiments for the stability of approximate Wigner maps.
//!
//! `wigner-lab run <config>` samples points of a Hilbert module, certifies a
//! perturbed solution against its control function, constructs the nearby
//! orthogonality-preserving isometry at every point and writes the check
//! results as JSON and CSV.

pub mod config;
pub mod experiment;
pub mod report;

use std::fmt::Display;

/// Environment variable holding the worker thread count.
pub const WORKERS_ENV: &str = "WIGNER_LAB_WORKERS";

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Pipeline {
        context: String,
        source: wigner_core::Error,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl LabError {
    pub fn config(e: impl Display) -> Self {
        Self::Config(e.to_string())
    }

    pub fn pipeline(context: &str, source: wigner_core::Error) -> Self {
        Self::Pipeline {
            context: context.to_string(),
            source,
        }
    }

    /// 2 for configuration problems, 3 when the run could not complete.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Pipeline { .. } | Self::Io(_) => 3,
        }
    }
}

impl From<wigner_core::Error> for LabError {
    fn from(source: wigner_core::Error) -> Self {
        Self::pipeline("pipeline", source)
    }
}

/// Reads the worker count from [`WORKERS_ENV`]; `None` leaves the choice to
/// rayon.
pub fn workers_from_env() -> Result<Option<usize>, LabError> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(LabError::Config(format!("{WORKERS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}
