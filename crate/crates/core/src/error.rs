use std::path::PathBuf;

use thiserror::Error;

use crate::types::PriorityClass;

#[derive(Debug, Error)]
pub enum Error {
    #[error("offered load {load:.4} (sum of rates x t_x) must stay below 1")]
    Overload { load: f64 },

    #[error("invalid mini-slot state: {0}")]
    InvalidState(String),

    #[error("scenario rejected: {0}")]
    InvalidScenario(String),

    #[error("instance exceeds brute-force caps: {0}")]
    CapExceeded(String),

    #[error("rate {rate} outside encoding range [{min}, {max}]")]
    Range { rate: f64, min: f64, max: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("labels have zero variance")]
    Degenerate,

    #[error("no candidate parameter set is predicted feasible")]
    NoFeasibleCandidate,

    #[error("unsupported schema version {found} in {path} (expected {expected})")]
    SchemaVersion { path: PathBuf, found: u32, expected: u32 },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{class} class assignment failed")]
    Infeasible { class: PriorityClass },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Stable snake-case name for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Overload { .. } => "overload",
            Error::InvalidState(_) => "invalid_state",
            Error::InvalidScenario(_) => "invalid_scenario",
            Error::CapExceeded(_) => "cap_exceeded",
            Error::Range { .. } => "range",
            Error::Shape(_) => "shape",
            Error::Degenerate => "degenerate",
            Error::NoFeasibleCandidate => "no_feasible_candidate",
            Error::SchemaVersion { .. } => "schema_version",
            Error::Parse { .. } => "parse",
            Error::Infeasible { .. } => "infeasible",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
