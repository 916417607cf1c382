use thiserror::Error;

use crate::network::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("variable `{variable}` has no state `{state}`")]
    UnknownState { variable: String, state: String },

    #[error("invalid network:\n{0}")]
    InvalidNetwork(ValidationReport),

    #[error("graph contains a cycle through {0:?}")]
    Cycle(Vec<String>),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("evidence has zero probability")]
    ImpossibleEvidence,

    #[error("state space of {size} assignments exceeds the enumeration cap of {cap}")]
    StateSpaceTooLarge { size: u128, cap: u128 },

    #[error("invalid dynamic network: {0}")]
    InvalidDbn(String),

    #[error("invalid intervention on `{variable}`: {reason}")]
    InvalidIntervention { variable: String, reason: String },

    #[error("interventions on `{variable}` overlap in slices {first:?} and {second:?}")]
    ConflictingInterventions {
        variable: String,
        first: (usize, usize),
        second: (usize, usize),
    },

    #[error("window [{from}, {to}] lies outside the horizon 1..={horizon}")]
    WindowOutOfRange { from: usize, to: usize, horizon: usize },

    #[error("utility spec: {0}")]
    InvalidUtility(String),

    #[error("missing marginal for utility target `{0}`")]
    MissingMarginal(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("{path}: {message}")]
    Document { path: String, message: String },

    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
