use thiserror::Error;

/// Errors produced by the modeling engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input lies outside the domain of the operation.
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    /// A fitted model was evaluated where it produces unphysical output.
    #[error("{what} outside model range at {at}: {value}")]
    ModelRange {
        what: &'static str,
        at: f64,
        value: f64,
    },

    /// Dark probability summed over all detectors reached 1.
    #[error("dark-click probability {0} is not below 1")]
    InvalidRegime(f64),

    #[error("QBER undefined: no clicks (p_click = 0)")]
    UndefinedQber,

    /// Single-photon fraction or surviving fraction is not positive.
    #[error("insecure operating point: {0}")]
    Insecure(&'static str),

    /// Error rate beyond the last error-correction breakpoint.
    #[error("error rate {0} above error-correction range")]
    AboveEcRange(f64),

    #[error("no feasible point: {0}")]
    NoFeasiblePoint(&'static str),

    #[error("no secure distance")]
    NoSecureDistance,

    #[error("invalid range [{lo}, {hi}]")]
    InvalidRange { lo: f64, hi: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
