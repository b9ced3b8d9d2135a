use std::path::PathBuf;

use thiserror::Error;

/// Problems found while loading or validating a scenario.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot parse scenario document: {0}")]
    Parse(String),

    #[error("missing key `{key}`")]
    MissingKey { key: String },

    #[error("dimension mismatch at `{key}`: expected {expected}, found {found}")]
    Dimension {
        key: String,
        expected: String,
        found: String,
    },

    #[error("schedule `{key}` has {found} entries, expected 1 or {expected}")]
    ScheduleLength {
        key: String,
        expected: usize,
        found: usize,
    },

    #[error("erasure rate at `{key}` is {value}, must lie in [0, 1]")]
    RateOutOfRange { key: String, value: f64 },

    #[error("transition matrix at `{key}` is not row-stochastic")]
    NotStochastic { key: String },

    #[error("weight at `{key}` is {value}, must be nonnegative")]
    NegativeWeight { key: String, value: f64 },

    #[error("covariance `{key}` is not positive definite")]
    NotPositiveDefinite { key: String },

    #[error("covariance `{key}` is not symmetric positive semi-definite")]
    NotPositiveSemiDefinite { key: String },

    #[error("non-finite value at `{key}`")]
    NonFinite { key: String },

    #[error("scenario topology: {0}")]
    Topology(String),

    #[error("unknown scenario `{name}` (built-ins: {builtins})")]
    UnknownScenario { name: String, builtins: String },

    #[error("invalid policy spec `{spec}`: {reason}")]
    Policy { spec: String, reason: String },

    #[error("cannot read {path}: {reason}")]
    Io { path: PathBuf, reason: String },
}

impl ConfigError {
    pub(crate) fn dim(key: impl Into<String>, expected: impl ToString, found: impl ToString) -> Self {
        ConfigError::Dimension {
            key: key.into(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}

/// Faults raised while a simulation is running.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("numeric fault at step {step}: {what}")]
    Numeric { step: usize, what: String },

    #[error("link {link} sent twice at step {step}")]
    DoubleSend { link: usize, step: usize },

    #[error("policy `{policy}` scheduled both transmitters at step {step}")]
    Collision { step: usize, policy: String },

    #[error("policy `{policy}` does not apply to a {kind} scenario")]
    PolicyMismatch { policy: String, kind: String },

    #[error("trace mismatch: {0}")]
    Trace(String),

    #[error(transparent)]
    Config(#[from] ConfigError),
}
