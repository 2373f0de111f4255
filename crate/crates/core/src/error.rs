use std::path::PathBuf;

use thiserror::Error;

/// Problems found while loading or validating configuration files.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: line {line}: invalid value for `{key}`: {message}")]
    Invalid {
        path: PathBuf,
        line: usize,
        key: String,
        message: String,
    },
    #[error("missing coefficient `{0}`")]
    Missing(String),
    #[error("{0}")]
    Other(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    /// Line number the error refers to, when known.
    pub fn line(&self) -> Option<usize> {
        match self {
            ConfigError::Parse { line, .. } | ConfigError::Invalid { line, .. } => Some(*line),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("through-water speed {0} m/s is below the non-dimensional floor")]
    DegenerateSpeed(f64),
    #[error("shaft rate {0} rev/s is below the propeller guard")]
    ZeroShaftRate(f64),
    #[error("k_t fit needs at least 3 distinct advance coefficients, got {0}")]
    RankDeficient(usize),
    #[error("rudder command {command_deg:.2} deg exceeds the {limit_deg:.2} deg limit")]
    CommandOutOfRange { command_deg: f64, limit_deg: f64 },
    #[error("time step {0} s outside (0, 1]")]
    BadTimeStep(f64),
    #[error("non-finite derivative in `{0}`")]
    NonFinite(&'static str),
    #[error("configuration: {0}")]
    Config(String),
}
