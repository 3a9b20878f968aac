use thiserror::Error;

/// Errors raised by the library and the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("graph is not connected ({0})")]
    Disconnected(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("unstable recursion: spectral radius of {what} is {rho} (must be < 1)")]
    Unstable { what: &'static str, rho: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("step size violates {condition} at node {node}: mu = {mu}, limit = {limit}")]
    StepSize {
        condition: &'static str,
        node: usize,
        mu: f64,
        limit: f64,
    },

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. } | Error::Unstable { .. } | Error::Singular(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
