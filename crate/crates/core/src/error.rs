use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("homogeneity violation: contraction ratios differ ({0})")]
    Homogeneity(String),
    #[error("p.c.f. violation: {0}")]
    Pcf(String),
    #[error("invalid IFS: {0}")]
    InvalidIfs(String),
    #[error("blow-up requires the first center at the origin; translate all centers by -b_1 first")]
    BlowupOrigin,
    #[error("invalid glue set: {0}")]
    InvalidGlue(String),
    #[error("just-touching violation: {0}")]
    JustTouching(String),
    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },
    #[error("level {requested} exceeds built level {built}")]
    LevelTooDeep { requested: usize, built: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("expected {expected} vertex values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("unknown catalog fractal {0:?}")]
    UnknownFractal(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("solver stopped after {iterations} iterations with residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("renormalisation ratios did not settle within tolerance: {ratios:?}")]
    RatioOscillation { ratios: Vec<f64> },
    #[error("eigen-decomposition failed: {0}")]
    Eigen(String),
}

impl Error {
    /// True for failures of a numerical routine, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. } | Error::RatioOscillation { .. } | Error::Eigen(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
