use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    /// Effective elimination of the cavity needs g_max well below kappa.
    #[error("regime violation: g_max/kappa = {ratio:.4} exceeds {limit}")]
    Regime { ratio: f64, limit: f64 },

    #[error("no crossing of the target curve on [{lo} m, {hi} m]")]
    NoCrossing { lo: f64, hi: f64 },

    #[error("unbounded optimum: all loss rates vanish")]
    UnboundedOptimum,

    #[error("dark/bright basis undefined when both couplings vanish")]
    UndefinedBasis,

    #[error("integrator failure at t = {t:e} s (step {h:e} s): {reason}")]
    Integrator { t: f64, h: f64, reason: String },

    #[error("mode count did not converge below {cap} (last |dF| = {last_delta:e})")]
    NonConvergence { cap: usize, last_delta: f64 },

    #[error("every objective evaluation failed: {0}")]
    Search(String),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { field, reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
