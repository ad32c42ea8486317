use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("conditioning event has zero probability: {0}")]
    ZeroProbabilityEvent(String),

    #[error("horizon {got} exceeds brute-force limit {max}")]
    HorizonTooLarge { got: usize, max: usize },

    #[error("cdf is discontinuous: {0} (add a perturbation delta to the distribution)")]
    DiscontinuousCdf(String),

    #[error("degenerate thresholds: {0}")]
    DegenerateThresholds(String),

    #[error("infeasible action at step {step}: {action} while {state}")]
    InfeasibleAction {
        step: usize,
        action: &'static str,
        state: &'static str,
    },

    #[error("adaptive price process not supported here: {0}")]
    AdaptiveUnsupported(String),

    #[error("formula requires a zero-cost model, got eps_pi={eps_pi}, eps_sigma={eps_sigma}")]
    NonzeroCosts { eps_pi: f64, eps_sigma: f64 },

    #[error("bound violated: {0}")]
    BoundViolated(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("adversary protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("config error: field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }
}
