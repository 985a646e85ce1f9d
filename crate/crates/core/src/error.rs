use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent or out-of-range configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed input data (lengths, non-finite values).
    #[error("input error: {0}")]
    Input(String),

    /// A state space larger than the configured budget was requested.
    #[error("state budget exceeded: {requested} states requested, budget is {budget}")]
    Capacity { requested: u128, budget: usize },

    /// An iterative numeric procedure failed.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// BCJR forward vector vanished; the observation is impossible under the model.
    #[error("degenerate forward recursion at trellis step {step}")]
    Degenerate { step: usize },

    /// A Monte Carlo trial failed; carries the trial and detector for context.
    #[error("trial {trial}, {detector}: {source}")]
    Trial {
        trial: u64,
        detector: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// True for errors caused by the user's configuration rather than a runtime failure.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Json(_) | Error::Capacity { .. })
    }
}
