use thiserror::Error;

/// Errors produced by the solvers, agents and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("environment stepped past horizon {horizon} (t = {t})")]
    PastHorizon { t: u64, horizon: u64 },

    #[error("{what} did not converge within {iterations} iterations (span {span:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        span: f64,
    },

    #[error("state {to} is unreachable from state {from}: diameter is infinite")]
    InfiniteDiameter { from: usize, to: usize },

    #[error("episode {episode} (t_k = {start}): {source}")]
    Episode {
        episode: usize,
        start: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
