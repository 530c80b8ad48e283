use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the region where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// The damped Newton iteration of an implicit step did not reach the
    /// gradient tolerance.
    #[error("newton solve failed at time level {level} after {iterations} iterations (gradient norm {grad_norm:.3e})")]
    NonConvergence {
        level: usize,
        iterations: usize,
        grad_norm: f64,
    },

    /// The level functional did not drop below the threshold while doubling
    /// the search bracket.
    #[error("level search at j = {j} did not bracket a root within {doublings} doublings")]
    LevelSearch { j: usize, doublings: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
