use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("linear system is rank deficient (rank {rank}); dependent rows: {rows:?}")]
    RankDeficient { rank: usize, rows: Vec<String> },

    #[error("{failed} of {trials} trajectories hit the {cap}-event cap: {config}")]
    NonTerminating {
        failed: usize,
        trials: usize,
        cap: usize,
        config: String,
    },

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("malformed document: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
