use thiserror::Error;

use crate::program::Mutator;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("trace already at horizon {horizon}")]
    HorizonExceeded { horizon: usize },
    #[error("mutator {0} is not applicable in this state")]
    InvalidMutator(Mutator),
    #[error("cannot parse mutator {0:?}")]
    UnknownMutator(String),
    #[error("oracle horizon {requested} exceeds budget of {max}")]
    OracleBudgetExceeded { requested: usize, max: usize },
    #[error("unknown model {0:?}")]
    UnknownModel(String),
    #[error("no children to select from")]
    EmptyChildren,
    #[error("node already has {branching} live children")]
    BranchingFull { branching: usize },
    #[error("proposer unavailable: {0}")]
    ProposerUnavailable(String),
    #[error("unparseable response: {0}")]
    UnparseableResponse(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("sample count must be at least 1")]
    ZeroSamples,
    #[error("no regular model calls recorded")]
    ZeroCalls,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
