use thiserror::Error;

use crate::submodular::ItemId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("item {item} is outside the ground set of size {ground_size}")]
    UnknownItem { item: ItemId, ground_size: usize },

    #[error("negative weight {weight} at index {index}")]
    NegativeWeight { index: usize, weight: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("set {0} is not feasible under the constraint")]
    Infeasible(String),

    #[error("item {0} is already a member of the set")]
    AlreadyPresent(ItemId),

    #[error("secretary horizon of {horizon} items exceeded")]
    HorizonExceeded { horizon: usize },

    #[error("ground set of {n} items exceeds the exhaustive limit {limit}; use greedy instead")]
    TooLarge { n: usize, limit: usize },

    #[error("no exchange bijection between the two bases: {0}")]
    NoExchangeBijection(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("buffer high-water {high_water} exceeded budget {budget}")]
    BufferBudget { high_water: usize, budget: usize },

    #[error("trial {seed}: {source}")]
    Trial {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
