use thiserror::Error;

use crate::types::{ItemId, WorkerId};

#[derive(Debug, Error)]
pub enum Error {
    #[error("item {0}: observer weights sum to zero")]
    DegenerateItem(ItemId),

    #[error("worker {worker}: variance {variance} is not positive")]
    NonPositiveVariance { worker: WorkerId, variance: f64 },

    #[error("no aggregated value for item {0}")]
    MissingValue(ItemId),

    #[error("target set is empty")]
    EmptyTargets,

    #[error("observation set is empty")]
    EmptyObservations,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{eligible} items have at least {min_observers} observers but {requested} targets were requested")]
    InsufficientEligibleItems {
        eligible: usize,
        requested: usize,
        min_observers: usize,
    },

    #[error("worker {worker} is not assigned to item {item}")]
    NotAssigned { worker: WorkerId, item: ItemId },

    #[error("worker {0} has no observations")]
    UnknownWorker(WorkerId),

    #[error("attacker observes no normal worker on target {0}")]
    EmptyKnowledge(ItemId),

    #[error("requested {requested} workers but only {available} exist")]
    SelectionTooLarge { requested: usize, available: usize },

    #[error("{}duplicate observation for worker {worker} on item {item}", line_prefix(*.line))]
    DuplicateObservation {
        worker: WorkerId,
        item: ItemId,
        line: Option<u64>,
    },

    #[error("non-finite value for worker {worker} on item {item}")]
    NonFiniteValue { worker: WorkerId, item: ItemId },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

fn line_prefix(line: Option<u64>) -> String {
    match line {
        Some(l) => format!("line {l}: "),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
