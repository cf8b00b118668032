use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid infrastructure: {0}")]
    InvalidInfrastructure(String),

    #[error("invalid overlay: {0}")]
    InvalidOverlay(String),

    #[error("invalid solution: {0}")]
    InvalidSolution(String),

    #[error("unknown {kind} id `{id}`")]
    UnknownId { kind: &'static str, id: String },

    #[error("nodes `{0}` and `{1}` share a position; attenuation is undefined")]
    CoincidentNodes(String, String),

    #[error("a linearized boolean expression needs at least one operand")]
    EmptyExpression,

    #[error("model has {count} variables, above the cap of {cap}")]
    ModelTooLarge { count: u128, cap: u128 },

    #[error("path of {hops} hops exceeds the supported coefficient precision ({max} hops)")]
    PathTooLong { hops: usize, max: usize },

    #[error("invalid experiment plan: {0}")]
    InvalidPlan(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
