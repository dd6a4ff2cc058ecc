use alloc::string::String;

/// Errors raised by the core pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unknown vertex {0}")]
    UnknownVertex(u32),
    #[error("unknown hyperedge {0}")]
    UnknownHyperedge(u32),
    #[error("invalid hypergraph: {0}")]
    InvalidHypergraph(String),
    #[error("invalid bucket scheme: {0}")]
    InvalidBuckets(String),
    #[error("template needs {needed} tokens but the budget is {budget}")]
    TemplateTooLarge { needed: usize, budget: usize },
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error("invalid incidence pattern: {0}")]
    InvalidPattern(String),
    #[error("center role does not match the template ({0})")]
    RoleMismatch(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("prompt has {0} `<hypergraph>` placeholders, expected exactly one")]
    Placeholder(usize),
    #[error("empty label set")]
    EmptyLabelSet,
    #[error("sequence length {len} exceeds the context limit {limit}")]
    TooLong { len: usize, limit: usize },
    #[error("sample has no supervised answer tokens")]
    EmptyAnswer,
    #[error("slot {0} is outside the detail segment")]
    OutOfSegment(usize),
    #[error("cache does not belong to these parameters")]
    StaleCache,
    #[error("non-finite loss")]
    NonFinite,
    #[error("query vertices must be three distinct vertices")]
    InvalidQuery,
    #[error("diagnostic configuration is infeasible: {0}")]
    Infeasible(String),
    #[error("expected {expected} predictions, got {got}")]
    PredictionCount { expected: usize, got: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("split overlap on id {0}")]
    SplitOverlap(u32),
    #[error("manifest mismatch: {0}")]
    ManifestMismatch(String),
    #[error("invalid config: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
