use alloc::string::String;
use alloc::vec::Vec;

use crate::archgraph::GraphKey;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("graph has {actual} nodes, more than the target size {target}")]
    SizeOverflow { actual: usize, target: usize },
    #[error("input node cannot reach the output node")]
    NoPath,
    #[error("path {0:?} is not part of the path universe")]
    UnknownPath(Vec<u8>),
    #[error("edge-operation cell contains a cycle")]
    CycleDetected,
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("malformed graph: {0}")]
    MalformedGraph(String),
    #[error("requested {requested} samples from a space of {available}")]
    TooManySamples { requested: usize, available: usize },
    #[error("sampler gave up after {0} rejected draws")]
    RetryCapExhausted(usize),
    #[error("neighborhood exhausted: found {found} of {requested} candidates")]
    NeighborhoodExhausted { requested: usize, found: usize },
    #[error("architecture {0} is not in the benchmark table")]
    UnknownArchitecture(GraphKey),
    #[error("path distributions come from different universes")]
    UniverseMismatch,
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("{0} produced a non-finite value")]
    NonFinite(&'static str),
    #[error("batch norm in train mode needs at least 2 rows, got {0}")]
    BatchTooSmall(usize),
    #[error("sigma must be positive")]
    NonPositiveSigma,
    #[error("loss must be a scalar recorded on this tape")]
    InvalidLoss,
    #[error("training needs at least 2 records, got {0}")]
    TooFewRecords(usize),
    #[error("operation id {op} outside a vocabulary of {size} kinds")]
    VocabularyMismatch { op: u8, size: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("duplicate architecture {0}")]
    DuplicateKey(GraphKey),
    #[error("error value {0} outside (0, 1)")]
    ErrorOutOfRange(f64),
}
