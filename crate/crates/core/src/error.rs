use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed XML at byte {offset}: {message}")]
    Xml { offset: u64, message: String },

    #[error("malformed annotation line {line}: {message}")]
    Annotation { line: usize, message: String },

    #[error("annotation {id}: surface {surface:?} does not match text slice {slice:?}")]
    SurfaceMismatch { id: String, surface: String, slice: String },

    #[error("unknown label {label:?}; valid labels are {valid}")]
    UnknownLabel { label: String, valid: String },

    #[error("unknown tag {0:?}")]
    UnknownTag(String),

    #[error("overlapping spans [{first_start}, {first_end}) and [{second_start}, {second_end})")]
    OverlappingSpans {
        first_start: usize,
        first_end: usize,
        second_start: usize,
        second_end: usize,
    },

    #[error("length mismatch: {tokens} tokens but {tags} tags")]
    LengthMismatch { tokens: usize, tags: usize },

    #[error("empty token sequence")]
    EmptySequence,

    #[error("non-finite loss for sequence {0} of the batch")]
    NonFiniteLoss(usize),

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("unsupported unit {unit:?} for {kind}")]
    UnsupportedUnit { unit: String, kind: String },

    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,

    #[error("vocabulary is empty after min-count filtering")]
    EmptyVocabulary,

    #[error("paragraph {index}: texts differ between the two annotation sets")]
    Alignment { index: usize },

    #[error("unsupported model file version {0}")]
    ModelVersion(u32),

    #[error("invalid model file: {0}")]
    ModelFormat(String),

    #[error("invalid vector file line {line}: {message}")]
    VectorFormat { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid IOB file line {line}: {message}")]
    IobFormat { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
