use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed input at {location}: {reason}")]
    Malformed { location: String, reason: String },

    #[error("identity {identity} has {count} image(s); at least 2 are required")]
    TooFewImages { identity: u32, count: usize },

    #[error("inconsistent attribute for identity {identity}: saw {first} and {second}")]
    InconsistentAttribute {
        identity: u32,
        first: u32,
        second: u32,
    },

    #[error("dimension mismatch for image {image_id}: expected {expected}, found {found}")]
    DimensionMismatch {
        image_id: String,
        expected: usize,
        found: usize,
    },

    #[error("zero-norm embedding for image {image_id}")]
    ZeroNorm { image_id: String },

    #[error("zero-norm vector passed to cosine similarity")]
    ZeroNormVector,

    #[error("vectors of different lengths ({0} and {1})")]
    LengthMismatch(usize, usize),

    #[error("attribute {attribute} has fewer than 2 identities; no impostor pair can be formed")]
    NoImpostorPairs { attribute: u32 },

    #[error("empty scope: {0}")]
    EmptyScope(String),

    #[error("probability {0} outside (0, 1]")]
    InvalidProbability(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("multiplicity vector does not match the score cache: {0}")]
    MultiplicityMismatch(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
}

impl Error {
    pub(crate) fn malformed(location: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Malformed {
            location: location.into(),
            reason: reason.into(),
        }
    }
}
