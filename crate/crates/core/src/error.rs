use std::path::PathBuf;

use thiserror::Error;

use crate::feature::Method;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to decode {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("unsupported image format for {0}")]
    UnsupportedFormat(PathBuf),

    #[error("image {path} is {width}x{height}; only square images are accepted")]
    NonSquare {
        path: PathBuf,
        width: u32,
        height: u32,
    },

    #[error("image {0} is not 8-bit grayscale")]
    NotGrayscale(PathBuf),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("image side {image} does not match kernel side {kernel}")]
    SideMismatch { kernel: usize, image: usize },

    #[error("requested order {requested} exceeds kernel order {available}")]
    OrderTooLarge { requested: usize, available: usize },

    #[error("invalid Zernike index (n={n}, m={m}): n-|m| must be even and non-negative")]
    InvalidZernikeIndex { n: usize, m: i64 },

    #[error("degenerate image: total mass m00 is zero")]
    DegenerateImage,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("feature method mismatch: database uses {expected} (order {expected_order}), query uses {actual} (order {actual_order})")]
    MethodMismatch {
        expected: Method,
        expected_order: u16,
        actual: Method,
        actual_order: u16,
    },

    #[error("empty database")]
    EmptyDatabase,

    #[error("duplicate record id {0:?}")]
    DuplicateId(String),

    #[error("corrupt feature database: {0}")]
    Corrupt(String),

    #[error("unsupported feature database version {0}")]
    Version(u16),

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("svm error: {0}")]
    Svm(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
