use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("i/o error on {path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    // -- TEMB embedding files --
    #[error("bad magic bytes: expected \"TEMB\"")]
    BadMagic,
    #[error("unsupported TEMB version {0} (expected 1)")]
    UnsupportedVersion(u16),
    #[error("unsupported dtype tag {0} (expected 1 = f32)")]
    UnsupportedDtype(u8),
    #[error("truncated payload: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },
    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),
    #[error("sample id at row {0} is not valid UTF-8")]
    InvalidId(usize),

    // -- metadata --
    #[error("malformed record on line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error("duplicate frame {frame} in video {video:?}")]
    DuplicateFrame { video: String, frame: u64 },
    #[error("sample {0:?} is listed in metadata but missing from the embeddings")]
    MissingSample(String),

    // -- kernel / mmd --
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("kernel bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
    #[error("median pairwise distance is zero; pass a fixed bandwidth instead")]
    DegenerateBandwidth,
    #[error("need at least {needed} samples, found {found}")]
    TooFewSamples { needed: usize, found: usize },

    // -- class-aware metrics --
    #[error("no class has at least {0} samples")]
    NoEligibleClass(usize),
    #[error("class {class:?} has {size} samples, at least {needed} required")]
    UndersizedClass { class: String, size: usize, needed: usize },
    #[error("indeterminate diversity: every divergence in the row of class {0:?} is non-positive")]
    IndeterminateDiversity(String),

    // -- baselines --
    #[error("eigendecomposition did not converge")]
    EigenFailure,
    #[error("covariance is not positive semi-definite (eigenvalue {0})")]
    IllFormedCovariance(f64),
    #[error("image size mismatch: {0}x{1} vs {2}x{3}")]
    ImageSizeMismatch(u32, u32, u32, u32),
    #[error("image {width}x{height} is smaller than the {window}x{window} window")]
    ImageTooSmall { width: u32, height: u32, window: u32 },
    #[error("unsupported image: {0}")]
    UnsupportedImage(String),
    #[error("png decoding failed: {0}")]
    Png(#[from] png::DecodingError),
    #[error("query {0:?} has no paired gallery item")]
    UnmappedQuery(String),
    #[error("k = {k} exceeds the available {size} items")]
    KTooLarge { k: usize, size: usize },

    // -- leakage audit --
    #[error("sample {0:?} has no train/test split tag")]
    UntaggedSample(String),
    #[error("similarity threshold must lie in (0, 1], got {0}")]
    ThresholdOutOfRange(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the error stems from bad input rather than a failure inside
    /// the toolkit. The command line maps these to exit code 2.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::EigenFailure)
    }
}
