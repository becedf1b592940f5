use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which side of an exemplar mask a failure refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskSide {
    Foreground,
    Background,
}

impl std::fmt::Display for MaskSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MaskSide::Foreground => f.write_str("foreground"),
            MaskSide::Background => f.write_str("background"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("patch {patch} has a zero-length feature vector")]
    ZeroVector { patch: usize },

    #[error("bad magic: expected \"MSFG\", found {found:?}")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("trailing data: expected {expected} bytes, found {found}")]
    TrailingData { expected: u64, found: u64 },

    #[error("dimension overflow: {rows}x{cols}x{dim} does not fit in memory")]
    DimensionOverflow { rows: u32, cols: u32, dim: u32 },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("global descriptor is degenerate (mean feature vector has zero norm)")]
    DegenerateDescriptor,

    #[error("duplicate entry id {0:?}")]
    DuplicateId(String),

    #[error("dimension mismatch ({context}): expected {expected}, found {found}")]
    DimMismatch {
        context: String,
        expected: String,
        found: String,
    },

    #[error("memory bank is empty")]
    EmptyBank,

    #[error("bank manifest not found at {0}")]
    MissingManifest(PathBuf),

    #[error("invalid bank manifest: {0}")]
    InvalidManifest(String),

    #[error("entry {id:?}: referenced file {path} is missing")]
    MissingFile { id: String, path: PathBuf },

    #[error("entry {id:?}: stored descriptor does not match its feature grid")]
    ChecksumMismatch { id: String },

    #[error("{what}: {}", ids.join(", "))]
    Unpaired { what: String, ids: Vec<String> },

    #[error("similarity subset is empty")]
    EmptySubset,

    #[error("exemplar has no {0} patches after mask downsampling")]
    DegenerateExemplar(MaskSide),

    #[error("no foreground candidate cleared tau_fg; try lowering --tau-fg")]
    NoForeground,

    #[error("backend error: {message}")]
    Backend { message: String, transcript: Vec<String> },

    #[error("invalid prompt: {0}")]
    Prompt(String),

    #[error("segmenter returned no candidate masks")]
    NoCandidates,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn image(path: impl Into<PathBuf>, source: image::ImageError) -> Self {
        Error::Image {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim_mismatch(
        context: impl Into<String>,
        expected: impl std::fmt::Display,
        found: impl std::fmt::Display,
    ) -> Self {
        Error::DimMismatch {
            context: context.into(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn backend(message: impl Into<String>) -> Self {
        Error::Backend {
            message: message.into(),
            transcript: Vec::new(),
        }
    }

    /// Process exit code for this error class: 1 usage, 2 I/O, 3 backend, 4 pipeline.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::EmptyInput(_) => 1,
            Error::Io { .. }
            | Error::Image { .. }
            | Error::Json(_)
            | Error::BadMagic { .. }
            | Error::UnsupportedVersion { .. }
            | Error::Truncated { .. }
            | Error::TrailingData { .. }
            | Error::DimensionOverflow { .. }
            | Error::MissingManifest(_)
            | Error::InvalidManifest(_)
            | Error::MissingFile { .. }
            | Error::ChecksumMismatch { .. }
            | Error::Unpaired { .. } => 2,
            Error::Backend { .. } => 3,
            _ => 4,
        }
    }
}
