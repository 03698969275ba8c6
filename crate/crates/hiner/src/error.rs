use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("value outside domain: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("byte budget {target} is unreachable; closest achievable size is {closest} bytes")]
    UnreachableBudget { target: usize, closest: usize },

    /// `last_good` holds the model as of the end of the previous epoch.
    #[error("loss became non-finite at epoch {epoch}, step {step}")]
    Divergence { epoch: usize, step: usize, last_good: Option<Box<crate::codec::HinerModel>> },

    #[error("bad magic: expected HINR, found {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported stream version {found} (expected {expected})")]
    VersionMismatch { found: u8, expected: u8 },

    #[error("stream truncated while reading {0}")]
    Truncated(&'static str),

    #[error("corrupt entropy-coded stream: {0}")]
    CorruptStream(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
