use serde::Serialize;

/// Failures grouped by process exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Divergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) | CliError::Data(_) => 3,
            CliError::Divergence(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Data(_) => "data",
            CliError::Divergence(_) => "divergence",
        }
    }

    pub fn record(&self) -> ErrorRecord {
        ErrorRecord {
            error: ErrorBody { kind: self.kind(), message: self.to_string(), exit_code: self.exit_code() },
        }
    }
}

impl From<hiner::Error> for CliError {
    fn from(e: hiner::Error) -> Self {
        use hiner::Error as E;
        let msg = e.to_string();
        match e {
            E::Config(_) | E::UnreachableBudget { .. } => CliError::Config(msg),
            E::Io { .. } => CliError::Io(msg),
            E::Divergence { .. } => CliError::Divergence(msg),
            _ => CliError::Data(msg),
        }
    }
}

/// The JSON object printed on failure.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub error: ErrorBody,
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub kind: &'static str,
    pub message: String,
    pub exit_code: i32,
}
