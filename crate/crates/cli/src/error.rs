use serde::Serialize;
use thiserror::Error;

/// Failures surfaced by the CLI, each with a fixed exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    InvalidInput(String),
    #[error("stabilization failed: {message}")]
    Stabilization { frame: Option<usize>, message: String },
    #[error("{0}")]
    Io(String),
    #[error("degenerate hand at frame {frame}: {message}")]
    DegenerateHand { frame: usize, message: String },
    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::CheckFailed(_) => 1,
            CliError::InvalidInput(_) => 2,
            CliError::Stabilization { .. } => 3,
            CliError::Io(_) => 4,
            CliError::DegenerateHand { .. } => 5,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::CheckFailed(_) => "check_failed",
            CliError::InvalidInput(_) => "invalid_input",
            CliError::Stabilization { .. } => "stabilization_failed",
            CliError::Io(_) => "io",
            CliError::DegenerateHand { .. } => "degenerate_hand",
        }
    }

    pub fn frame(&self) -> Option<usize> {
        match self {
            CliError::Stabilization { frame, .. } => *frame,
            CliError::DegenerateHand { frame, .. } => Some(*frame),
            _ => None,
        }
    }

    pub fn report(&self, episode: Option<&str>) -> ErrorReport {
        ErrorReport {
            error: self.kind(),
            exit_code: self.exit_code(),
            message: self.to_string(),
            episode: episode.map(str::to_string),
            frame: self.frame(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Machine-readable error written to stderr.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub exit_code: i32,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub episode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame: Option<usize>,
}
