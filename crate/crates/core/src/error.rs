use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("degenerate profile `{kernel}`: {reason}")]
    DegenerateProfile { kernel: String, reason: String },

    #[error("invalid kernel profile `{kernel}`: {reason}")]
    InvalidProfile { kernel: String, reason: String },

    #[error("invalid device spec: {0}")]
    InvalidSpec(String),

    #[error("case {case} does not apply to kernel `{kernel}`")]
    CaseMismatch { case: String, kernel: String },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
