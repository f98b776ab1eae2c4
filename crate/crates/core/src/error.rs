use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("value {value} outside range [{low}, {high}]")]
    Range { value: f64, low: f64, high: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid {field}{}: {message}", robot.map(|id| format!(" (robot {id})")).unwrap_or_default())]
    Validation {
        field: String,
        robot: Option<u32>,
        message: String,
    },

    #[error("roadmap construction failed: {0}")]
    Construction(String),

    #[error("state space of {states} exceeds limit {limit}")]
    Resource { states: u64, limit: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, robot: Option<u32>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            robot,
            message: message.into(),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}
