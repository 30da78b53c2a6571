use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    /// The requested closed form is undefined at these parameters
    /// (e.g. `p_t <= p_j` for RRS or `phi >= 1` for MMRS).
    #[error("closed form invalid: {0}")]
    ClosedFormInvalid(String),

    #[error("config parse error: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("output error: {0}")]
    Io(String),

    #[error("no interior minimum found after {doublings} bracket doublings")]
    NoInteriorMinimum { doublings: u32 },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
