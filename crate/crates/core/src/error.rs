use thiserror::Error;

/// Errors raised by the analytic and simulation layers.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// An argument violates an operation's precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A requested enumeration or subset sweep exceeds its configured cap.
    #[error("refusing to enumerate: {what} requires {requested}, cap is {cap}")]
    CapExceeded {
        what: &'static str,
        requested: String,
        cap: String,
    },

    /// The closed form has no value at this point (for example a zero denominator).
    #[error("undefined: {0}")]
    Undefined(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
