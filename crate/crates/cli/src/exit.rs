use std::fmt;

use removal_eval::features::BatchError;
use removal_eval::Error;

pub const OK: u8 = 0;
pub const DATA: u8 = 1;
pub const ENVIRONMENT: u8 = 2;
pub const PROTOCOL: u8 = 3;
pub const USAGE: u8 = 64;

/// A command failure carrying its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(USAGE, message)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub fn code_for(e: &Error) -> u8 {
    match e {
        Error::Validation(_)
        | Error::DegenerateInput(_)
        | Error::NotPsd { .. }
        | Error::NumericalFailure(_)
        | Error::Generation { .. } => DATA,
        Error::Format { .. } | Error::Parse { .. } | Error::Backend { .. } | Error::Io { .. } => {
            ENVIRONMENT
        }
        Error::Protocol(_) => PROTOCOL,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::new(code_for(&e), e.to_string())
    }
}

impl From<BatchError> for Failure {
    fn from(e: BatchError) -> Self {
        match e {
            BatchError::Fatal(e) => e.into(),
            items @ BatchError::Items(_) => Self::new(DATA, items.to_string()),
        }
    }
}

pub type CmdResult = Result<(), Failure>;
