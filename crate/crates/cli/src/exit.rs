use std::fmt;
use std::process::ExitCode;

use qers_core::Error;
use qers_probe::ProbeError;

pub const USAGE: u8 = 2;
pub const CONFIG: u8 = 3;
pub const INPUT: u8 = 4;
pub const DATA: u8 = 5;
pub const PROBE: u8 = 6;
pub const WRITE: u8 = 7;

/// An error with the process exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub fn core_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. }
        | Error::Parse(_)
        | Error::InvalidCatalog(_)
        | Error::WeightSumViolation { .. }
        | Error::NegativeWeight { .. }
        | Error::InvalidBounds { .. } => CONFIG,
        Error::UnreadableFile { .. } | Error::UnknownSchemaVersion(_) | Error::MalformedLog(_) => {
            INPUT
        }
        Error::MissingMetric { .. }
        | Error::EmptySeries(_)
        | Error::InvalidSpec(_)
        | Error::UnknownScheme(_)
        | Error::OutOfRange(_) => DATA,
        Error::WriteFailure { .. } => WRITE,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::new(core_code(&e), e.to_string())
    }
}

impl From<ProbeError> for Failure {
    fn from(e: ProbeError) -> Self {
        match e {
            ProbeError::Core(inner) => inner.into(),
            other => Failure::new(PROBE, other.to_string()),
        }
    }
}
