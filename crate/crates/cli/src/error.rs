use std::fmt;
use std::path::Path;

use labelind::ingest::IngestError;
use labelind::synthgen::SynthError;
use labelind::RunError;

/// Error class, one exit code each. See the table in `main.rs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    Config = 3,
    Data = 4,
    Pipeline = 5,
    Io = 6,
    UnknownCase = 7,
}

#[derive(Debug)]
pub struct CliError {
    class: Class,
    message: String,
}

impl CliError {
    pub fn new(class: Class, message: impl Into<String>) -> Self {
        Self {
            class,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new(Class::Io, format!("{}: {e}", path.display()))
    }

    pub fn code(&self) -> u8 {
        self.class as u8
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        let class = match &e {
            RunError::InvalidConfig(_) | RunError::Json(_) | RunError::ConfigMismatch { .. } => Class::Config,
            RunError::Ingest(IngestError::Io(_)) => Class::Io,
            RunError::Ingest(_) | RunError::Synth(_) => Class::Data,
            RunError::Split(_)
            | RunError::Imputation { .. }
            | RunError::Balance { .. }
            | RunError::Cell { .. }
            | RunError::Evaluation(_) => Class::Pipeline,
            RunError::Io { .. } | RunError::Artifact { .. } => Class::Io,
            RunError::UnknownCase(_) => Class::UnknownCase,
        };
        Self::new(class, e.to_string())
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        let class = match e {
            IngestError::Io(_) => Class::Io,
            _ => Class::Data,
        };
        Self::new(class, e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        let class = match e {
            SynthError::Io(_) => Class::Io,
            _ => Class::Data,
        };
        Self::new(class, e.to_string())
    }
}
