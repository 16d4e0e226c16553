//! `nitool`: command-line front end for negative-imaginary classification
//! and DC-loop-gain stability analysis.

pub mod args;
pub mod commands;
pub mod document;
pub mod error;
pub mod report;

impl error::CliError {
    pub fn exit_code(&self) -> i32 {
        use ni_core::error::NiError;
        match self {
            error::CliError::Core(NiError::Precondition(_) | NiError::DimensionMismatch(_)) => 3,
            _ => 1,
        }
    }
}
