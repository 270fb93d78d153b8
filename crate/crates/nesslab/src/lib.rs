//! Configuration, file formats, commands and the acceptance battery for
//! `nesslab-core`.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod table;
pub mod verify;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("solver: {0}")]
    Solver(#[from] nesslab_core::Error),
    #[error("acceptance failures: {0}")]
    Acceptance(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Acceptance(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}
