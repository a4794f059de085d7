//! Pipeline commands, persistent documents and the teleoperation websocket
//! service behind the `lft` binary.

pub mod commands;
pub mod documents;
pub mod protocol;
pub mod service;

use thiserror::Error;

/// Command failure, classified by the process exit code it maps to.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable, malformed or invalid input (exit 2).
    #[error("{0}")]
    Input(String),
    /// The scripted demonstrator could not seat the plug (exit 3).
    #[error("demonstration failed: {0}")]
    Demonstration(String),
    /// Learning failed on degenerate data (exit 4).
    #[error("fit failed: {0}")]
    Fit(String),
}

impl CliError {
    pub fn input(msg: impl std::fmt::Display) -> Self {
        Self::Input(msg.to_string())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Input(_) => 2,
            Self::Demonstration(_) => 3,
            Self::Fit(_) => 4,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
