//! Append-only per-group event logs and the manifest that lists groups.
//!
//! A log is UTF-8 JSON lines, one [`EventRecord`] per line, stored as
//! `<group_id>.events.jsonl`. The log is the source of truth: group state
//! is whatever folding its records in seq order produces.

mod log;
mod manifest;
mod record;

pub use log::{parse_log, replay, GroupLog};
pub use manifest::{log_path, read_groups, LoadedGroup, Manifest, LOG_SUFFIX, MANIFEST_FILE};
pub use record::{Event, EventRecord};

use thiserror::Error;

use crate::error::{CommitError, ConfigError};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Rejected(#[from] CommitError),
    #[error("event at {at} precedes the log head at {head}")]
    NonMonotonicTime { at: String, head: String },
    #[error("corrupt record at line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("invalid group config: {0}")]
    Config(#[from] ConfigError),
    #[error("unknown group {0}")]
    UnknownGroup(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl StoreError {
    /// The typed core rejection, if this is one.
    pub fn rejection(&self) -> Option<&CommitError> {
        match self {
            StoreError::Rejected(e) => Some(e),
            _ => None,
        }
    }
}
