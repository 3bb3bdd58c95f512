//! Commitment-gated group chat.
//!
//! Members of a group commit, one synchronized cycle at a time, to posting
//! at least once; only committed members can read the chat. This crate
//! holds the commitment state machine ([`state`]), the append-only event
//! log it replays from ([`store`]), condition-paired reminder rules
//! ([`notify`]), an in-process service with a push channel ([`api`]), a
//! scripted-agent experiment harness ([`sim`]) and the behavioural
//! analytics run over the resulting logs ([`metrics`]).
//!
//! With the default `parallel` feature, independent groups and seeds are
//! processed on the rayon pool; without it everything runs sequentially and
//! produces identical output.

pub mod api;
pub mod config;
pub mod error;
pub mod metrics;
pub mod model;
pub mod notify;
pub mod par;
pub mod sim;
pub mod state;
pub mod store;
pub mod time;

pub use config::{Condition, Enforcement, GroupConfig};
pub use error::{CommitError, ConfigError};
pub use model::*;
pub use state::{cycle_of, GroupState};
pub use store::{Event, EventRecord, GroupLog, Manifest};
