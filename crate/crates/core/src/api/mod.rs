//! Service surface: request/response endpoints and per-session push
//! streams. Every endpoint delegates to the state machine through the
//! group's log, so the log replayed through [`crate::state`] always equals
//! the live state.
//!
//! The service is transport-agnostic; the CLI's `serve` command puts it
//! behind HTTP, and the simulator calls it in-process on a virtual clock.

mod clock;
mod push;
mod service;

pub use clock::{Clock, SystemClock, VirtualClock};
pub use push::PushEvent;
pub use service::{ApiError, Feed, Service, Session};
