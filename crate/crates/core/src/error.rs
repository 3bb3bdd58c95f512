use thiserror::Error;

use crate::model::{CycleIndex, MemberId, MessageId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("group id must not be empty")]
    EmptyGroupId,
    #[error("cycle length must be positive")]
    ZeroCycleLength,
    #[error("expectation count must be at least 1")]
    ZeroExpectation,
    #[error("urgency fraction must lie strictly between 0 and 1, got {0}")]
    UrgencyFraction(f64),
    #[error("forfeit window must be at least one cycle")]
    ZeroForfeitWindow,
    #[error("morning hour must be 0..=23, got {0}")]
    MorningHour(u32),
    #[error("utc offset out of range: {0} minutes")]
    UtcOffset(i32),
    #[error("unknown condition {0:?}")]
    UnknownCondition(String),
}

/// Typed rejections of the commitment state machine. The `code()` strings
/// are what the wire protocol carries.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CommitError {
    #[error("before group start")]
    BeforeGroupStart,
    #[error("cycle {target} is more than {limit} cycle(s) ahead of current cycle {current}")]
    RejectAheadLimit {
        target: CycleIndex,
        current: CycleIndex,
        limit: u32,
    },
    #[error("cycle {target} has already ended (current cycle {current})")]
    RejectPastCycle {
        target: CycleIndex,
        current: CycleIndex,
    },
    #[error("commitments are disabled in the control condition")]
    RejectWrongCondition,
    #[error("member {0} is not committed for the current cycle")]
    RejectNotCommitted(MemberId),
    #[error("null commitments are not enabled for this group")]
    RejectNullNotAllowed,
    #[error("member {0} has forfeited membership")]
    RejectForfeited(MemberId),
    #[error("unknown member {0}")]
    UnknownMember(MemberId),
    #[error("member {0} already joined")]
    AlreadyJoined(MemberId),
    #[error("unknown message {0}")]
    UnknownMessage(MessageId),
    #[error("event does not match replayed state: {0}")]
    Inconsistent(String),
}

impl CommitError {
    pub fn code(&self) -> &'static str {
        match self {
            CommitError::BeforeGroupStart => "BEFORE_GROUP_START",
            CommitError::RejectAheadLimit { .. } => "REJECT_AHEAD_LIMIT",
            CommitError::RejectPastCycle { .. } => "REJECT_PAST_CYCLE",
            CommitError::RejectWrongCondition => "REJECT_WRONG_CONDITION",
            CommitError::RejectNotCommitted(_) => "REJECT_NOT_COMMITTED",
            CommitError::RejectNullNotAllowed => "REJECT_NULL_NOT_ALLOWED",
            CommitError::RejectForfeited(_) => "REJECT_FORFEITED",
            CommitError::UnknownMember(_) => "UNKNOWN_MEMBER",
            CommitError::AlreadyJoined(_) => "ALREADY_JOINED",
            CommitError::UnknownMessage(_) => "UNKNOWN_MESSAGE",
            CommitError::Inconsistent(_) => "INCONSISTENT_EVENT",
        }
    }
}
