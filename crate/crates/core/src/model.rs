//! Domain records shared by the state machine, the log and the service.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::time::{self, Timestamp};

macro_rules! string_id {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(s)
            }
        }
    };
}

string_id!(GroupId);
string_id!(MemberId);

/// Per-group sequential message number, starting at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MessageId(pub u64);

impl fmt::Display for MessageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReactionId(pub u64);

/// Index of a commitment cycle. Cycle `k` spans
/// `[epoch + k * len, epoch + (k + 1) * len)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CycleIndex(pub u32);

impl CycleIndex {
    pub fn next(self) -> CycleIndex {
        CycleIndex(self.0 + 1)
    }

    pub fn prev(self) -> Option<CycleIndex> {
        self.0.checked_sub(1).map(CycleIndex)
    }
}

impl fmt::Display for CycleIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CommitVia {
    Button,
    Reaction,
    AutoRenew,
}

/// One (member, cycle) cell of the commitment ledger.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    #[serde(with = "time::wire")]
    pub committed_at: Timestamp,
    pub via: CommitVia,
    /// Access without a participation expectation.
    pub null_commit: bool,
    pub messages_sent: u32,
}

impl LedgerEntry {
    pub fn fulfilled(&self, expectation: u32) -> bool {
        self.null_commit || self.messages_sent >= expectation
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitmentRecord {
    pub member_id: MemberId,
    pub cycle: CycleIndex,
    #[serde(with = "time::wire")]
    pub committed_at: Timestamp,
    pub via: CommitVia,
    pub null_commit: bool,
    pub messages_sent: u32,
    pub fulfilled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MessageKind {
    #[default]
    Text,
    /// Body is an opaque image reference.
    Image,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub message_id: MessageId,
    pub sender_id: MemberId,
    #[serde(with = "time::wire")]
    pub sent_at: Timestamp,
    pub kind: MessageKind,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReactionKind {
    Emoji { tag: String },
    /// Appreciates the message and re-commits the reactor.
    CommitReaction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reaction {
    pub reaction_id: ReactionId,
    pub message_id: MessageId,
    pub reactor_id: MemberId,
    pub kind: ReactionKind,
    #[serde(with = "time::wire")]
    pub at: Timestamp,
    /// Cycle the commitment part landed on, if any.
    pub commit_cycle: Option<CycleIndex>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MembershipView {
    pub member_id: MemberId,
    pub display_name: String,
    #[serde(with = "time::wire_opt")]
    pub last_posted_at: Option<Timestamp>,
    pub currently_committed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BannerState {
    NotCommitted,
    CommittedUnfulfilled,
    CommittedUnfulfilledUrgent,
    CommittedFulfilledNoRenewal,
    CommittedFulfilledRenewed,
    ControlDaysSincePost { days: u32 },
}

impl BannerState {
    pub fn is_urgent(self) -> bool {
        matches!(self, BannerState::CommittedUnfulfilledUrgent)
    }
}

/// What a member without read access sees instead of the chat.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObscuredView {
    pub group_name: String,
    pub committed_member_count: usize,
}
