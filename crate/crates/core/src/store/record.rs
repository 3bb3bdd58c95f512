//! One line of a group's event log.

use serde::{Deserialize, Serialize};

use crate::config::GroupConfig;
use crate::model::{CommitVia, CycleIndex, MemberId, MessageId, MessageKind, ReactionId, ReactionKind};
use crate::notify::{NotificationSource, RuleId};
use crate::time::{self, Timestamp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Event {
    GroupCreated {
        config: GroupConfig,
    },
    MemberJoined {
        member_id: MemberId,
        display_name: String,
    },
    Commit {
        member_id: MemberId,
        cycle: CycleIndex,
        via: CommitVia,
        null_commit: bool,
    },
    Message {
        message_id: MessageId,
        sender_id: MemberId,
        kind: MessageKind,
        body: String,
    },
    Reaction {
        reaction_id: ReactionId,
        message_id: MessageId,
        reactor_id: MemberId,
        reaction: ReactionKind,
        commit_cycle: Option<CycleIndex>,
    },
    Notification {
        member_id: MemberId,
        rule_id: RuleId,
        rendered_text: String,
        content_visible: bool,
        /// The message or reaction that caused it, for activity rules.
        source: Option<NotificationSource>,
    },
    AppOpen {
        member_id: MemberId,
    },
}

impl Event {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Event::GroupCreated { .. } => "GROUP_CREATED",
            Event::MemberJoined { .. } => "MEMBER_JOINED",
            Event::Commit { .. } => "COMMIT",
            Event::Message { .. } => "MESSAGE",
            Event::Reaction { .. } => "REACTION",
            Event::Notification { .. } => "NOTIFICATION",
            Event::AppOpen { .. } => "APP_OPEN",
        }
    }

    /// The member an event is about, if any.
    pub fn member(&self) -> Option<&MemberId> {
        match self {
            Event::GroupCreated { .. } => None,
            Event::MemberJoined { member_id, .. }
            | Event::Commit { member_id, .. }
            | Event::Notification { member_id, .. }
            | Event::AppOpen { member_id } => Some(member_id),
            Event::Message { sender_id, .. } => Some(sender_id),
            Event::Reaction { reactor_id, .. } => Some(reactor_id),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    #[serde(with = "time::wire")]
    pub at: Timestamp,
    #[serde(flatten)]
    pub event: Event,
}

impl EventRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("event records always serialize")
    }

    pub fn from_line(line: &str) -> Result<EventRecord, serde_json::Error> {
        serde_json::from_str(line)
    }
}
