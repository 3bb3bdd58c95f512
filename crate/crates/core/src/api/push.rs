use serde::{Deserialize, Serialize};

use crate::model::{BannerState, CycleIndex, MemberId, MessageId};
use crate::store::EventRecord;
use crate::time::{self, Timestamp};

/// One item on a session's push stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PushEvent {
    /// A log record the subscriber may see, exactly as stored.
    Event { record: EventRecord },
    /// Someone posted, but the subscriber is not committed: no body.
    GatedMessage {
        seq: u64,
        #[serde(with = "time::wire")]
        at: Timestamp,
        message_id: MessageId,
        sender_id: MemberId,
    },
    BannerChanged { banner: BannerState },
    CycleStarted {
        cycle: CycleIndex,
        #[serde(with = "time::wire")]
        at: Timestamp,
    },
}
