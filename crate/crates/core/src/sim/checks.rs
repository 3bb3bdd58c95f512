//! Post-hoc invariant checks over simulated logs.

use std::collections::HashMap;

use super::run::REPLY_PREFIX;
use super::SimError;
use crate::config::GroupConfig;
use crate::model::{MemberId, MessageId};
use crate::state::GroupState;
use crate::store::{Event, EventRecord};

/// Seqs are consecutive from 1 and timestamps never decrease.
pub fn check_monotone(records: &[EventRecord]) -> Result<(), SimError> {
    for (i, r) in records.iter().enumerate() {
        if r.seq != i as u64 + 1 {
            return Err(SimError::Invariant(format!("seq {} at position {}", r.seq, i + 1)));
        }
        if i > 0 && r.at < records[i - 1].at {
            return Err(SimError::Invariant(format!("time goes backwards at seq {}", r.seq)));
        }
    }
    Ok(())
}

/// Every reply names a message its author could read: some earlier feed
/// open by the author, made while they had access, came after that message.
pub fn check_gated_reads(config: &GroupConfig, records: &[EventRecord]) -> Result<(), SimError> {
    let mut state = GroupState::new(config.clone());
    let mut message_seq: HashMap<MessageId, u64> = HashMap::new();
    let mut read_upto: HashMap<MemberId, u64> = HashMap::new();
    for r in records {
        if let Event::Message { sender_id, body, .. } = &r.event {
            if let Some(target) = body.strip_prefix(REPLY_PREFIX) {
                let seen = message_seq
                    .iter()
                    .find(|(id, _)| id.to_string() == target)
                    .map(|(_, seq)| *seq)
                    .ok_or_else(|| SimError::Invariant(format!("seq {}: reply to unknown {target}", r.seq)))?;
                if read_upto.get(sender_id).copied().unwrap_or(0) < seen {
                    return Err(SimError::Invariant(format!(
                        "seq {}: {sender_id} replied to {target} without reading it",
                        r.seq
                    )));
                }
            }
        }
        state
            .apply(r.at, &r.event)
            .map_err(|e| SimError::Invariant(format!("seq {} does not replay: {e}", r.seq)))?;
        match &r.event {
            Event::Message { message_id, .. } => {
                message_seq.insert(*message_id, r.seq);
            }
            Event::AppOpen { member_id } if state.can_read(member_id, r.at).unwrap_or(false) => {
                read_upto.insert(member_id.clone(), r.seq);
            }
            _ => {}
        }
    }
    Ok(())
}
