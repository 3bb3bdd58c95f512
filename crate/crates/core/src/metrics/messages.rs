use chrono::Duration;
use serde::{Deserialize, Serialize};

use crate::model::MemberId;
use crate::state::GroupState;
use crate::time::Timestamp;

/// Median with the midpoint convention for even lengths; `None` if empty.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberMessages {
    pub member_id: MemberId,
    pub messages: u64,
    /// `ln(messages + 1)`, so silent members stay in the model.
    pub log_messages: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageSummary {
    pub members: Vec<MemberMessages>,
    pub median_messages: Option<f64>,
    pub median_log_messages: Option<f64>,
}

fn in_window(t: Timestamp, from: Timestamp, until: Option<Timestamp>) -> bool {
    t >= from && until.is_none_or(|u| t < u)
}

/// Per-member message counts within `[epoch, until)`, in join order.
pub fn message_counts(state: &GroupState, until: Option<Timestamp>) -> Vec<(MemberId, u64)> {
    let epoch = state.config().epoch;
    state
        .members()
        .iter()
        .map(|m| {
            let n = m.post_times.iter().filter(|&&t| in_window(t, epoch, until)).count();
            (m.member_id.clone(), n as u64)
        })
        .collect()
}

pub fn log_message_summary(counts: &[(MemberId, u64)]) -> MessageSummary {
    let members: Vec<MemberMessages> = counts
        .iter()
        .map(|(id, n)| MemberMessages {
            member_id: id.clone(),
            messages: *n,
            log_messages: (*n as f64 + 1.0).ln(),
        })
        .collect();
    let raw: Vec<f64> = members.iter().map(|m| m.messages as f64).collect();
    let logs: Vec<f64> = members.iter().map(|m| m.log_messages).collect();
    MessageSummary {
        median_messages: median(&raw),
        median_log_messages: median(&logs),
        members,
    }
}

/// Flags each message (in log order) as a conversation start: the first
/// message, or one sent at least `gap` after the previous group message.
pub fn start_flags(times: &[Timestamp], gap: Duration) -> Vec<bool> {
    let mut prev: Option<Timestamp> = None;
    times
        .iter()
        .map(|&t| {
            let start = prev.is_none_or(|p| t - p >= gap);
            prev = Some(t);
            start
        })
        .collect()
}

/// Conversation starts per member within `[epoch, until)`, in join order.
pub fn conversation_starts(
    state: &GroupState,
    gap: Duration,
    until: Option<Timestamp>,
) -> Vec<(MemberId, u64)> {
    let epoch = state.config().epoch;
    let msgs: Vec<_> = state
        .messages()
        .iter()
        .filter(|m| in_window(m.sent_at, epoch, until))
        .collect();
    let times: Vec<Timestamp> = msgs.iter().map(|m| m.sent_at).collect();
    let flags = start_flags(&times, gap);
    state
        .members()
        .iter()
        .map(|member| {
            let n = msgs
                .iter()
                .zip(&flags)
                .filter(|(m, s)| **s && m.sender_id == member.member_id)
                .count();
            (member.member_id.clone(), n as u64)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodCounts {
    pub member_id: MemberId,
    pub counts: Vec<u64>,
    pub median: f64,
}

/// Messages per member per fixed-length period from the epoch. Only whole
/// or partial periods that start inside `[epoch, epoch + span)` are kept.
pub fn two_day_fulfillment(state: &GroupState, period: Duration, span: Duration) -> Vec<PeriodCounts> {
    let epoch = state.config().epoch;
    let pm = period.num_milliseconds().max(1);
    let periods = (span.num_milliseconds() + pm - 1) / pm;
    let until = epoch + span;
    state
        .members()
        .iter()
        .map(|m| {
            let mut counts = vec![0u64; periods as usize];
            for &t in &m.post_times {
                if in_window(t, epoch, Some(until)) {
                    counts[((t - epoch).num_milliseconds() / pm) as usize] += 1;
                }
            }
            let as_f: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
            PeriodCounts {
                member_id: m.member_id.clone(),
                median: median(&as_f).unwrap_or(0.0),
                counts,
            }
        })
        .collect()
}
