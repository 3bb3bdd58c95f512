//! Reminder and activity notifications.
//!
//! Reminder rules come in condition pairs: each commitment reminder has a
//! control-condition counterpart fired on the same cadence, so both arms
//! of an experiment are nudged equally often and only the framing differs.
//! Two table rows have no counterpart, and the long-absence reminder is a
//! one-shot outside the table.
//!
//! Everything here is a pure function of the group state and a time
//! window. Triggers are evaluated "as of" their firing instant, so the same
//! answer comes back whether the state is live or a later replay.

use std::collections::HashMap;

use chrono::{Duration, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Condition;
use crate::model::{CycleIndex, GroupId, MemberId, MessageId, ReactionId};
use crate::state::{GroupState, MemberRecord};
use crate::store::Event;
use crate::time::{self, Timestamp};

pub const GROUP_PLACEHOLDER: &str = "[group name]";
const ACTOR_PLACEHOLDER: &str = "[member]";
const BODY_PLACEHOLDER: &str = "[message]";

/// Consecutive fully lapsed cycles that count as a long absence.
pub const LONG_ABSENCE_CYCLES: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleId {
    /// Cycle ended without a commitment for the next one.
    CommitLapsed,
    /// Lapsed for one full further cycle.
    CommitLapsedFullCycle,
    /// Morning of a new cycle while lapsed.
    CommitNewCycleMorning,
    /// Cycle close to ending, committed but nothing sent.
    CommitUnfulfilledEnding,
    /// One-shot after several lapsed cycles.
    CommitLongAbsence,
    ControlNoCheck2d,
    ControlNoCheck4d,
    ControlNoMessage2d,
    ControlNoMessage4d,
    NewMessage,
    ReactionToYourMessage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RuleCondition {
    Commit,
    Control,
    Both,
}

impl RuleCondition {
    pub fn applies_to(self, c: Condition) -> bool {
        matches!(
            (self, c),
            (RuleCondition::Both, _)
                | (RuleCondition::Commit, Condition::Commit)
                | (RuleCondition::Control, Condition::Control)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pairing {
    /// Same table row, other condition.
    PairedWith(RuleId),
    /// Table row whose other-condition cell is empty.
    Unmatched,
    /// Not a reminder table row.
    NotInTable,
}

#[derive(Debug, Clone, Copy)]
pub struct NotificationRule {
    pub id: RuleId,
    pub condition: RuleCondition,
    pub trigger: &'static str,
    pub text_template: &'static str,
    /// Firings per trigger episode.
    pub max_fires: u32,
    pub pairing: Pairing,
}

pub static RULES: [NotificationRule; 11] = [
    NotificationRule {
        id: RuleId::CommitLapsed,
        condition: RuleCondition::Commit,
        trigger: "end of a cycle the member was committed for, with no commitment for the next",
        text_template: "Your commitment to [group name] has lapsed! Make sure to come back and re-commit so you can continue seeing content.",
        max_fires: 1,
        pairing: Pairing::PairedWith(RuleId::ControlNoCheck2d),
    },
    NotificationRule {
        id: RuleId::CommitLapsedFullCycle,
        condition: RuleCondition::Commit,
        trigger: "end of a full cycle spent lapsed",
        text_template: "Your commitment to [group name] has been lapsed for a cycle. Do you want to recommit?",
        max_fires: 1,
        pairing: Pairing::PairedWith(RuleId::ControlNoCheck4d),
    },
    NotificationRule {
        id: RuleId::CommitNewCycleMorning,
        condition: RuleCondition::Commit,
        trigger: "first local morning of a new cycle while lapsed",
        text_template: "A new commitment cycle is starting! Make sure to come back and re-commit so you can continue seeing content in [group name] has lapsed!",
        max_fires: 1,
        pairing: Pairing::Unmatched,
    },
    NotificationRule {
        id: RuleId::CommitUnfulfilledEnding,
        condition: RuleCondition::Commit,
        trigger: "urgency fraction of a committed cycle elapsed without fulfillment",
        text_template: "The commitment period for [group name] is close to ending and you have not contributed yet. Come back and share your thoughts!",
        max_fires: 1,
        pairing: Pairing::PairedWith(RuleId::ControlNoMessage2d),
    },
    NotificationRule {
        id: RuleId::CommitLongAbsence,
        condition: RuleCondition::Commit,
        trigger: "third consecutive fully lapsed cycle completed",
        text_template: "We miss you in [group name]! Your spot is still here whenever you want to re-commit and catch up.",
        max_fires: 1,
        pairing: Pairing::NotInTable,
    },
    NotificationRule {
        id: RuleId::ControlNoCheck2d,
        condition: RuleCondition::Control,
        trigger: "two days without opening the group",
        text_template: "You haven\u{2019}t checked [group name] in several days! Come back and check out what you've missed.",
        max_fires: 1,
        pairing: Pairing::PairedWith(RuleId::CommitLapsed),
    },
    NotificationRule {
        id: RuleId::ControlNoCheck4d,
        condition: RuleCondition::Control,
        trigger: "four days without opening the group",
        text_template: "It\u{2019}s been a while since you've visited [group name]! Come back and check out what you've missed.",
        max_fires: 1,
        pairing: Pairing::PairedWith(RuleId::CommitLapsedFullCycle),
    },
    NotificationRule {
        id: RuleId::ControlNoMessage2d,
        condition: RuleCondition::Control,
        trigger: "two days without messaging",
        text_template: "You haven\u{2019}t messaged in [group name] since several days ago. Come back and catch up!",
        max_fires: 1,
        pairing: Pairing::PairedWith(RuleId::CommitUnfulfilledEnding),
    },
    NotificationRule {
        id: RuleId::ControlNoMessage4d,
        condition: RuleCondition::Control,
        trigger: "four days without messaging",
        text_template: "You haven\u{2019}t messaged in [group name] since several days ago. Come back and catch up!",
        max_fires: 1,
        pairing: Pairing::Unmatched,
    },
    NotificationRule {
        id: RuleId::NewMessage,
        condition: RuleCondition::Both,
        trigger: "another member posted",
        text_template: "[member] in [group name]: [message]",
        max_fires: 1,
        pairing: Pairing::NotInTable,
    },
    NotificationRule {
        id: RuleId::ReactionToYourMessage,
        condition: RuleCondition::Both,
        trigger: "another member reacted to your message",
        text_template: "[member] reacted to your message in [group name]",
        max_fires: 1,
        pairing: Pairing::NotInTable,
    },
];

/// Text for a new-message notification whose recipient cannot read the chat.
const NEW_MESSAGE_HIDDEN: &str = "[member] posted in [group name]. Commit to see what they said.";

pub fn rule(id: RuleId) -> &'static NotificationRule {
    RULES.iter().find(|r| r.id == id).expect("every rule id has a table entry")
}

impl RuleId {
    pub fn is_reminder(self) -> bool {
        !matches!(self, RuleId::NewMessage | RuleId::ReactionToYourMessage)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NotifyError {
    #[error("rule {rule:?} does not apply to {condition} groups")]
    ConditionMismatch { rule: RuleId, condition: Condition },
    #[error("rule {0:?} is event-driven and needs an actor")]
    NeedsActor(RuleId),
}

/// Fills the group placeholder of a reminder rule.
pub fn render(id: RuleId, group_name: &str, condition: Condition) -> Result<String, NotifyError> {
    let r = rule(id);
    if !r.condition.applies_to(condition) {
        return Err(NotifyError::ConditionMismatch {
            rule: id,
            condition,
        });
    }
    if !id.is_reminder() {
        return Err(NotifyError::NeedsActor(id));
    }
    Ok(r.text_template.replace(GROUP_PLACEHOLDER, group_name))
}

/// Text for event-driven rules. `body` is `None` when the recipient may not
/// see the content.
pub fn render_activity(id: RuleId, group_name: &str, actor: &str, body: Option<&str>) -> String {
    let template = match (id, body) {
        (RuleId::NewMessage, None) => NEW_MESSAGE_HIDDEN,
        _ => rule(id).text_template,
    };
    template
        .replace(GROUP_PLACEHOLDER, group_name)
        .replace(ACTOR_PLACEHOLDER, actor)
        .replace(BODY_PLACEHOLDER, body.unwrap_or(""))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotificationSource {
    MessageId(MessageId),
    ReactionId(ReactionId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Notification {
    pub group_id: GroupId,
    pub member_id: MemberId,
    pub rule_id: RuleId,
    #[serde(with = "time::wire")]
    pub fired_at: Timestamp,
    pub rendered_text: String,
    pub content_visible: bool,
    pub source: Option<NotificationSource>,
}

impl Notification {
    pub fn to_event(&self) -> Event {
        Event::Notification {
            member_id: self.member_id.clone(),
            rule_id: self.rule_id,
            rendered_text: self.rendered_text.clone(),
            content_visible: self.content_visible,
            source: self.source,
        }
    }
}

/// Every notification whose trigger time falls in `[start, end)`, ordered by
/// (time, member join order, rule, source).
pub fn due_notifications(state: &GroupState, start: Timestamp, end: Timestamp) -> Vec<Notification> {
    let mut out = reminders_due(state, start, end);
    for m in state.messages() {
        if m.sent_at >= start && m.sent_at < end {
            out.extend(activity_notifications(state, NotificationSource::MessageId(m.message_id)));
        }
    }
    for r in state.reactions() {
        if r.at >= start && r.at < end {
            out.extend(activity_notifications(state, NotificationSource::ReactionId(r.reaction_id)));
        }
    }
    sort(state, &mut out);
    out
}

fn sort(state: &GroupState, out: &mut [Notification]) {
    let order: HashMap<&MemberId, usize> = state
        .members()
        .iter()
        .enumerate()
        .map(|(i, m)| (&m.member_id, i))
        .collect();
    out.sort_by(|a, b| {
        (a.fired_at, order.get(&a.member_id), a.rule_id, a.source).cmp(&(
            b.fired_at,
            order.get(&b.member_id),
            b.rule_id,
            b.source,
        ))
    });
}

/// Notifications caused by one message or reaction, stamped with its time.
pub fn activity_notifications(state: &GroupState, source: NotificationSource) -> Vec<Notification> {
    let cfg = state.config();
    let eligible = |m: &MemberRecord, at: Timestamp| m.joined_at <= at && !state.is_forfeited(&m.member_id, at);
    let display = |id: &MemberId| {
        state
            .member(id)
            .map(|m| m.display_name.clone())
            .unwrap_or_else(|| id.to_string())
    };
    match source {
        NotificationSource::MessageId(id) => {
            let Some(msg) = state.message(id) else {
                return Vec::new();
            };
            let sender = display(&msg.sender_id);
            state
                .members()
                .iter()
                .filter(|m| m.member_id != msg.sender_id && eligible(m, msg.sent_at))
                .map(|m| {
                    let visible = state.can_read(&m.member_id, msg.sent_at).unwrap_or(false);
                    Notification {
                        group_id: cfg.group_id.clone(),
                        member_id: m.member_id.clone(),
                        rule_id: RuleId::NewMessage,
                        fired_at: msg.sent_at,
                        rendered_text: render_activity(
                            RuleId::NewMessage,
                            &cfg.name,
                            &sender,
                            visible.then_some(msg.body.as_str()),
                        ),
                        content_visible: visible,
                        source: Some(source),
                    }
                })
                .collect()
        }
        NotificationSource::ReactionId(id) => {
            let Some(reaction) = state.reactions().get((id.0 as usize).wrapping_sub(1)) else {
                return Vec::new();
            };
            let Some(msg) = state.message(reaction.message_id) else {
                return Vec::new();
            };
            let Some(author) = state.member(&msg.sender_id) else {
                return Vec::new();
            };
            if author.member_id == reaction.reactor_id || !eligible(author, reaction.at) {
                return Vec::new();
            }
            let visible = state.can_read(&author.member_id, reaction.at).unwrap_or(false);
            vec![Notification {
                group_id: cfg.group_id.clone(),
                member_id: author.member_id.clone(),
                rule_id: RuleId::ReactionToYourMessage,
                fired_at: reaction.at,
                rendered_text: render_activity(
                    RuleId::ReactionToYourMessage,
                    &cfg.name,
                    &display(&reaction.reactor_id),
                    None,
                ),
                content_visible: visible,
                source: Some(source),
            }]
        }
    }
}

/// Time-triggered reminder rules only.
pub fn reminders_due(state: &GroupState, start: Timestamp, end: Timestamp) -> Vec<Notification> {
    let mut out = Vec::new();
    if start >= end {
        return out;
    }
    let cfg = state.config();
    let start = start.max(cfg.epoch);
    if start >= end {
        return out;
    }
    let mut push = |member: &MemberRecord, id: RuleId, at: Timestamp| {
        if member.joined_at > at || state.is_forfeited(&member.member_id, at) {
            return;
        }
        out.push(Notification {
            group_id: cfg.group_id.clone(),
            member_id: member.member_id.clone(),
            rule_id: id,
            fired_at: at,
            rendered_text: render(id, &cfg.name, cfg.condition).expect("rule matches condition"),
            content_visible: false,
            source: None,
        });
    };
    match cfg.condition {
        Condition::Commit => {
            let view = CommitView { state, window_start: start };
            let first = state.cycle_of(start).expect("start clamped to epoch");
            let last = state.cycle_of(end).expect("end after start");
            for c in first.0..=last.0 {
                let c = CycleIndex(c);
                let cycle_start = state.cycle_start(c);
                let urgent_at = cycle_start
                    + Duration::milliseconds((cfg.cycle_ms() as f64 * cfg.urgency_fraction).ceil() as i64);
                let morning = morning_of(state, c);
                for member in state.members() {
                    let m = &member.member_id;
                    if c.0 >= 1 && in_window(cycle_start, start, end) {
                        let had = |k: u32| view.committed(m, CycleIndex(k), cycle_start);
                        let now = had(c.0);
                        if !now && had(c.0 - 1) {
                            push(member, RuleId::CommitLapsed, cycle_start);
                        }
                        if c.0 >= 2 && !now && !had(c.0 - 1) && had(c.0 - 2) {
                            push(member, RuleId::CommitLapsedFullCycle, cycle_start);
                        }
                        let n = LONG_ABSENCE_CYCLES;
                        if c.0 > n && had(c.0 - n - 1) && (c.0 - n..=c.0).all(|k| !had(k)) {
                            push(member, RuleId::CommitLongAbsence, cycle_start);
                        }
                    }
                    if let Some(t) = morning.filter(|&t| c.0 >= 1 && in_window(t, start, end)) {
                        let lapsed = !view.committed(m, c, t)
                            && (0..c.0).any(|k| view.committed(m, CycleIndex(k), t));
                        if lapsed {
                            push(member, RuleId::CommitNewCycleMorning, t);
                        }
                    }
                    if in_window(urgent_at, start, end) && view.committed(m, c, urgent_at) {
                        let null = state.ledger().get(m, c).is_some_and(|e| e.null_commit);
                        let sent = member
                            .post_times
                            .iter()
                            .filter(|&&p| p >= cycle_start && p < urgent_at)
                            .count() as u32;
                        if !null && sent < cfg.expectation_count {
                            push(member, RuleId::CommitUnfulfilledEnding, urgent_at);
                        }
                    }
                }
            }
        }
        Condition::Control => {
            let two = time::days(2);
            let four = time::days(4);
            for member in state.members() {
                let rules = [
                    (&member.open_times, RuleId::ControlNoCheck2d, RuleId::ControlNoCheck4d),
                    (&member.post_times, RuleId::ControlNoMessage2d, RuleId::ControlNoMessage4d),
                ];
                for (times, short, long) in rules {
                    for (anchor, next) in idle_episodes(member.joined_at, times) {
                        for (gap, id) in [(two, short), (four, long)] {
                            let t = anchor + gap;
                            if in_window(t, start, end) && next.is_none_or(|n| t < n) {
                                push(member, id, t);
                            }
                        }
                    }
                }
            }
        }
    }
    sort(state, &mut out);
    out
}

fn in_window(t: Timestamp, start: Timestamp, end: Timestamp) -> bool {
    t >= start && t < end
}

/// (episode start, next activity) pairs: the join and each activity open an
/// idle episode that the following activity closes.
fn idle_episodes(joined: Timestamp, times: &[Timestamp]) -> Vec<(Timestamp, Option<Timestamp>)> {
    let mut anchors = Vec::with_capacity(times.len() + 1);
    anchors.push(joined);
    anchors.extend(times.iter().copied().filter(|&t| t >= joined));
    anchors
        .iter()
        .enumerate()
        .map(|(i, &a)| (a, anchors.get(i + 1).copied()))
        .collect()
}

/// First configured local morning hour at or after the cycle start, if it
/// falls inside the cycle.
pub fn morning_of(state: &GroupState, c: CycleIndex) -> Option<Timestamp> {
    let cfg = state.config();
    let offset = Duration::minutes(cfg.utc_offset_minutes as i64);
    let start = state.cycle_start(c);
    let local = start + offset;
    let local_morning = local
        .date_naive()
        .and_hms_opt(cfg.morning_hour, 0, 0)
        .expect("validated hour")
        .and_utc();
    let mut t = local_morning - offset;
    if t < start {
        t += time::days(1);
    }
    debug_assert_eq!((t + offset).hour(), cfg.morning_hour);
    (t < state.cycle_start(c.next())).then_some(t)
}

/// Ledger lookups as of an instant, with pending auto-renewals projected for
/// boundaries at or after the window start.
struct CommitView<'a> {
    state: &'a GroupState,
    window_start: Timestamp,
}

impl CommitView<'_> {
    fn committed(&self, m: &MemberId, k: CycleIndex, as_of: Timestamp) -> bool {
        match self.state.ledger().get(m, k) {
            Some(e) => e.committed_at <= as_of,
            None => {
                let cfg = self.state.config();
                let boundary = self.state.cycle_start(k);
                cfg.auto_renew
                    && k.0 >= 1
                    && boundary >= self.window_start
                    && boundary <= as_of
                    && !self.state.is_forfeited(m, boundary)
                    && self.committed(m, CycleIndex(k.0 - 1), boundary)
            }
        }
    }
}
