//! The commitment state machine for one group.
//!
//! Every mutating operation validates against the current state, mutates
//! it, and hands back the [`Event`] that records the change. Replay feeds
//! logged events back through the same operations, so the live path and
//! the replay path share one set of rules.

use std::collections::{BTreeMap, HashMap};

use crate::config::{Condition, Enforcement, GroupConfig};
use crate::error::CommitError;
use crate::model::{
    BannerState, CommitVia, CommitmentRecord, CycleIndex, LedgerEntry, MemberId, MembershipView,
    Message, MessageId, MessageKind, ObscuredView, Reaction, ReactionId, ReactionKind,
};
use crate::notify::Notification;
use crate::store::Event;
use crate::time::{self, Timestamp};

/// Result of a state-machine operation: the domain value plus the event to
/// log, or `None` when the operation was an idempotent no-op.
#[derive(Debug, Clone, PartialEq)]
pub struct Applied<T> {
    pub value: T,
    pub event: Option<Event>,
}

impl<T> Applied<T> {
    fn logged(value: T, event: Event) -> Self {
        Applied {
            value,
            event: Some(event),
        }
    }
}

pub fn cycle_of(t: Timestamp, cfg: &GroupConfig) -> Result<CycleIndex, CommitError> {
    let offset = (t - cfg.epoch).num_milliseconds();
    if offset < 0 {
        return Err(CommitError::BeforeGroupStart);
    }
    Ok(CycleIndex((offset / cfg.cycle_ms()) as u32))
}

pub fn cycle_start(k: CycleIndex, cfg: &GroupConfig) -> Timestamp {
    cfg.epoch + chrono::Duration::milliseconds(k.0 as i64 * cfg.cycle_ms())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemberRecord {
    pub member_id: MemberId,
    pub display_name: String,
    pub joined_at: Timestamp,
    pub last_posted_at: Option<Timestamp>,
    pub messages_sent: u32,
    /// Send times, in log order.
    pub post_times: Vec<Timestamp>,
    /// App-open ("checked the group") times, in log order.
    pub open_times: Vec<Timestamp>,
}

impl MemberRecord {
    pub fn last_opened_at(&self) -> Option<Timestamp> {
        self.open_times.last().copied()
    }
}

/// (member, cycle) -> entry. Ordered so iteration is deterministic.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CommitmentLedger {
    entries: BTreeMap<(MemberId, CycleIndex), LedgerEntry>,
}

impl CommitmentLedger {
    pub fn get(&self, member: &MemberId, cycle: CycleIndex) -> Option<&LedgerEntry> {
        self.entries.get(&(member.clone(), cycle))
    }

    pub fn contains(&self, member: &MemberId, cycle: CycleIndex) -> bool {
        self.get(member, cycle).is_some()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MemberId, CycleIndex, &LedgerEntry)> {
        self.entries.iter().map(|((m, k), e)| (m, *k, e))
    }

    /// Entries for one member in cycle order.
    pub fn for_member<'a>(
        &'a self,
        member: &MemberId,
    ) -> impl DoubleEndedIterator<Item = (CycleIndex, &'a LedgerEntry)> + 'a {
        let lo = (member.clone(), CycleIndex(0));
        let hi = (member.clone(), CycleIndex(u32::MAX));
        self.entries.range(lo..=hi).map(|((_, k), e)| (*k, e))
    }

    /// Latest cycle at or before `at_or_before` the member committed to.
    pub fn last_committed(&self, member: &MemberId, at_or_before: CycleIndex) -> Option<CycleIndex> {
        let lo = (member.clone(), CycleIndex(0));
        let hi = (member.clone(), at_or_before);
        self.entries.range(lo..=hi).next_back().map(|((_, k), _)| *k)
    }

    fn insert(&mut self, member: MemberId, cycle: CycleIndex, entry: LedgerEntry) {
        self.entries.insert((member, cycle), entry);
    }

    fn get_mut(&mut self, member: &MemberId, cycle: CycleIndex) -> Option<&mut LedgerEntry> {
        self.entries.get_mut(&(member.clone(), cycle))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupState {
    config: GroupConfig,
    created: bool,
    members: Vec<MemberRecord>,
    index: HashMap<MemberId, usize>,
    ledger: CommitmentLedger,
    messages: Vec<Message>,
    reactions: Vec<Reaction>,
    notifications: Vec<Notification>,
    app_opens: usize,
}

impl GroupState {
    pub fn new(config: GroupConfig) -> Self {
        GroupState {
            config,
            created: false,
            members: Vec::new(),
            index: HashMap::new(),
            ledger: CommitmentLedger::default(),
            messages: Vec::new(),
            reactions: Vec::new(),
            notifications: Vec::new(),
            app_opens: 0,
        }
    }

    pub fn config(&self) -> &GroupConfig {
        &self.config
    }

    pub fn is_created(&self) -> bool {
        self.created
    }

    pub fn members(&self) -> &[MemberRecord] {
        &self.members
    }

    pub fn member(&self, id: &MemberId) -> Option<&MemberRecord> {
        self.index.get(id).map(|&i| &self.members[i])
    }

    pub fn ledger(&self) -> &CommitmentLedger {
        &self.ledger
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn message(&self, id: MessageId) -> Option<&Message> {
        (id.0 as usize)
            .checked_sub(1)
            .and_then(|i| self.messages.get(i))
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn notifications(&self) -> &[Notification] {
        &self.notifications
    }

    pub fn app_open_count(&self) -> usize {
        self.app_opens
    }

    pub fn cycle_of(&self, t: Timestamp) -> Result<CycleIndex, CommitError> {
        cycle_of(t, &self.config)
    }

    pub fn cycle_start(&self, k: CycleIndex) -> Timestamp {
        cycle_start(k, &self.config)
    }

    /// Fraction of the cycle containing `at` that has elapsed, in [0, 1).
    pub fn elapsed_fraction(&self, at: Timestamp) -> Result<f64, CommitError> {
        let k = self.cycle_of(at)?;
        let into = (at - self.cycle_start(k)).num_milliseconds() as f64;
        Ok(into / self.config.cycle_ms() as f64)
    }

    pub fn record(&self, member: &MemberId, cycle: CycleIndex) -> Option<CommitmentRecord> {
        self.ledger.get(member, cycle).map(|e| CommitmentRecord {
            member_id: member.clone(),
            cycle,
            committed_at: e.committed_at,
            via: e.via,
            null_commit: e.null_commit,
            messages_sent: e.messages_sent,
            fulfilled: e.fulfilled(self.config.expectation_count),
        })
    }

    pub fn fulfilled(&self, member: &MemberId, cycle: CycleIndex) -> bool {
        self.ledger
            .get(member, cycle)
            .is_some_and(|e| e.fulfilled(self.config.expectation_count))
    }

    /// When the member was removed under `FORFEIT_AFTER_N`, if ever: the end
    /// of the N-th consecutive committed-but-unfulfilled cycle.
    pub fn forfeited_at(&self, member: &MemberId) -> Option<Timestamp> {
        let Enforcement::ForfeitAfterN { cycles } = self.config.enforcement else {
            return None;
        };
        let expectation = self.config.expectation_count;
        let mut run = 0u32;
        let mut prev: Option<CycleIndex> = None;
        for (k, entry) in self.ledger.for_member(member) {
            let missed = !entry.fulfilled(expectation);
            let contiguous = prev.is_some_and(|p| p.next() == k);
            run = match (missed, contiguous) {
                (false, _) => 0,
                (true, true) => run + 1,
                (true, false) => 1,
            };
            prev = Some(k);
            if run >= cycles {
                return Some(self.cycle_start(k.next()));
            }
        }
        None
    }

    pub fn is_forfeited(&self, member: &MemberId, at: Timestamp) -> bool {
        self.forfeited_at(member).is_some_and(|t| t <= at)
    }

    /// Whether the member held a commitment for the cycle containing `at`,
    /// made no later than `at`.
    pub fn committed_as_of(&self, member: &MemberId, at: Timestamp) -> bool {
        match self.cycle_of(at) {
            Ok(k) => self
                .ledger
                .get(member, k)
                .is_some_and(|e| e.committed_at <= at),
            Err(_) => false,
        }
    }

    pub fn can_read(&self, member: &MemberId, at: Timestamp) -> Result<bool, CommitError> {
        self.require_member(member)?;
        self.cycle_of(at)?;
        if self.is_forfeited(member, at) {
            return Ok(false);
        }
        match self.config.condition {
            Condition::Control => Ok(true),
            Condition::Commit => Ok(self.committed_as_of(member, at)),
        }
    }

    pub fn banner_state(&self, member: &MemberId, at: Timestamp) -> Result<BannerState, CommitError> {
        let rec = self.require_member(member)?;
        if self.config.condition == Condition::Control {
            let days = rec
                .last_posted_at
                .map(|p| ((at - p).num_milliseconds().max(0) / time::MS_PER_DAY) as u32)
                .unwrap_or(0);
            return Ok(BannerState::ControlDaysSincePost { days });
        }
        let k = self.cycle_of(at)?;
        if self.is_forfeited(member, at) {
            return Ok(BannerState::NotCommitted);
        }
        let Some(entry) = self.ledger.get(member, k) else {
            return Ok(BannerState::NotCommitted);
        };
        if entry.fulfilled(self.config.expectation_count) {
            if self.ledger.contains(member, k.next()) {
                Ok(BannerState::CommittedFulfilledRenewed)
            } else {
                Ok(BannerState::CommittedFulfilledNoRenewal)
            }
        } else if self.elapsed_fraction(at)? >= self.config.urgency_fraction {
            Ok(BannerState::CommittedUnfulfilledUrgent)
        } else {
            Ok(BannerState::CommittedUnfulfilled)
        }
    }

    pub fn currently_committed(&self, member: &MemberId, at: Timestamp) -> bool {
        self.committed_as_of(member, at) && !self.is_forfeited(member, at)
    }

    /// One row per joined (and not forfeited) member, in join order.
    pub fn membership_view(&self, at: Timestamp) -> Vec<MembershipView> {
        self.members
            .iter()
            .filter(|m| m.joined_at <= at && !self.is_forfeited(&m.member_id, at))
            .map(|m| MembershipView {
                member_id: m.member_id.clone(),
                display_name: m.display_name.clone(),
                last_posted_at: m.last_posted_at,
                currently_committed: self.currently_committed(&m.member_id, at),
            })
            .collect()
    }

    pub fn committed_member_count(&self, at: Timestamp) -> usize {
        self.membership_view(at)
            .iter()
            .filter(|v| v.currently_committed)
            .count()
    }

    pub fn obscured_view(&self, at: Timestamp) -> ObscuredView {
        ObscuredView {
            group_name: self.config.name.clone(),
            committed_member_count: self.committed_member_count(at),
        }
    }

    /// Members the auto-renew pass would carry into cycle `k` at its start.
    pub fn auto_renewals(&self, k: CycleIndex) -> Vec<MemberId> {
        if !self.config.auto_renew || self.config.condition != Condition::Commit {
            return Vec::new();
        }
        let Some(prev) = k.prev() else {
            return Vec::new();
        };
        let at = self.cycle_start(k);
        self.members
            .iter()
            .map(|m| &m.member_id)
            .filter(|m| self.ledger.contains(m, prev) && !self.ledger.contains(m, k))
            .filter(|m| !self.is_forfeited(m, at))
            .cloned()
            .collect()
    }

    fn require_member(&self, member: &MemberId) -> Result<&MemberRecord, CommitError> {
        self.member(member)
            .ok_or_else(|| CommitError::UnknownMember(member.clone()))
    }

    fn require_created(&self) -> Result<(), CommitError> {
        if self.created {
            Ok(())
        } else {
            Err(CommitError::Inconsistent("group has not been created".into()))
        }
    }

    /// Checks shared by every member-initiated operation.
    fn require_active(&self, member: &MemberId, at: Timestamp) -> Result<CycleIndex, CommitError> {
        self.require_created()?;
        let k = self.cycle_of(at)?;
        self.require_member(member)?;
        if self.is_forfeited(member, at) {
            return Err(CommitError::RejectForfeited(member.clone()));
        }
        Ok(k)
    }

    pub fn create(&mut self) -> Result<Applied<()>, CommitError> {
        if self.created {
            return Err(CommitError::Inconsistent("group already created".into()));
        }
        self.created = true;
        Ok(Applied::logged(
            (),
            Event::GroupCreated {
                config: self.config.clone(),
            },
        ))
    }

    pub fn join(
        &mut self,
        member: &MemberId,
        display_name: &str,
        at: Timestamp,
    ) -> Result<Applied<()>, CommitError> {
        self.require_created()?;
        self.cycle_of(at)?;
        if self.index.contains_key(member) {
            return Err(CommitError::AlreadyJoined(member.clone()));
        }
        self.index.insert(member.clone(), self.members.len());
        self.members.push(MemberRecord {
            member_id: member.clone(),
            display_name: display_name.to_string(),
            joined_at: at,
            last_posted_at: None,
            messages_sent: 0,
            post_times: Vec::new(),
            open_times: Vec::new(),
        });
        Ok(Applied::logged(
            (),
            Event::MemberJoined {
                member_id: member.clone(),
                display_name: display_name.to_string(),
            },
        ))
    }

    pub fn commit(
        &mut self,
        member: &MemberId,
        target: CycleIndex,
        via: CommitVia,
        null_commit: bool,
        at: Timestamp,
    ) -> Result<Applied<CommitmentRecord>, CommitError> {
        let current = self.require_active(member, at)?;
        if self.config.condition != Condition::Commit {
            return Err(CommitError::RejectWrongCondition);
        }
        if target < current {
            return Err(CommitError::RejectPastCycle { target, current });
        }
        let limit = self.config.commit_ahead_limit;
        if target.0 as u64 > current.0 as u64 + limit as u64 {
            return Err(CommitError::RejectAheadLimit {
                target,
                current,
                limit,
            });
        }
        if let Some(existing) = self.record(member, target) {
            return Ok(Applied {
                value: existing,
                event: None,
            });
        }
        if null_commit && !self.config.null_commit_allowed {
            return Err(CommitError::RejectNullNotAllowed);
        }
        if via == CommitVia::AutoRenew && (!self.config.auto_renew || target != current) {
            return Err(CommitError::Inconsistent(
                "auto-renewal outside a renewing group's boundary".into(),
            ));
        }
        self.ledger.insert(
            member.clone(),
            target,
            LedgerEntry {
                committed_at: at,
                via,
                null_commit,
                messages_sent: 0,
            },
        );
        let record = self.record(member, target).expect("just inserted");
        Ok(Applied::logged(
            record,
            Event::Commit {
                member_id: member.clone(),
                cycle: target,
                via,
                null_commit,
            },
        ))
    }

    pub fn post_message(
        &mut self,
        member: &MemberId,
        kind: MessageKind,
        body: &str,
        at: Timestamp,
    ) -> Result<Applied<Message>, CommitError> {
        let k = self.require_active(member, at)?;
        if self.config.condition == Condition::Commit && !self.ledger.contains(member, k) {
            return Err(CommitError::RejectNotCommitted(member.clone()));
        }
        if let Some(entry) = self.ledger.get_mut(member, k) {
            entry.messages_sent += 1;
        }
        let rec = &mut self.members[self.index[member]];
        rec.last_posted_at = Some(at);
        rec.messages_sent += 1;
        rec.post_times.push(at);
        let message = Message {
            message_id: MessageId(self.messages.len() as u64 + 1),
            sender_id: member.clone(),
            sent_at: at,
            kind,
            body: body.to_string(),
        };
        self.messages.push(message.clone());
        let event = Event::Message {
            message_id: message.message_id,
            sender_id: member.clone(),
            kind,
            body: body.to_string(),
        };
        Ok(Applied::logged(message, event))
    }

    /// Earliest cycle in the allowed window the member has not committed to.
    pub fn next_uncommitted_cycle(&self, member: &MemberId, at: Timestamp) -> Option<CycleIndex> {
        let current = self.cycle_of(at).ok()?;
        (0..=self.config.commit_ahead_limit)
            .map(|d| CycleIndex(current.0 + d))
            .find(|&k| !self.ledger.contains(member, k))
    }

    pub fn react(
        &mut self,
        member: &MemberId,
        message_id: MessageId,
        kind: ReactionKind,
        at: Timestamp,
    ) -> Result<Applied<Reaction>, CommitError> {
        self.require_active(member, at)?;
        self.message(message_id)
            .filter(|m| m.sent_at <= at)
            .ok_or(CommitError::UnknownMessage(message_id))?;
        if !self.can_read(member, at)? {
            return Err(CommitError::RejectNotCommitted(member.clone()));
        }
        let commit_cycle = match (&kind, self.config.condition) {
            (ReactionKind::CommitReaction, Condition::Commit) => {
                self.next_uncommitted_cycle(member, at)
            }
            _ => None,
        };
        if let Some(k) = commit_cycle {
            self.commit(member, k, CommitVia::Reaction, false, at)?;
        }
        let reaction = Reaction {
            reaction_id: ReactionId(self.reactions.len() as u64 + 1),
            message_id,
            reactor_id: member.clone(),
            kind: kind.clone(),
            at,
            commit_cycle,
        };
        self.reactions.push(reaction.clone());
        let event = Event::Reaction {
            reaction_id: reaction.reaction_id,
            message_id,
            reactor_id: member.clone(),
            reaction: kind,
            commit_cycle,
        };
        Ok(Applied::logged(reaction, event))
    }

    pub fn open_app(&mut self, member: &MemberId, at: Timestamp) -> Result<Applied<()>, CommitError> {
        self.require_created()?;
        self.cycle_of(at)?;
        self.require_member(member)?;
        let i = self.index[member];
        self.members[i].open_times.push(at);
        self.app_opens += 1;
        Ok(Applied::logged(
            (),
            Event::AppOpen {
                member_id: member.clone(),
            },
        ))
    }

    pub fn record_notification(&mut self, n: Notification) -> Result<Applied<()>, CommitError> {
        self.require_created()?;
        self.require_member(&n.member_id)?;
        let event = n.to_event();
        self.notifications.push(n);
        Ok(Applied::logged((), event))
    }

    /// Checks the parts of a logged event that the operation itself assigns
    /// (ids, commit targets), before anything is mutated.
    fn precheck(&self, at: Timestamp, event: &Event) -> Result<(), CommitError> {
        let mismatch = |what: &str| Err(CommitError::Inconsistent(what.to_string()));
        match event {
            Event::GroupCreated { config } if *config != self.config => {
                mismatch("logged config differs from manifest")
            }
            Event::Commit {
                member_id, cycle, ..
            } if self.ledger.contains(member_id, *cycle) => mismatch("duplicate commitment"),
            Event::Message { message_id, .. } if message_id.0 != self.messages.len() as u64 + 1 => {
                mismatch("message id out of sequence")
            }
            Event::Reaction {
                reaction_id,
                reactor_id,
                reaction,
                commit_cycle,
                ..
            } => {
                if reaction_id.0 != self.reactions.len() as u64 + 1 {
                    return mismatch("reaction id out of sequence");
                }
                let expected = match (reaction, self.config.condition) {
                    (ReactionKind::CommitReaction, Condition::Commit) => {
                        self.next_uncommitted_cycle(reactor_id, at)
                    }
                    _ => None,
                };
                if expected != *commit_cycle {
                    return mismatch("commitment reaction targets the wrong cycle");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Applies a logged event, re-running the operation that produced it and
    /// checking it reproduces the same event. A rejected event leaves the
    /// state untouched.
    pub fn apply(&mut self, at: Timestamp, event: &Event) -> Result<(), CommitError> {
        self.precheck(at, event)?;
        let produced = match event {
            Event::GroupCreated { .. } => self.create()?.event,
            Event::MemberJoined {
                member_id,
                display_name,
            } => self.join(member_id, display_name, at)?.event,
            Event::Commit {
                member_id,
                cycle,
                via,
                null_commit,
            } => self.commit(member_id, *cycle, *via, *null_commit, at)?.event,
            Event::Message {
                sender_id,
                kind,
                body,
                ..
            } => self.post_message(sender_id, *kind, body, at)?.event,
            Event::Reaction {
                message_id,
                reactor_id,
                reaction,
                ..
            } => self.react(reactor_id, *message_id, reaction.clone(), at)?.event,
            Event::Notification {
                member_id,
                rule_id,
                rendered_text,
                content_visible,
                source,
            } => {
                let n = Notification {
                    group_id: self.config.group_id.clone(),
                    member_id: member_id.clone(),
                    rule_id: *rule_id,
                    fired_at: at,
                    rendered_text: rendered_text.clone(),
                    content_visible: *content_visible,
                    source: *source,
                };
                self.record_notification(n)?.event
            }
            Event::AppOpen { member_id } => self.open_app(member_id, at)?.event,
        };
        match produced {
            Some(p) if &p == event => Ok(()),
            Some(p) => Err(CommitError::Inconsistent(format!(
                "logged {} does not match replay ({:?})",
                event.kind_name(),
                p
            ))),
            None => Err(CommitError::Inconsistent(format!(
                "logged {} is a duplicate",
                event.kind_name()
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Condition;
    use crate::time::{from_millis, hours};

    fn epoch() -> Timestamp {
        from_millis(1_704_067_200_000) // 2024-01-01T00:00:00Z
    }

    fn group(condition: Condition) -> GroupState {
        let mut g = GroupState::new(GroupConfig::new("g", "g", condition, epoch()));
        g.create().unwrap();
        for m in ["ana", "bo", "cy", "di", "ed"] {
            g.join(&m.into(), m, epoch()).unwrap();
        }
        g
    }

    fn at_h(h: i64) -> Timestamp {
        epoch() + hours(h)
    }

    fn ana() -> MemberId {
        "ana".into()
    }

    #[test]
    fn cycle_of_examples() {
        let cfg = GroupConfig::new("g", "g", Condition::Commit, epoch());
        assert_eq!(cycle_of(epoch(), &cfg).unwrap(), CycleIndex(0));
        assert_eq!(cycle_of(at_h(72), &cfg).unwrap(), CycleIndex(1));
        assert_eq!(cycle_of(at_h(21 * 24), &cfg).unwrap(), CycleIndex(10));
        assert_eq!(cycle_of(at_h(48) - hours(0) - chrono::Duration::milliseconds(1), &cfg).unwrap(), CycleIndex(0));
        assert_eq!(cycle_of(at_h(-1), &cfg), Err(CommitError::BeforeGroupStart));
    }

    #[test]
    fn commit_examples() {
        let mut g = group(Condition::Commit);
        let t = at_h(3 * 48 + 5);
        let rec = g.commit(&ana(), CycleIndex(3), CommitVia::Button, false, t).unwrap();
        assert_eq!((rec.value.cycle, rec.value.via), (CycleIndex(3), CommitVia::Button));
        assert!(rec.event.is_some());
        let ahead = g.commit(&ana(), CycleIndex(4), CommitVia::Button, false, t).unwrap();
        assert_eq!(ahead.value.cycle, CycleIndex(4));
        assert!(matches!(
            g.commit(&ana(), CycleIndex(5), CommitVia::Button, false, t),
            Err(CommitError::RejectAheadLimit { .. })
        ));
        assert!(matches!(
            g.commit(&ana(), CycleIndex(2), CommitVia::Button, false, t),
            Err(CommitError::RejectPastCycle { .. })
        ));
        let dup = g.commit(&ana(), CycleIndex(3), CommitVia::Button, false, t + hours(1)).unwrap();
        assert!(dup.event.is_none());
        assert_eq!(dup.value.committed_at, t);
    }

    #[test]
    fn control_rejects_commit_and_always_reads() {
        let mut g = group(Condition::Control);
        assert_eq!(
            g.commit(&ana(), CycleIndex(0), CommitVia::Button, false, at_h(1)),
            Err(CommitError::RejectWrongCondition)
        );
        assert!(g.can_read(&ana(), at_h(100)).unwrap());
        g.post_message(&ana(), MessageKind::Text, "hi", at_h(2)).unwrap();
        assert!(g.ledger().is_empty());
    }

    #[test]
    fn can_read_follows_current_cycle() {
        let mut g = group(Condition::Commit);
        g.commit(&ana(), CycleIndex(0), CommitVia::Button, false, at_h(1)).unwrap();
        assert!(g.can_read(&ana(), at_h(47)).unwrap());
        assert!(!g.can_read(&ana(), at_h(48)).unwrap());
        assert!(matches!(g.can_read(&"zed".into(), at_h(1)), Err(CommitError::UnknownMember(_))));
    }

    #[test]
    fn post_message_gating_and_fulfillment() {
        let mut g = group(Condition::Commit);
        assert_eq!(
            g.post_message(&ana(), MessageKind::Text, "x", at_h(1)),
            Err(CommitError::RejectNotCommitted(ana()))
        );
        g.commit(&ana(), CycleIndex(0), CommitVia::Button, false, at_h(1)).unwrap();
        assert!(!g.fulfilled(&ana(), CycleIndex(0)));
        let m = g.post_message(&ana(), MessageKind::Text, "x", at_h(2)).unwrap().value;
        assert_eq!(m.message_id, MessageId(1));
        assert!(g.fulfilled(&ana(), CycleIndex(0)));
        g.post_message(&ana(), MessageKind::Image, "img://1", at_h(3)).unwrap();
        let rec = g.record(&ana(), CycleIndex(0)).unwrap();
        assert_eq!(rec.messages_sent, 2);
        assert!(rec.fulfilled);
        assert_eq!(g.member(&ana()).unwrap().last_posted_at, Some(at_h(3)));
    }

    #[test]
    fn reaction_examples() {
        let mut g = group(Condition::Commit);
        let bo: MemberId = "bo".into();
        let t = at_h(3 * 48 + 1);
        g.commit(&bo, CycleIndex(3), CommitVia::Button, false, t).unwrap();
        let msg = g.post_message(&bo, MessageKind::Text, "hello", t).unwrap().value;
        g.commit(&ana(), CycleIndex(3), CommitVia::Button, false, t).unwrap();

        let like = g
            .react(&ana(), msg.message_id, ReactionKind::Emoji { tag: "like".into() }, t)
            .unwrap();
        assert_eq!(like.value.commit_cycle, None);
        assert!(!g.ledger().contains(&ana(), CycleIndex(4)));

        let r = g.react(&ana(), msg.message_id, ReactionKind::CommitReaction, t).unwrap();
        assert_eq!(r.value.commit_cycle, Some(CycleIndex(4)));
        assert_eq!(g.record(&ana(), CycleIndex(4)).unwrap().via, CommitVia::Reaction);

        let again = g.react(&ana(), msg.message_id, ReactionKind::CommitReaction, t).unwrap();
        assert_eq!(again.value.commit_cycle, None);
        assert_eq!(g.reactions().len(), 3);
        assert!(!g.fulfilled(&ana(), CycleIndex(3)));
    }

    #[test]
    fn banner_states() {
        let mut g = group(Condition::Commit);
        assert_eq!(g.banner_state(&ana(), at_h(1)).unwrap(), BannerState::NotCommitted);
        g.commit(&ana(), CycleIndex(0), CommitVia::Button, false, at_h(1)).unwrap();
        assert_eq!(g.banner_state(&ana(), at_h(35)).unwrap(), BannerState::CommittedUnfulfilled);
        assert_eq!(g.banner_state(&ana(), at_h(36)).unwrap(), BannerState::CommittedUnfulfilledUrgent);
        assert_eq!(g.banner_state(&ana(), at_h(40)).unwrap(), BannerState::CommittedUnfulfilledUrgent);
        g.post_message(&ana(), MessageKind::Text, "x", at_h(41)).unwrap();
        assert_eq!(g.banner_state(&ana(), at_h(41)).unwrap(), BannerState::CommittedFulfilledNoRenewal);
        g.commit(&ana(), CycleIndex(1), CommitVia::Button, false, at_h(42)).unwrap();
        assert_eq!(g.banner_state(&ana(), at_h(42)).unwrap(), BannerState::CommittedFulfilledRenewed);

        let mut c = group(Condition::Control);
        assert_eq!(c.banner_state(&ana(), at_h(5)).unwrap(), BannerState::ControlDaysSincePost { days: 0 });
        c.post_message(&ana(), MessageKind::Text, "x", at_h(10)).unwrap();
        assert_eq!(
            c.banner_state(&ana(), at_h(10 + 72)).unwrap(),
            BannerState::ControlDaysSincePost { days: 3 }
        );
    }

    #[test]
    fn membership_view_rows() {
        let mut g = group(Condition::Commit);
        g.commit(&ana(), CycleIndex(0), CommitVia::Button, false, at_h(1)).unwrap();
        g.commit(&"cy".into(), CycleIndex(0), CommitVia::Button, false, at_h(1)).unwrap();
        let view = g.membership_view(at_h(2));
        assert_eq!(view.len(), 5);
        assert_eq!(view.iter().filter(|v| v.currently_committed).count(), 2);
        assert!(view.iter().all(|v| v.last_posted_at.is_none()));
        assert_eq!(view[0].member_id, ana());
        let m = g.post_message(&ana(), MessageKind::Text, "x", at_h(3)).unwrap().value;
        assert_eq!(g.membership_view(at_h(3))[0].last_posted_at, Some(m.sent_at));
    }

    #[test]
    fn null_commit_needs_opt_in() {
        let mut g = group(Condition::Commit);
        assert_eq!(
            g.commit(&ana(), CycleIndex(0), CommitVia::Button, true, at_h(1)),
            Err(CommitError::RejectNullNotAllowed)
        );
        let mut cfg = g.config().clone();
        cfg.null_commit_allowed = true;
        let mut g = GroupState::new(cfg);
        g.create().unwrap();
        g.join(&ana(), "ana", epoch()).unwrap();
        g.commit(&ana(), CycleIndex(0), CommitVia::Button, true, at_h(1)).unwrap();
        assert!(g.can_read(&ana(), at_h(2)).unwrap());
        assert!(g.fulfilled(&ana(), CycleIndex(0)));
    }

    #[test]
    fn forfeit_after_two_missed_cycles() {
        let mut cfg = GroupConfig::new("g", "g", Condition::Commit, epoch());
        cfg.enforcement = Enforcement::ForfeitAfterN { cycles: 2 };
        let mut g = GroupState::new(cfg);
        g.create().unwrap();
        g.join(&ana(), "ana", epoch()).unwrap();
        g.join(&"bo".into(), "bo", epoch()).unwrap();
        g.commit(&ana(), CycleIndex(0), CommitVia::Button, false, at_h(1)).unwrap();
        g.commit(&ana(), CycleIndex(1), CommitVia::Button, false, at_h(49)).unwrap();
        assert!(!g.is_forfeited(&ana(), at_h(95)));
        assert!(g.is_forfeited(&ana(), at_h(96)));
        assert_eq!(g.membership_view(at_h(96)).len(), 1);
        assert_eq!(
            g.commit(&ana(), CycleIndex(2), CommitVia::Button, false, at_h(97)),
            Err(CommitError::RejectForfeited(ana()))
        );
        // nothing is deleted
        assert_eq!(g.ledger().len(), 2);
    }

    #[test]
    fn mid_cycle_commit_restores_access_without_penalty() {
        let mut g = group(Condition::Commit);
        g.commit(&ana(), CycleIndex(0), CommitVia::Button, false, at_h(1)).unwrap();
        g.post_message(&ana(), MessageKind::Text, "x", at_h(2)).unwrap();
        assert!(!g.can_read(&ana(), at_h(60)).unwrap());
        let rec = g.commit(&ana(), CycleIndex(1), CommitVia::Button, false, at_h(80)).unwrap().value;
        assert!(!rec.fulfilled);
        assert!(g.can_read(&ana(), at_h(80)).unwrap());
        assert_eq!(g.messages().len(), 1);
    }

    #[test]
    fn apply_rejects_mismatched_ids() {
        let mut g = group(Condition::Control);
        let bad = Event::Message {
            message_id: MessageId(9),
            sender_id: ana(),
            kind: MessageKind::Text,
            body: "x".into(),
        };
        let before = g.clone();
        assert!(matches!(g.apply(at_h(1), &bad), Err(CommitError::Inconsistent(_))));
        assert_eq!(g, before);
    }
}
