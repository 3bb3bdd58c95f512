use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::mpsc::{unbounded_channel, UnboundedReceiver, UnboundedSender};

use super::clock::Clock;
use super::push::PushEvent;
use crate::config::GroupConfig;
use crate::error::CommitError;
use crate::model::{
    BannerState, CommitVia, CommitmentRecord, CycleIndex, GroupId, MemberId, MembershipView,
    Message, MessageId, MessageKind, ObscuredView, Reaction, ReactionKind,
};
use crate::notify::{self, NotificationSource};
use crate::state::GroupState;
use crate::store::{Event, EventRecord, GroupLog, StoreError};
use crate::time::Timestamp;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("invalid or expired session token")]
    Unauthorized,
    #[error("unknown group {0}")]
    UnknownGroup(GroupId),
    #[error("group {0} already exists")]
    GroupExists(GroupId),
    #[error(transparent)]
    Rejected(#[from] CommitError),
    #[error(transparent)]
    Store(StoreError),
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Rejected(c) => ApiError::Rejected(c),
            other => ApiError::Store(other),
        }
    }
}

impl ApiError {
    pub fn code(&self) -> &'static str {
        match self {
            ApiError::Unauthorized => "UNAUTHORIZED",
            ApiError::UnknownGroup(_) => "UNKNOWN_GROUP",
            ApiError::GroupExists(_) => "GROUP_EXISTS",
            ApiError::Rejected(e) => e.code(),
            ApiError::Store(_) => "STORE_ERROR",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub token: String,
    pub member_id: MemberId,
    pub group_id: GroupId,
}

/// What `get_feed` returns: the chat, or the obscured shell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "view", rename_all = "snake_case")]
pub enum Feed {
    Chat {
        /// MESSAGE and REACTION records after the requested seq.
        items: Vec<EventRecord>,
        head_seq: u64,
    },
    Obscured(ObscuredView),
}

impl Feed {
    pub fn is_obscured(&self) -> bool {
        matches!(self, Feed::Obscured(_))
    }

    pub fn messages(&self) -> impl Iterator<Item = &EventRecord> {
        let items: &[EventRecord] = match self {
            Feed::Chat { items, .. } => items,
            Feed::Obscured(_) => &[],
        };
        items
            .iter()
            .filter(|r| matches!(r.event, Event::Message { .. }))
    }
}

struct Subscriber {
    member_id: MemberId,
    tx: UnboundedSender<PushEvent>,
    last_banner: Option<BannerState>,
}

struct GroupRuntime {
    log: GroupLog,
    /// Reminders with trigger times before this have been emitted.
    notified_until: Timestamp,
    subscribers: Vec<Subscriber>,
}

impl GroupRuntime {
    fn new(log: GroupLog, now: Timestamp) -> Self {
        let epoch = log.config().epoch;
        let from = log.head_time().unwrap_or(now).max(epoch);
        GroupRuntime {
            log,
            notified_until: from,
            subscribers: Vec::new(),
        }
    }

    fn state(&self) -> &GroupState {
        self.log.state()
    }

    /// The instant a request is served at: the clock, but never behind the
    /// log head.
    fn effective_now(&self, clock: Timestamp) -> Timestamp {
        clock.max(self.notified_until)
    }

    /// Emits reminders and cycle-boundary work up to `now`.
    fn advance(&mut self, now: Timestamp) -> Result<(), ApiError> {
        let mut t = self.notified_until;
        while t < now {
            let k = self.state().cycle_of(t)?;
            let boundary = self.state().cycle_start(k.next());
            let seg_end = boundary.min(now);
            for n in notify::reminders_due(self.state(), t, seg_end) {
                self.record_notification(n)?;
            }
            if seg_end == boundary {
                self.start_cycle(k.next(), boundary)?;
            }
            t = seg_end;
        }
        self.notified_until = self.notified_until.max(now);
        self.refresh_banners(now);
        Ok(())
    }

    fn start_cycle(&mut self, k: CycleIndex, at: Timestamp) -> Result<(), ApiError> {
        for m in self.state().auto_renewals(k) {
            self.log
                .execute(at, |s| s.commit(&m, k, CommitVia::AutoRenew, false, at))?;
        }
        self.broadcast(|_| Some(PushEvent::CycleStarted { cycle: k, at }));
        Ok(())
    }

    fn record_notification(&mut self, n: notify::Notification) -> Result<(), ApiError> {
        let at = n.fired_at;
        let member = n.member_id.clone();
        let (_, seq) = self.log.execute(at, |s| s.record_notification(n))?;
        if seq.is_some() {
            let record = self.log.records().last().expect("just appended").clone();
            self.broadcast(|sub| (sub.member_id == member).then(|| PushEvent::Event { record: record.clone() }));
        }
        Ok(())
    }

    fn broadcast(&mut self, mut f: impl FnMut(&Subscriber) -> Option<PushEvent>) {
        self.subscribers.retain(|s| !s.tx.is_closed());
        for sub in &self.subscribers {
            if let Some(ev) = f(sub) {
                let _ = sub.tx.send(ev);
            }
        }
    }

    /// Fans out a freshly appended message or reaction with content gating,
    /// then emits the activity notifications it causes.
    fn publish(&mut self, source: NotificationSource) -> Result<(), ApiError> {
        let record = self.log.records().last().expect("just appended").clone();
        let at = record.at;
        let state = self.log.state();
        let visible: HashMap<MemberId, bool> = self
            .subscribers
            .iter()
            .map(|s| (s.member_id.clone(), state.can_read(&s.member_id, at).unwrap_or(false)))
            .collect();
        self.broadcast(|sub| match (&record.event, visible[&sub.member_id]) {
            (_, true) => Some(PushEvent::Event { record: record.clone() }),
            (Event::Message { message_id, sender_id, .. }, false) => Some(PushEvent::GatedMessage {
                seq: record.seq,
                at,
                message_id: *message_id,
                sender_id: sender_id.clone(),
            }),
            _ => None,
        });
        for n in notify::activity_notifications(self.state(), source) {
            self.record_notification(n)?;
        }
        Ok(())
    }

    fn refresh_banners(&mut self, now: Timestamp) {
        self.subscribers.retain(|s| !s.tx.is_closed());
        let state = self.log.state();
        for sub in &mut self.subscribers {
            if let Ok(b) = state.banner_state(&sub.member_id, now) {
                if sub.last_banner != Some(b) {
                    sub.last_banner = Some(b);
                    let _ = sub.tx.send(PushEvent::BannerChanged { banner: b });
                }
            }
        }
    }
}

/// The request/response surface plus push streams, over any [`Clock`].
///
/// Mutations on one group are serialized by that group's lock, in log
/// order; different groups proceed independently.
pub struct Service {
    clock: Arc<dyn Clock>,
    groups: RwLock<BTreeMap<GroupId, Arc<Mutex<GroupRuntime>>>>,
    sessions: RwLock<HashMap<String, Session>>,
}

impl Service {
    pub fn new(clock: Arc<dyn Clock>) -> Self {
        Service {
            clock,
            groups: RwLock::new(BTreeMap::new()),
            sessions: RwLock::new(HashMap::new()),
        }
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    /// Creates an in-memory group log at the current time.
    pub fn create_group(&self, config: GroupConfig) -> Result<(), ApiError> {
        let now = self.now();
        let log = GroupLog::create(config, now)?;
        self.add_group(log)
    }

    /// Serves an existing (possibly file-backed) log.
    pub fn add_group(&self, log: GroupLog) -> Result<(), ApiError> {
        let id = log.config().group_id.clone();
        let mut groups = self.groups.write().expect("groups lock");
        if groups.contains_key(&id) {
            return Err(ApiError::GroupExists(id));
        }
        let rt = GroupRuntime::new(log, self.now());
        groups.insert(id, Arc::new(Mutex::new(rt)));
        Ok(())
    }

    pub fn group_ids(&self) -> Vec<GroupId> {
        self.groups.read().expect("groups lock").keys().cloned().collect()
    }

    fn group(&self, id: &GroupId) -> Result<Arc<Mutex<GroupRuntime>>, ApiError> {
        self.groups
            .read()
            .expect("groups lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::UnknownGroup(id.clone()))
    }

    pub fn session(&self, token: &str) -> Result<Session, ApiError> {
        self.sessions
            .read()
            .expect("sessions lock")
            .get(token)
            .cloned()
            .ok_or(ApiError::Unauthorized)
    }

    /// Runs `f` on a group after bringing it up to the current time.
    fn with_group<T>(
        &self,
        id: &GroupId,
        f: impl FnOnce(&mut GroupRuntime, Timestamp) -> Result<T, ApiError>,
    ) -> Result<T, ApiError> {
        let group = self.group(id)?;
        let mut rt = group.lock().expect("group lock");
        let now = rt.effective_now(self.clock.now());
        rt.advance(now)?;
        let out = f(&mut rt, now)?;
        rt.refresh_banners(now);
        Ok(out)
    }

    fn with_session<T>(
        &self,
        token: &str,
        f: impl FnOnce(&mut GroupRuntime, &Session, Timestamp) -> Result<T, ApiError>,
    ) -> Result<T, ApiError> {
        let session = self.session(token)?;
        self.with_group(&session.group_id, |rt, now| f(rt, &session, now))
    }

    /// Joins (or re-authenticates) a member and issues a session token.
    pub fn join_group(
        &self,
        group: &GroupId,
        member: &MemberId,
        display_name: &str,
    ) -> Result<Session, ApiError> {
        self.with_group(group, |rt, now| {
            if rt.state().member(member).is_none() {
                rt.log.execute(now, |s| s.join(member, display_name, now))?;
            }
            Ok(())
        })?;
        let session = Session {
            token: uuid::Uuid::new_v4().simple().to_string(),
            member_id: member.clone(),
            group_id: group.clone(),
        };
        self.sessions
            .write()
            .expect("sessions lock")
            .insert(session.token.clone(), session.clone());
        Ok(session)
    }

    /// Opening the feed counts as checking the group. Access is decided at
    /// request time, never cached in the session.
    pub fn get_feed(&self, token: &str, since_seq: u64) -> Result<Feed, ApiError> {
        self.with_session(token, |rt, s, now| {
            rt.log.execute(now, |st| st.open_app(&s.member_id, now))?;
            let state = rt.state();
            if !state.can_read(&s.member_id, now)? {
                return Ok(Feed::Obscured(state.obscured_view(now)));
            }
            let records = rt.log.records();
            let from = records.partition_point(|r| r.seq <= since_seq);
            let items = records[from..]
                .iter()
                .filter(|r| matches!(r.event, Event::Message { .. } | Event::Reaction { .. }))
                .cloned()
                .collect();
            Ok(Feed::Chat {
                items,
                head_seq: rt.log.head_seq(),
            })
        })
    }

    /// Commits for `target_cycle`, or for the earliest open cycle in the
    /// allowed window when not given.
    pub fn do_commit(
        &self,
        token: &str,
        target_cycle: Option<CycleIndex>,
        null_commit: bool,
    ) -> Result<CommitmentRecord, ApiError> {
        self.with_session(token, |rt, s, now| {
            let state = rt.state();
            let target = match target_cycle {
                Some(k) => k,
                None => state
                    .next_uncommitted_cycle(&s.member_id, now)
                    .unwrap_or(state.cycle_of(now)?),
            };
            let (rec, _) = rt
                .log
                .execute(now, |st| st.commit(&s.member_id, target, CommitVia::Button, null_commit, now))?;
            Ok(rec)
        })
    }

    pub fn send_message(&self, token: &str, kind: MessageKind, body: &str) -> Result<Message, ApiError> {
        self.with_session(token, |rt, s, now| {
            let (msg, seq) = rt
                .log
                .execute(now, |st| st.post_message(&s.member_id, kind, body, now))?;
            if seq.is_some() {
                rt.publish(NotificationSource::MessageId(msg.message_id))?;
            }
            Ok(msg)
        })
    }

    pub fn send_reaction(
        &self,
        token: &str,
        message_id: MessageId,
        kind: ReactionKind,
    ) -> Result<Reaction, ApiError> {
        self.with_session(token, |rt, s, now| {
            let (reaction, seq) = rt
                .log
                .execute(now, |st| st.react(&s.member_id, message_id, kind, now))?;
            if seq.is_some() {
                rt.publish(NotificationSource::ReactionId(reaction.reaction_id))?;
            }
            Ok(reaction)
        })
    }

    pub fn get_members(&self, token: &str) -> Result<Vec<MembershipView>, ApiError> {
        self.with_session(token, |rt, _, now| Ok(rt.state().membership_view(now)))
    }

    pub fn get_banner(&self, token: &str) -> Result<BannerState, ApiError> {
        self.with_session(token, |rt, s, now| Ok(rt.state().banner_state(&s.member_id, now)?))
    }

    /// The member's in-app notification list, oldest first.
    pub fn get_notifications(&self, token: &str) -> Result<Vec<notify::Notification>, ApiError> {
        self.with_session(token, |rt, s, _| {
            Ok(rt
                .state()
                .notifications()
                .iter()
                .filter(|n| n.member_id == s.member_id)
                .cloned()
                .collect())
        })
    }

    /// Opens the session's push stream. The current banner is sent first.
    pub fn subscribe(&self, token: &str) -> Result<UnboundedReceiver<PushEvent>, ApiError> {
        let (tx, rx) = unbounded_channel();
        self.with_session(token, |rt, s, _| {
            rt.subscribers.push(Subscriber {
                member_id: s.member_id.clone(),
                tx,
                last_banner: None,
            });
            Ok(())
        })?;
        Ok(rx)
    }

    /// Brings every group up to the current time: reminders, cycle starts,
    /// auto-renewals, banner pushes.
    pub fn tick(&self) -> Result<(), ApiError> {
        for id in self.group_ids() {
            self.with_group(&id, |_, _| Ok(()))?;
        }
        Ok(())
    }

    /// Read access to a group's log.
    pub fn inspect<T>(&self, group: &GroupId, f: impl FnOnce(&GroupLog) -> T) -> Result<T, ApiError> {
        let g = self.group(group)?;
        let rt = g.lock().expect("group lock");
        Ok(f(&rt.log))
    }
}
