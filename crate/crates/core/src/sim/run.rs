use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use tokio::sync::mpsc::UnboundedReceiver;

use super::plan::{ExperimentPlan, GroupSpec};
use super::SimError;
use crate::api::{ApiError, Feed, PushEvent, Service, VirtualClock};
use crate::config::{Condition, GroupConfig};
use crate::model::{BannerState, MemberId, MessageId, MessageKind, ReactionKind};
use crate::notify::{NotificationSource, RuleId};
use crate::par::Exec;
use crate::state::GroupState;
use crate::store::{self, Event, EventRecord, Manifest, MANIFEST_FILE};
use crate::time::Timestamp;

pub const RUN_FILE: &str = "run.json";
pub const REPLY_PREFIX: &str = "reply to ";

/// Independent random streams per decision type, so that one kind of
/// decision firing more often in one arm does not shift the others.
#[derive(Clone, Copy)]
enum Stream {
    Fulfil = 0,
    Start = 1,
    Reply = 2,
    Reminder = 3,
    Ahead = 4,
}

struct Agent {
    id: MemberId,
    token: String,
    rx: UnboundedReceiver<PushEvent>,
    rngs: Vec<ChaCha8Rng>,
    last_post: Option<Timestamp>,
    posts: u32,
}

impl Agent {
    fn rng(&mut self, s: Stream) -> &mut ChaCha8Rng {
        &mut self.rngs[s as usize]
    }

    fn draw(&mut self, s: Stream, p: f64) -> bool {
        self.rng(s).random_bool(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Action {
    Fulfil { cycle_start: Timestamp },
    Start,
    ReminderPost,
    Reply { message_id: MessageId },
    Recommit,
    OpenApp,
}

struct Runner<'a> {
    plan: &'a ExperimentPlan,
    spec: &'a GroupSpec,
    clock: Arc<VirtualClock>,
    svc: Service,
    agents: Vec<Agent>,
    queue: BTreeMap<(Timestamp, u64), (usize, Action)>,
    queued: u64,
}

/// Rejections (e.g. a forfeited member acting) end that action only.
fn tolerate<T>(r: Result<T, ApiError>) -> Result<Option<T>, SimError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(ApiError::Rejected(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

impl<'a> Runner<'a> {
    fn new(plan: &'a ExperimentPlan, spec: &'a GroupSpec) -> Result<Self, SimError> {
        let clock = Arc::new(VirtualClock::new(plan.epoch));
        let svc = Service::new(clock.clone());
        svc.create_group(plan.group_config(spec))?;
        let mut agents = Vec::new();
        for i in 0..spec.members {
            let id: MemberId = format!("p{:02}", i + 1).as_str().into();
            let session = svc.join_group(&spec.group_id, &id, &format!("Participant {}", i + 1))?;
            let rx = svc.subscribe(&session.token)?;
            let rngs = (0..5)
                .map(|s| {
                    let mut r = ChaCha8Rng::seed_from_u64(spec.seed);
                    r.set_stream(i as u64 * 8 + s);
                    r
                })
                .collect();
            agents.push(Agent {
                id,
                token: session.token,
                rx,
                rngs,
                last_post: None,
                posts: 0,
            });
        }
        Ok(Runner {
            plan,
            spec,
            clock,
            svc,
            agents,
            queue: BTreeMap::new(),
            queued: 0,
        })
    }

    fn is_commit(&self) -> bool {
        self.spec.condition == Condition::Commit
    }

    fn schedule(&mut self, at: Timestamp, agent: usize, action: Action) {
        self.queued += 1;
        self.queue.insert((at, self.queued), (agent, action));
    }

    fn run(mut self) -> Result<GroupRun, SimError> {
        let plan = self.plan;
        let tick = plan.tick();
        let tick_ms = tick.num_milliseconds();
        let cfg = plan.group_config(self.spec);
        let cycle_ms = cfg.cycle_ms();
        let day_ms = crate::time::MS_PER_DAY;
        let ticks_in = |ms: i64| ((ms + tick_ms - 1) / tick_ms).max(1);

        if self.is_commit() {
            for a in &self.agents {
                self.svc.do_commit(&a.token, None, false)?;
            }
        }

        let end = plan.end();
        let mut t = plan.epoch;
        let (mut last_cycle, mut last_day) = (-1i64, -1i64);
        while t < end {
            self.clock.set(t);
            self.svc.tick()?;
            let offset = (t - plan.epoch).num_milliseconds();
            if offset / cycle_ms != last_cycle {
                last_cycle = offset / cycle_ms;
                let start = plan.epoch + chrono::Duration::milliseconds(last_cycle * cycle_ms);
                for i in 0..self.agents.len() {
                    let p = self.spec.policy.p_fulfill_spontaneous;
                    if self.agents[i].draw(Stream::Fulfil, p) {
                        let k = self.agents[i].rng(Stream::Fulfil).random_range(0..ticks_in(cycle_ms));
                        self.schedule(start + tick * k as i32, i, Action::Fulfil { cycle_start: start });
                    }
                }
            }
            if offset / day_ms != last_day {
                last_day = offset / day_ms;
                let start = plan.epoch + chrono::Duration::milliseconds(last_day * day_ms);
                for i in 0..self.agents.len() {
                    if self.agents[i].draw(Stream::Start, self.spec.policy.p_start) {
                        let k = self.agents[i].rng(Stream::Start).random_range(0..ticks_in(day_ms));
                        self.schedule(start + tick * k as i32, i, Action::Start);
                    }
                }
            }
            for i in 0..self.agents.len() {
                self.read_notifications(i, t);
            }
            while let Some(entry) = self.queue.first_entry() {
                if entry.key().0 > t {
                    break;
                }
                let (agent, action) = entry.remove();
                self.execute(agent, action, t)?;
            }
            t += tick;
        }
        self.clock.set(end);
        self.svc.tick()?;

        let (records, state) = self
            .svc
            .inspect(&self.spec.group_id, |log| (log.records().to_vec(), log.state().clone()))?;
        Ok(GroupRun {
            spec: self.spec.clone(),
            config: cfg,
            records,
            state,
        })
    }

    fn read_notifications(&mut self, i: usize, now: Timestamp) {
        let policy = &self.spec.policy;
        let mut due = Vec::new();
        let agent = &mut self.agents[i];
        while let Ok(ev) = agent.rx.try_recv() {
            let PushEvent::Event { record } = ev else { continue };
            let Event::Notification { rule_id, source, .. } = record.event else { continue };
            match rule_id {
                RuleId::NewMessage => {
                    if let Some(NotificationSource::MessageId(id)) = source {
                        if agent.draw(Stream::Reply, policy.p_reply) {
                            let mean = policy.reply_delay_mean_hours;
                            let hours: f64 = Exp::new(1.0 / mean)
                                .expect("positive rate")
                                .sample(agent.rng(Stream::Reply));
                            let ticks = (hours / self.plan.tick_hours as f64).ceil().max(1.0);
                            due.push((now + self.plan.tick() * ticks as i32, Action::Reply { message_id: id }));
                        }
                    }
                }
                RuleId::CommitLapsed
                | RuleId::CommitLapsedFullCycle
                | RuleId::CommitNewCycleMorning
                | RuleId::CommitLongAbsence => {
                    if agent.draw(Stream::Reminder, policy.p_commit_on_lapse) {
                        due.push((now, Action::Recommit));
                    }
                }
                RuleId::ControlNoCheck2d | RuleId::ControlNoCheck4d => {
                    if agent.draw(Stream::Reminder, policy.p_commit_on_lapse) {
                        due.push((now, Action::OpenApp));
                    }
                }
                RuleId::CommitUnfulfilledEnding
                | RuleId::ControlNoMessage2d
                | RuleId::ControlNoMessage4d => {
                    if agent.draw(Stream::Reminder, policy.p_post_on_reminder) {
                        due.push((now, Action::ReminderPost));
                    }
                }
                RuleId::ReactionToYourMessage => {}
            }
        }
        for (at, action) in due {
            self.schedule(at, i, action);
        }
    }

    /// Commits first when the member has no access: acting is how a
    /// lapsed member comes back.
    fn ensure_access(&mut self, i: usize) -> Result<bool, SimError> {
        if !self.is_commit() {
            return Ok(true);
        }
        let token = &self.agents[i].token;
        let Some(banner) = tolerate(self.svc.get_banner(token))? else {
            return Ok(false);
        };
        if banner == BannerState::NotCommitted {
            return Ok(tolerate(self.svc.do_commit(token, None, false))?.is_some());
        }
        Ok(true)
    }

    fn post(&mut self, i: usize, body: &str, now: Timestamp) -> Result<(), SimError> {
        if !self.ensure_access(i)? {
            return Ok(());
        }
        let token = self.agents[i].token.clone();
        let Some(msg) = tolerate(self.svc.send_message(&token, MessageKind::Text, body))? else {
            return Ok(());
        };
        let commit = self.is_commit();
        let agent = &mut self.agents[i];
        agent.last_post = Some(now);
        agent.posts += 1;
        if commit && agent.draw(Stream::Ahead, self.spec.policy.p_commit_ahead) {
            if agent.draw(Stream::Ahead, 0.5) {
                tolerate(self.svc.send_reaction(&token, msg.message_id, ReactionKind::CommitReaction))?;
            } else {
                tolerate(self.svc.do_commit(&token, None, false))?;
            }
        }
        Ok(())
    }

    fn start_body(&self, i: usize) -> String {
        let a = &self.agents[i];
        format!("start {} #{}", a.id, a.posts + 1)
    }

    fn execute(&mut self, i: usize, action: Action, now: Timestamp) -> Result<(), SimError> {
        match action {
            Action::Fulfil { cycle_start } => {
                if self.agents[i].last_post.is_some_and(|t| t >= cycle_start) {
                    return Ok(());
                }
                let body = self.start_body(i);
                self.post(i, &body, now)
            }
            Action::Start | Action::ReminderPost => {
                let body = self.start_body(i);
                self.post(i, &body, now)
            }
            Action::Reply { message_id } => {
                if !self.ensure_access(i)? {
                    return Ok(());
                }
                let token = self.agents[i].token.clone();
                let Some(feed) = tolerate(self.svc.get_feed(&token, 0))? else {
                    return Ok(());
                };
                let opener = matches!(&feed, Feed::Chat { .. })
                    && feed.messages().any(|r| match &r.event {
                        Event::Message { message_id: id, sender_id, body, .. } => {
                            *id == message_id
                                && *sender_id != self.agents[i].id
                                && !body.starts_with(REPLY_PREFIX)
                        }
                        _ => false,
                    });
                if opener {
                    self.post(i, &format!("{REPLY_PREFIX}{message_id}"), now)?;
                }
                Ok(())
            }
            Action::Recommit => {
                if self.ensure_access(i)? {
                    tolerate(self.svc.get_feed(&self.agents[i].token, 0))?;
                }
                Ok(())
            }
            Action::OpenApp => {
                tolerate(self.svc.get_feed(&self.agents[i].token, 0))?;
                Ok(())
            }
        }
    }
}

/// One simulated group's output.
#[derive(Debug, Clone)]
pub struct GroupRun {
    pub spec: GroupSpec,
    pub config: GroupConfig,
    pub records: Vec<EventRecord>,
    pub state: GroupState,
}

impl GroupRun {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_line());
            out.push('\n');
        }
        out
    }
}

/// Drives one group through the whole study. Deterministic in the spec.
pub fn run_group(plan: &ExperimentPlan, spec: &GroupSpec) -> Result<GroupRun, SimError> {
    Runner::new(plan, spec)?.run()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunGroupEntry {
    pub group_id: crate::model::GroupId,
    pub condition: Condition,
    pub seed: u64,
    pub members: u32,
    pub log_file: String,
    pub records: usize,
    pub messages: usize,
}

/// What a run produced, written next to the logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub plan: ExperimentPlan,
    pub groups: Vec<RunGroupEntry>,
}

#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub plan: ExperimentPlan,
    pub groups: Vec<GroupRun>,
}

impl ExperimentRun {
    pub fn states(&self) -> Vec<&GroupState> {
        self.groups.iter().map(|g| &g.state).collect()
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            groups: self.groups.iter().map(|g| g.config.clone()).collect(),
        }
    }

    pub fn run_manifest(&self) -> RunManifest {
        RunManifest {
            plan: self.plan.clone(),
            groups: self
                .groups
                .iter()
                .map(|g| RunGroupEntry {
                    group_id: g.spec.group_id.clone(),
                    condition: g.spec.condition,
                    seed: g.spec.seed,
                    members: g.spec.members,
                    log_file: format!("{}{}", g.spec.group_id, store::LOG_SUFFIX),
                    records: g.records.len(),
                    messages: g.state.messages().len(),
                })
                .collect(),
        }
    }

    /// Writes every log, the group manifest and the run manifest to `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), SimError> {
        std::fs::create_dir_all(dir).map_err(store::StoreError::from)?;
        for g in &self.groups {
            std::fs::write(store::log_path(dir, &g.spec.group_id), g.to_jsonl())
                .map_err(store::StoreError::from)?;
        }
        self.manifest().save(&dir.join(MANIFEST_FILE))?;
        let mut text = serde_json::to_string_pretty(&self.run_manifest()).map_err(store::StoreError::from)?;
        text.push('\n');
        std::fs::write(dir.join(RUN_FILE), text).map_err(store::StoreError::from)?;
        Ok(())
    }
}

/// Runs every group of the plan; groups are independent and are spread
/// according to `exec`. An invalid plan fails before anything runs.
pub fn run_experiment(plan: &ExperimentPlan, exec: Exec) -> Result<ExperimentRun, SimError> {
    plan.validate()?;
    let specs = plan.group_specs();
    run_specs(plan, &specs, exec)
}

/// Like [`run_experiment`] for an explicit list of groups.
pub fn run_specs(plan: &ExperimentPlan, specs: &[GroupSpec], exec: Exec) -> Result<ExperimentRun, SimError> {
    let groups = exec
        .map(specs, |s| run_group(plan, s))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ExperimentRun {
        plan: plan.clone(),
        groups,
    })
}
