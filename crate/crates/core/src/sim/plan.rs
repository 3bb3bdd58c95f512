use chrono::Duration;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::config::{Condition, Enforcement, GroupConfig};
use crate::model::GroupId;
use crate::time::{self, Timestamp};

/// How a scripted member behaves. The defaults are illustrative: nothing
/// measured them on people.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentPolicy {
    /// Re-commit after a lapse reminder.
    pub p_commit_on_lapse: f64,
    /// After posting in a committed cycle, also commit for the next one.
    pub p_commit_ahead: f64,
    /// Per cycle: post once, unprompted, at a uniformly random hour.
    pub p_fulfill_spontaneous: f64,
    /// Post after a "you have not contributed" style reminder.
    pub p_post_on_reminder: f64,
    /// Reply to another member's conversation-opening message.
    pub p_reply: f64,
    /// Per day: open a new conversation at a random hour.
    pub p_start: f64,
    /// Mean of the exponential reply delay.
    pub reply_delay_mean_hours: f64,
}

impl Default for AgentPolicy {
    fn default() -> Self {
        AgentPolicy::responsive()
    }
}

impl AgentPolicy {
    pub fn responsive() -> Self {
        AgentPolicy {
            p_commit_on_lapse: 0.8,
            p_commit_ahead: 0.3,
            p_fulfill_spontaneous: 0.1,
            p_post_on_reminder: 0.6,
            p_reply: 0.2,
            p_start: 0.02,
            reply_delay_mean_hours: 3.0,
        }
    }

    /// Does nothing on its own.
    pub fn inert() -> Self {
        AgentPolicy {
            p_commit_on_lapse: 0.0,
            p_commit_ahead: 0.0,
            p_fulfill_spontaneous: 0.0,
            p_post_on_reminder: 0.0,
            p_reply: 0.0,
            p_start: 0.0,
            reply_delay_mean_hours: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let probs = [
            ("p_commit_on_lapse", self.p_commit_on_lapse),
            ("p_commit_ahead", self.p_commit_ahead),
            ("p_fulfill_spontaneous", self.p_fulfill_spontaneous),
            ("p_post_on_reminder", self.p_post_on_reminder),
            ("p_reply", self.p_reply),
            ("p_start", self.p_start),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::InvalidPlan(format!("{name} = {p} is not a probability")));
            }
        }
        if !(self.reply_delay_mean_hours.is_finite() && self.reply_delay_mean_hours > 0.0) {
            return Err(SimError::InvalidPlan("reply_delay_mean_hours must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmPlan {
    pub condition: Condition,
    pub groups: u32,
    #[serde(default)]
    pub policy: AgentPolicy,
}

/// Mechanism knobs applied to every simulated group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroupSettings {
    pub cycle_hours: u32,
    pub commit_ahead_limit: u32,
    pub null_commit_allowed: bool,
    pub auto_renew: bool,
    pub enforcement: Enforcement,
}

impl Default for GroupSettings {
    fn default() -> Self {
        GroupSettings {
            cycle_hours: 48,
            commit_ahead_limit: 1,
            null_commit_allowed: false,
            auto_renew: false,
            enforcement: Enforcement::SocialOnly,
        }
    }
}

fn default_epoch() -> Timestamp {
    time::parse("2024-03-04T00:00:00.000Z").expect("valid literal")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub seed: u64,
    #[serde(default = "ExperimentPlan::default_study_days")]
    pub study_days: u32,
    #[serde(default = "ExperimentPlan::default_tick_hours")]
    pub tick_hours: u32,
    #[serde(default = "ExperimentPlan::default_members_min")]
    pub members_min: u32,
    #[serde(default = "ExperimentPlan::default_members_max")]
    pub members_max: u32,
    #[serde(default = "default_epoch", with = "time::wire")]
    pub epoch: Timestamp,
    #[serde(default)]
    pub group: GroupSettings,
    pub arms: Vec<ArmPlan>,
}

impl ExperimentPlan {
    fn default_study_days() -> u32 {
        21
    }
    fn default_tick_hours() -> u32 {
        1
    }
    fn default_members_min() -> u32 {
        4
    }
    fn default_members_max() -> u32 {
        5
    }

    /// A COMMIT and a CONTROL arm of equal size sharing one policy.
    pub fn paired(seed: u64, groups_per_arm: u32, policy: AgentPolicy) -> Self {
        ExperimentPlan {
            seed,
            study_days: Self::default_study_days(),
            tick_hours: Self::default_tick_hours(),
            members_min: Self::default_members_min(),
            members_max: Self::default_members_max(),
            epoch: default_epoch(),
            group: GroupSettings::default(),
            arms: vec![
                ArmPlan {
                    condition: Condition::Commit,
                    groups: groups_per_arm,
                    policy: policy.clone(),
                },
                ArmPlan {
                    condition: Condition::Control,
                    groups: groups_per_arm,
                    policy,
                },
            ],
        }
    }

    pub fn tick(&self) -> Duration {
        time::hours(self.tick_hours as i64)
    }

    pub fn end(&self) -> Timestamp {
        self.epoch + time::days(self.study_days as i64)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidPlan(m.to_string()));
        if self.arms.is_empty() {
            return bad("plan has no arms");
        }
        if self.study_days == 0 {
            return bad("study_days must be positive");
        }
        if self.tick_hours == 0 {
            return bad("tick_hours must be positive");
        }
        if self.members_min == 0 || self.members_min > self.members_max {
            return bad("need 1 <= members_min <= members_max");
        }
        for (i, arm) in self.arms.iter().enumerate() {
            arm.policy.validate()?;
            if self.arms[..i].iter().any(|a| a.condition == arm.condition) {
                return bad("at most one arm per condition");
            }
        }
        self.group_specs()
            .iter()
            .try_for_each(|s| self.group_config(s).validate())
            .map_err(|e| SimError::InvalidPlan(e.to_string()))
    }

    /// One spec per simulated group. Group `i` of every arm gets the same
    /// seed and size, so arms are matched.
    pub fn group_specs(&self) -> Vec<GroupSpec> {
        let mut specs = Vec::new();
        for arm in &self.arms {
            for i in 0..arm.groups {
                let seed = derive_seed(self.seed, i as u64);
                let span = (self.members_max - self.members_min + 1) as u64;
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                let members = self.members_min + (r.next_u64() % span) as u32;
                specs.push(GroupSpec {
                    group_id: format!("{}-{:02}", arm.condition.as_str().to_lowercase(), i).as_str().into(),
                    condition: arm.condition,
                    index: i,
                    seed,
                    members,
                    policy: arm.policy.clone(),
                });
            }
        }
        specs
    }

    pub fn group_config(&self, spec: &GroupSpec) -> GroupConfig {
        let name = format!("Group {} ({})", spec.index + 1, spec.condition.as_str().to_lowercase());
        let mut cfg = GroupConfig::new(spec.group_id.clone(), name, spec.condition, self.epoch);
        cfg.cycle_hours = self.group.cycle_hours;
        cfg.commit_ahead_limit = self.group.commit_ahead_limit;
        cfg.null_commit_allowed = self.group.null_commit_allowed;
        cfg.auto_renew = self.group.auto_renew;
        cfg.enforcement = self.group.enforcement;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub group_id: GroupId,
    pub condition: Condition,
    pub index: u32,
    pub seed: u64,
    pub members: u32,
    pub policy: AgentPolicy,
}

/// Independent seed for item `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut r = ChaCha8Rng::seed_from_u64(master);
    r.set_stream(index);
    r.next_u64()
}
