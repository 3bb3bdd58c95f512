//! Per-group mechanism knobs.

use chrono::Duration;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::model::GroupId;
use crate::time::{self, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Condition {
    Commit,
    Control,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Commit => "COMMIT",
            Condition::Control => "CONTROL",
        }
    }
}

impl std::str::FromStr for Condition {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "COMMIT" => Ok(Condition::Commit),
            "CONTROL" => Ok(Condition::Control),
            other => Err(ConfigError::UnknownCondition(other.to_string())),
        }
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What happens to members who keep committing without fulfilling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "policy", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Enforcement {
    /// No technical consequence; peers' disapproval is the only cost.
    #[default]
    SocialOnly,
    /// Removed from the group after `cycles` consecutive unfulfilled commitments.
    ForfeitAfterN { cycles: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupConfig {
    pub group_id: GroupId,
    pub name: String,
    pub condition: Condition,
    #[serde(default = "defaults::cycle_hours")]
    pub cycle_hours: u32,
    #[serde(default = "defaults::expectation_count")]
    pub expectation_count: u32,
    #[serde(default = "defaults::commit_ahead_limit")]
    pub commit_ahead_limit: u32,
    #[serde(default)]
    pub null_commit_allowed: bool,
    #[serde(default)]
    pub enforcement: Enforcement,
    #[serde(default)]
    pub auto_renew: bool,
    #[serde(with = "time::wire")]
    pub epoch: Timestamp,
    #[serde(default = "defaults::urgency_fraction")]
    pub urgency_fraction: f64,
    /// Offset of group-local time from UTC, used by the morning reminder.
    #[serde(default)]
    pub utc_offset_minutes: i32,
    #[serde(default = "defaults::morning_hour")]
    pub morning_hour: u32,
}

mod defaults {
    pub fn cycle_hours() -> u32 {
        48
    }
    pub fn expectation_count() -> u32 {
        1
    }
    pub fn commit_ahead_limit() -> u32 {
        1
    }
    pub fn urgency_fraction() -> f64 {
        0.75
    }
    pub fn morning_hour() -> u32 {
        9
    }
}

impl GroupConfig {
    /// A config with every knob at its default.
    pub fn new(
        group_id: impl Into<GroupId>,
        name: impl Into<String>,
        condition: Condition,
        epoch: Timestamp,
    ) -> Self {
        GroupConfig {
            group_id: group_id.into(),
            name: name.into(),
            condition,
            cycle_hours: defaults::cycle_hours(),
            expectation_count: defaults::expectation_count(),
            commit_ahead_limit: defaults::commit_ahead_limit(),
            null_commit_allowed: false,
            enforcement: Enforcement::SocialOnly,
            auto_renew: false,
            epoch: time::truncate(epoch),
            urgency_fraction: defaults::urgency_fraction(),
            utc_offset_minutes: 0,
            morning_hour: defaults::morning_hour(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.group_id.as_str().is_empty() {
            return Err(ConfigError::EmptyGroupId);
        }
        if self.cycle_hours == 0 {
            return Err(ConfigError::ZeroCycleLength);
        }
        if self.expectation_count == 0 {
            return Err(ConfigError::ZeroExpectation);
        }
        if !(self.urgency_fraction > 0.0 && self.urgency_fraction < 1.0) {
            return Err(ConfigError::UrgencyFraction(self.urgency_fraction));
        }
        if let Enforcement::ForfeitAfterN { cycles: 0 } = self.enforcement {
            return Err(ConfigError::ZeroForfeitWindow);
        }
        if self.morning_hour > 23 {
            return Err(ConfigError::MorningHour(self.morning_hour));
        }
        if self.utc_offset_minutes.abs() > 18 * 60 {
            return Err(ConfigError::UtcOffset(self.utc_offset_minutes));
        }
        Ok(())
    }

    pub fn cycle_length(&self) -> Duration {
        time::hours(self.cycle_hours as i64)
    }

    pub fn cycle_ms(&self) -> i64 {
        self.cycle_hours as i64 * time::MS_PER_HOUR
    }

    pub fn is_commit(&self) -> bool {
        self.condition == Condition::Commit
    }
}
