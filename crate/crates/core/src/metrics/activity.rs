use serde::{Deserialize, Serialize};

use crate::config::Condition;
use crate::model::{GroupId, MemberId};
use crate::state::GroupState;
use crate::time::{Timestamp, MS_PER_DAY};

/// Daily activity for one member: `active[d]` is true when they sent at
/// least one message on day `d` (days counted from the group epoch).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityRow {
    pub group_id: GroupId,
    pub member_id: MemberId,
    pub condition: Condition,
    pub group_size: usize,
    pub active: Vec<bool>,
}

impl ActivityRow {
    pub fn active_days(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityMatrix {
    pub study_days: u32,
    pub rows: Vec<ActivityRow>,
}

impl ActivityMatrix {
    pub fn concat(study_days: u32, parts: impl IntoIterator<Item = ActivityMatrix>) -> Self {
        let rows = parts.into_iter().flat_map(|m| m.rows).collect();
        ActivityMatrix { study_days, rows }
    }

    /// Members active on each day, per condition.
    pub fn active_counts(&self, condition: Condition) -> Vec<usize> {
        let mut out = vec![0; self.study_days as usize];
        for row in self.rows.iter().filter(|r| r.condition == condition) {
            for (d, a) in row.active.iter().enumerate() {
                out[d] += *a as usize;
            }
        }
        out
    }
}

/// Day index of `t` relative to `epoch`, if inside the study.
pub fn day_index(t: Timestamp, epoch: Timestamp, study_days: u32) -> Option<usize> {
    let ms = (t - epoch).num_milliseconds();
    if ms < 0 {
        return None;
    }
    let d = (ms / MS_PER_DAY) as usize;
    (d < study_days as usize).then_some(d)
}

pub fn activity_matrix(state: &GroupState, study_days: u32) -> ActivityMatrix {
    let cfg = state.config();
    let size = state.members().len();
    let rows = state
        .members()
        .iter()
        .map(|m| {
            let mut active = vec![false; study_days as usize];
            for &t in &m.post_times {
                if let Some(d) = day_index(t, cfg.epoch, study_days) {
                    active[d] = true;
                }
            }
            ActivityRow {
                group_id: cfg.group_id.clone(),
                member_id: m.member_id.clone(),
                condition: cfg.condition,
                group_size: size,
                active,
            }
        })
        .collect();
    ActivityMatrix { study_days, rows }
}
