//! Activity survival: a member "dies" on the day that completes a run of
//! `lapse_window` consecutive inactive days. Death is permanent even if
//! activity resumes later; members who never complete such a run are
//! censored at the end of the study.

use serde::{Deserialize, Serialize};

use super::activity::ActivityMatrix;
use super::cox::CoxObservation;
use crate::config::Condition;
use crate::model::{GroupId, MemberId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub group_id: GroupId,
    pub member_id: MemberId,
    pub condition: Condition,
    /// Day index completing the inactive run.
    pub death_day: Option<u32>,
    /// Days observed: `death_day + 1`, or the study length when censored.
    pub duration: u32,
    pub event: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalDataset {
    pub lapse_window: u32,
    pub study_days: u32,
    pub rows: Vec<SurvivalRecord>,
}

/// First day index completing `window` consecutive `false` entries.
pub fn death_day(active: &[bool], window: u32) -> Option<u32> {
    assert!(window >= 1, "lapse window must be at least one day");
    let mut run = 0u32;
    for (d, &a) in active.iter().enumerate() {
        run = if a { 0 } else { run + 1 };
        if run == window {
            return Some(d as u32);
        }
    }
    None
}

pub fn survival_times(matrix: &ActivityMatrix, lapse_window: u32) -> SurvivalDataset {
    let rows = matrix
        .rows
        .iter()
        .map(|r| {
            let death = death_day(&r.active, lapse_window);
            SurvivalRecord {
                group_id: r.group_id.clone(),
                member_id: r.member_id.clone(),
                condition: r.condition,
                death_day: death,
                duration: death.map_or(matrix.study_days, |d| d + 1),
                event: death.is_some(),
            }
        })
        .collect();
    SurvivalDataset {
        lapse_window,
        study_days: matrix.study_days,
        rows,
    }
}

impl SurvivalDataset {
    pub fn filter(&self, condition: Condition) -> SurvivalDataset {
        SurvivalDataset {
            lapse_window: self.lapse_window,
            study_days: self.study_days,
            rows: self
                .rows
                .iter()
                .filter(|r| r.condition == condition)
                .cloned()
                .collect(),
        }
    }

    pub fn events(&self) -> usize {
        self.rows.iter().filter(|r| r.event).count()
    }

    /// Cox input with covariate 1 for the commitment condition.
    pub fn cox_observations(&self) -> Vec<CoxObservation> {
        self.rows
            .iter()
            .map(|r| CoxObservation {
                time: r.duration as f64,
                event: r.event,
                x: (r.condition == Condition::Commit) as u8 as f64,
            })
            .collect()
    }

    /// Fraction of members still alive at the end of the study.
    pub fn surviving_fraction(&self) -> Option<f64> {
        if self.rows.is_empty() {
            return None;
        }
        let alive = self.rows.iter().filter(|r| !r.event).count();
        Some(alive as f64 / self.rows.len() as f64)
    }
}

/// Members alive at the end of each day (those whose death day is later).
pub fn km_survivor_counts(dataset: &SurvivalDataset) -> Vec<usize> {
    (0..dataset.study_days)
        .map(|d| {
            dataset
                .rows
                .iter()
                .filter(|r| r.death_day.is_none_or(|x| x > d))
                .count()
        })
        .collect()
}
