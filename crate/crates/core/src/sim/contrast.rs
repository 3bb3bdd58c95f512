use serde::{Deserialize, Serialize};

use super::plan::ExperimentPlan;
use super::run::run_experiment;
use super::SimError;
use crate::config::Condition;
use crate::metrics::report::{analyze, AnalysisConfig, AnalysisReport, CohortSummary};
use crate::par::Exec;

/// COMMIT minus CONTROL for the headline measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastDelta {
    pub median_messages: f64,
    pub median_active_days: f64,
    /// Fraction of members alive at the end of the study, for `lapse_days`.
    pub surviving_fraction: f64,
    pub lapse_days: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastReport {
    pub seed: u64,
    pub commit: CohortSummary,
    pub control: CohortSummary,
    pub delta: ContrastDelta,
    pub report: AnalysisReport,
}

impl ContrastReport {
    /// COMMIT is at least CONTROL on every headline measure.
    pub fn commit_not_worse(&self) -> bool {
        self.delta.median_messages >= 0.0
            && self.delta.median_active_days >= 0.0
            && self.delta.surviving_fraction >= 0.0
    }
}

fn survival_at(c: &CohortSummary, lapse_days: u32) -> f64 {
    c.survival
        .iter()
        .find(|s| s.lapse_days == lapse_days)
        .and_then(|s| s.surviving_fraction)
        .unwrap_or(0.0)
}

/// Runs both arms with matched seeds and compares them. `lapse_days` picks
/// the survival column used in the delta; it must be one of the analysis
/// windows.
pub fn condition_contrast(
    plan: &ExperimentPlan,
    analysis: &AnalysisConfig,
    lapse_days: u32,
    exec: Exec,
) -> Result<ContrastReport, SimError> {
    for c in [Condition::Commit, Condition::Control] {
        if !plan.arms.iter().any(|a| a.condition == c && a.groups > 0) {
            return Err(SimError::InvalidPlan(format!("contrast needs a non-empty {c} arm")));
        }
    }
    if !analysis.lapse_windows.contains(&lapse_days) {
        return Err(SimError::InvalidPlan(format!("lapse window {lapse_days} is not analysed")));
    }
    let run = run_experiment(plan, exec)?;
    let report = analyze(&run.states(), analysis, exec)?;
    let commit = report.cohort(Condition::Commit).clone();
    let control = report.cohort(Condition::Control).clone();
    let diff = |f: fn(&CohortSummary) -> Option<f64>| f(&commit).unwrap_or(0.0) - f(&control).unwrap_or(0.0);
    let delta = ContrastDelta {
        median_messages: diff(|c| c.median_messages),
        median_active_days: diff(|c| c.median_active_days),
        surviving_fraction: survival_at(&commit, lapse_days) - survival_at(&control, lapse_days),
        lapse_days,
    };
    Ok(ContrastReport {
        seed: plan.seed,
        commit,
        control,
        delta,
        report,
    })
}

/// Headline measures for one arm, pooled over the members of many runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledArm {
    pub members: usize,
    pub median_messages: Option<f64>,
    pub median_active_days: Option<f64>,
    pub surviving_fraction: Option<f64>,
}

/// Several matched-seed contrasts summarised together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledContrast {
    pub seeds: Vec<u64>,
    pub lapse_days: u32,
    pub commit: PooledArm,
    pub control: PooledArm,
    /// Seeds on which COMMIT was at least CONTROL, per measure:
    /// messages, active days, surviving fraction.
    pub seeds_commit_not_worse: [usize; 3],
}

impl PooledContrast {
    pub fn from_reports(reports: &[ContrastReport]) -> Self {
        let lapse_days = reports.first().map_or(0, |r| r.delta.lapse_days);
        let arm = |c: Condition| {
            let mut messages = Vec::new();
            let mut active = Vec::new();
            let (mut alive, mut total) = (0usize, 0usize);
            for r in reports {
                for g in r.report.groups.iter().filter(|g| g.condition == c) {
                    for m in &g.members {
                        messages.push(m.messages as f64);
                        active.push(m.active_days as f64);
                    }
                }
                if let Some(col) = r.report.survival_table.columns.iter().find(|c| c.lapse_days == lapse_days) {
                    let survivors = match c {
                        Condition::Commit => &col.commit_survivors,
                        Condition::Control => &col.control_survivors,
                    };
                    alive += survivors.last().copied().unwrap_or(0);
                }
                total += r.report.cohort(c).members;
            }
            PooledArm {
                members: total,
                median_messages: crate::metrics::median(&messages),
                median_active_days: crate::metrics::median(&active),
                surviving_fraction: (total > 0).then(|| alive as f64 / total as f64),
            }
        };
        let count = |f: fn(&ContrastDelta) -> f64| reports.iter().filter(|r| f(&r.delta) >= 0.0).count();
        PooledContrast {
            seeds: reports.iter().map(|r| r.seed).collect(),
            lapse_days,
            commit: arm(Condition::Commit),
            control: arm(Condition::Control),
            seeds_commit_not_worse: [
                count(|d| d.median_messages),
                count(|d| d.median_active_days),
                count(|d| d.surviving_fraction),
            ],
        }
    }

    /// Pooled COMMIT is at least pooled CONTROL on every measure.
    pub fn commit_not_worse(&self) -> bool {
        let ge = |a: Option<f64>, b: Option<f64>| a.unwrap_or(0.0) >= b.unwrap_or(0.0);
        ge(self.commit.median_messages, self.control.median_messages)
            && ge(self.commit.median_active_days, self.control.median_active_days)
            && ge(self.commit.surviving_fraction, self.control.surviving_fraction)
    }

    /// Largest per-seed gap in median messages between the arms.
    pub fn max_abs_median_message_gap(reports: &[ContrastReport]) -> f64 {
        reports
            .iter()
            .map(|r| r.delta.median_messages.abs())
            .fold(0.0, f64::max)
    }
}

/// Runs `condition_contrast` for each seed, reusing the rest of `plan`.
pub fn contrast_over_seeds(
    plan: &ExperimentPlan,
    seeds: &[u64],
    analysis: &AnalysisConfig,
    lapse_days: u32,
    exec: Exec,
) -> Result<Vec<ContrastReport>, SimError> {
    exec.map(seeds, |&seed| {
        let plan = ExperimentPlan { seed, ..plan.clone() };
        // groups inside one seed run sequentially; seeds spread instead
        condition_contrast(&plan, analysis, lapse_days, Exec::Sequential)
    })
    .into_iter()
    .collect()
}
