use serde::{Deserialize, Serialize};

use super::activity::{activity_matrix, ActivityMatrix};
use super::cox::{cox_fit, CoxFit};
use super::gini::gini_counts;
use super::messages::{
    conversation_starts, log_message_summary, median, message_counts, two_day_fulfillment,
};
use super::regression::{linear_fit, logistic_fit, Design, LinearFit, LogisticFit};
use super::survival::{km_survivor_counts, survival_times};
use super::MetricError;
use crate::config::Condition;
use crate::model::{GroupId, MemberId};
use crate::par::Exec;
use crate::state::GroupState;
use crate::time::{days, hours};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    #[serde(default = "AnalysisConfig::default_study_days")]
    pub study_days: u32,
    #[serde(default = "AnalysisConfig::default_lapse_windows")]
    pub lapse_windows: Vec<u32>,
    #[serde(default = "AnalysisConfig::default_gap")]
    pub conversation_gap_hours: u32,
    #[serde(default = "AnalysisConfig::default_period")]
    pub two_day_period_hours: u32,
    /// Groups with at least this many members count as full.
    #[serde(default = "AnalysisConfig::default_full_group")]
    pub full_group_size: usize,
}

impl AnalysisConfig {
    fn default_study_days() -> u32 {
        21
    }
    fn default_lapse_windows() -> Vec<u32> {
        vec![3, 5, 7, 9, 11]
    }
    fn default_gap() -> u32 {
        12
    }
    fn default_period() -> u32 {
        48
    }
    fn default_full_group() -> usize {
        5
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        let bad = |m: &str| Err(MetricError::Config(m.to_string()));
        if self.study_days == 0 {
            return bad("study_days must be positive");
        }
        if self.lapse_windows.is_empty() || self.lapse_windows.contains(&0) {
            return bad("lapse windows must be a non-empty list of positive day counts");
        }
        if self.two_day_period_hours == 0 {
            return bad("two_day_period_hours must be positive");
        }
        Ok(())
    }
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            study_days: Self::default_study_days(),
            lapse_windows: Self::default_lapse_windows(),
            conversation_gap_hours: Self::default_gap(),
            two_day_period_hours: Self::default_period(),
            full_group_size: Self::default_full_group(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberMetrics {
    pub member_id: MemberId,
    pub messages: u64,
    pub log_messages: f64,
    pub conversation_starts: u64,
    pub active_days: usize,
    pub active: Vec<bool>,
    pub two_day_counts: Vec<u64>,
    pub two_day_median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub gini_all_messages: Option<f64>,
    pub gini_conversation_starts: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub group_id: GroupId,
    pub condition: Condition,
    pub size: usize,
    pub full_group: bool,
    pub messages: u64,
    pub conversation_starts: u64,
    pub inequality: InequalityReport,
    pub members: Vec<MemberMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LapseFraction {
    pub lapse_days: u32,
    pub surviving_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub condition: Condition,
    pub groups: usize,
    pub members: usize,
    pub median_messages: Option<f64>,
    pub median_log_messages: Option<f64>,
    pub median_active_days: Option<f64>,
    pub median_two_day_messages: Option<f64>,
    pub median_gini_all_messages: Option<f64>,
    pub median_gini_conversation_starts: Option<f64>,
    pub survival: Vec<LapseFraction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayActivity {
    pub day: u32,
    pub commit_active: usize,
    pub commit_members: usize,
    pub control_active: usize,
    pub control_members: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalColumn {
    pub lapse_days: u32,
    pub observations: usize,
    pub events: usize,
    pub cox: Option<CoxFit>,
    pub error: Option<String>,
    pub commit_survivors: Vec<usize>,
    pub control_survivors: Vec<usize>,
}

/// One column per lapse period, as in a robustness table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalTable {
    pub lapse_periods: Vec<u32>,
    pub columns: Vec<SurvivalColumn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult<T> {
    pub fit: Option<T>,
    pub error: Option<String>,
}

impl<T> From<Result<T, MetricError>> for ModelResult<T> {
    fn from(r: Result<T, MetricError>) -> Self {
        match r {
            Ok(fit) => ModelResult { fit: Some(fit), error: None },
            Err(e) => ModelResult { fit: None, error: Some(e.to_string()) },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Models {
    /// Daily active ~ commit + day.
    pub activity: ModelResult<LogisticFit>,
    /// Daily active ~ commit + day + full_group.
    pub activity_full_group: ModelResult<LogisticFit>,
    /// ln(messages + 1) ~ commit + full_group, one row per member.
    pub log_messages: ModelResult<LinearFit>,
    /// Group Gini ~ commit, one row per group.
    pub gini_all_messages: ModelResult<LinearFit>,
    pub gini_conversation_starts: ModelResult<LinearFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub config: AnalysisConfig,
    pub groups: Vec<GroupMetrics>,
    pub cohorts: Vec<CohortSummary>,
    pub daily_activity: Vec<DayActivity>,
    pub survival_table: SurvivalTable,
    pub models: Models,
}

pub fn group_metrics(state: &GroupState, cfg: &AnalysisConfig) -> GroupMetrics {
    let gc = state.config();
    let span = days(cfg.study_days as i64);
    let until = Some(gc.epoch + span);
    let counts = message_counts(state, until);
    let summary = log_message_summary(&counts);
    let starts = conversation_starts(state, hours(cfg.conversation_gap_hours as i64), until);
    let periods = two_day_fulfillment(state, hours(cfg.two_day_period_hours as i64), span);
    let matrix = activity_matrix(state, cfg.study_days);
    let members: Vec<MemberMetrics> = summary
        .members
        .iter()
        .zip(&starts)
        .zip(&periods)
        .zip(&matrix.rows)
        .map(|(((m, s), p), row)| MemberMetrics {
            member_id: m.member_id.clone(),
            messages: m.messages,
            log_messages: m.log_messages,
            conversation_starts: s.1,
            active_days: row.active_days(),
            active: row.active.clone(),
            two_day_counts: p.counts.clone(),
            two_day_median: p.median,
        })
        .collect();
    let all: Vec<u64> = counts.iter().map(|c| c.1).collect();
    let st: Vec<u64> = starts.iter().map(|c| c.1).collect();
    let size = state.members().len();
    GroupMetrics {
        group_id: gc.group_id.clone(),
        condition: gc.condition,
        size,
        full_group: size >= cfg.full_group_size,
        messages: all.iter().sum(),
        conversation_starts: st.iter().sum(),
        inequality: InequalityReport {
            gini_all_messages: gini_counts(&all).ok(),
            gini_conversation_starts: gini_counts(&st).ok(),
        },
        members,
    }
}

fn indicator(b: bool) -> f64 {
    b as u8 as f64
}

fn cohort(groups: &[GroupMetrics], condition: Condition, table: &SurvivalTable) -> CohortSummary {
    let gs: Vec<&GroupMetrics> = groups.iter().filter(|g| g.condition == condition).collect();
    let ms: Vec<&MemberMetrics> = gs.iter().flat_map(|g| &g.members).collect();
    let col = |f: &dyn Fn(&MemberMetrics) -> f64| median(&ms.iter().map(|m| f(m)).collect::<Vec<_>>());
    let ginis = |f: &dyn Fn(&InequalityReport) -> Option<f64>| {
        median(&gs.iter().filter_map(|g| f(&g.inequality)).collect::<Vec<_>>())
    };
    let survival = table
        .columns
        .iter()
        .map(|c| {
            let survivors = match condition {
                Condition::Commit => &c.commit_survivors,
                Condition::Control => &c.control_survivors,
            };
            LapseFraction {
                lapse_days: c.lapse_days,
                surviving_fraction: (!ms.is_empty())
                    .then(|| *survivors.last().unwrap_or(&0) as f64 / ms.len() as f64),
            }
        })
        .collect();
    CohortSummary {
        condition,
        groups: gs.len(),
        members: ms.len(),
        median_messages: col(&|m| m.messages as f64),
        median_log_messages: col(&|m| m.log_messages),
        median_active_days: col(&|m| m.active_days as f64),
        median_two_day_messages: col(&|m| m.two_day_median),
        median_gini_all_messages: ginis(&|i| i.gini_all_messages),
        median_gini_conversation_starts: ginis(&|i| i.gini_conversation_starts),
        survival,
    }
}

fn matrix_from(groups: &[GroupMetrics], study_days: u32) -> ActivityMatrix {
    use super::activity::ActivityRow;
    let rows = groups
        .iter()
        .flat_map(|g| {
            g.members.iter().map(move |m| ActivityRow {
                group_id: g.group_id.clone(),
                member_id: m.member_id.clone(),
                condition: g.condition,
                group_size: g.size,
                active: m.active.clone(),
            })
        })
        .collect();
    ActivityMatrix { study_days, rows }
}

fn activity_design(groups: &[GroupMetrics], with_full_group: bool) -> Result<Design, MetricError> {
    let mut names = vec!["intercept", "commit", "day"];
    if with_full_group {
        names.push("full_group");
    }
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for g in groups {
        for m in &g.members {
            for (d, &a) in m.active.iter().enumerate() {
                let mut r = vec![1.0, indicator(g.condition == Condition::Commit), d as f64];
                if with_full_group {
                    r.push(indicator(g.full_group));
                }
                rows.push(r);
                y.push(indicator(a));
            }
        }
    }
    Design::from_rows(&names, &rows, &y)
}

fn messages_design(groups: &[GroupMetrics]) -> Result<Design, MetricError> {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for g in groups {
        for m in &g.members {
            rows.push(vec![
                1.0,
                indicator(g.condition == Condition::Commit),
                indicator(g.full_group),
            ]);
            y.push(m.log_messages);
        }
    }
    Design::from_rows(&["intercept", "commit", "full_group"], &rows, &y)
}

fn gini_design(groups: &[GroupMetrics], f: impl Fn(&InequalityReport) -> Option<f64>) -> Result<Design, MetricError> {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for g in groups {
        if let Some(v) = f(&g.inequality) {
            rows.push(vec![1.0, indicator(g.condition == Condition::Commit)]);
            y.push(v);
        }
    }
    Design::from_rows(&["intercept", "commit"], &rows, &y)
}

/// Runs the full pipeline over replayed groups. Groups and lapse windows are
/// independent and are spread according to `exec`.
pub fn analyze(states: &[&GroupState], cfg: &AnalysisConfig, exec: Exec) -> Result<AnalysisReport, MetricError> {
    cfg.validate()?;
    let groups = exec.map(states, |s| group_metrics(s, cfg));
    let matrix = matrix_from(&groups, cfg.study_days);

    let columns = exec.map(&cfg.lapse_windows, |&w| {
        let data = survival_times(&matrix, w);
        let fit = cox_fit(&data.cox_observations());
        SurvivalColumn {
            lapse_days: w,
            observations: data.rows.len(),
            events: data.events(),
            commit_survivors: km_survivor_counts(&data.filter(Condition::Commit)),
            control_survivors: km_survivor_counts(&data.filter(Condition::Control)),
            error: fit.as_ref().err().map(|e| e.to_string()),
            cox: fit.ok(),
        }
    });
    let table = SurvivalTable {
        lapse_periods: cfg.lapse_windows.clone(),
        columns,
    };

    let daily_activity = (0..cfg.study_days)
        .map(|d| {
            let count = |c: Condition| {
                let rows: Vec<_> = matrix.rows.iter().filter(|r| r.condition == c).collect();
                (rows.iter().filter(|r| r.active[d as usize]).count(), rows.len())
            };
            let (commit_active, commit_members) = count(Condition::Commit);
            let (control_active, control_members) = count(Condition::Control);
            DayActivity {
                day: d,
                commit_active,
                commit_members,
                control_active,
                control_members,
            }
        })
        .collect();

    let models = Models {
        activity: activity_design(&groups, false).and_then(|d| logistic_fit(&d)).into(),
        activity_full_group: activity_design(&groups, true).and_then(|d| logistic_fit(&d)).into(),
        log_messages: messages_design(&groups).and_then(|d| linear_fit(&d)).into(),
        gini_all_messages: gini_design(&groups, |i| i.gini_all_messages)
            .and_then(|d| linear_fit(&d))
            .into(),
        gini_conversation_starts: gini_design(&groups, |i| i.gini_conversation_starts)
            .and_then(|d| linear_fit(&d))
            .into(),
    };

    let cohorts = [Condition::Commit, Condition::Control]
        .into_iter()
        .map(|c| cohort(&groups, c, &table))
        .collect();

    Ok(AnalysisReport {
        config: cfg.clone(),
        groups,
        cohorts,
        daily_activity,
        survival_table: table,
        models,
    })
}

impl AnalysisReport {
    pub fn cohort(&self, condition: Condition) -> &CohortSummary {
        self.cohorts
            .iter()
            .find(|c| c.condition == condition)
            .expect("both cohorts are always reported")
    }
}
