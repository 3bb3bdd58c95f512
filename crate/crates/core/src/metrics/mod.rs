//! Behavioural analytics over replayed group logs: daily activity, activity
//! survival with a Cox model, message counts and fixed-effects regressions,
//! participation inequality, and posting cadence per two-day period.
//!
//! Cox ties use the Breslow approximation. The regressions are plain
//! fixed-effects fits; there is no random intercept per participant.

pub mod activity;
pub mod cox;
pub mod gini;
pub mod messages;
pub mod regression;
pub mod report;
pub mod survival;

pub use activity::{activity_matrix, ActivityMatrix, ActivityRow};
pub use cox::{cox_fit, partial_log_likelihood, score_and_information, CoxFit, CoxObservation};
pub use gini::{gini, gini_counts};
pub use messages::{
    conversation_starts, log_message_summary, median, message_counts, two_day_fulfillment,
    MessageSummary, PeriodCounts,
};
pub use regression::{linear_fit, logistic_fit, Coefficient, Design, LinearFit, LogisticFit};
pub use report::{analyze, AnalysisConfig, AnalysisReport, GroupMetrics, InequalityReport, SurvivalTable};
pub use survival::{death_day, km_survivor_counts, survival_times, SurvivalDataset, SurvivalRecord};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("no contributions")]
    NoContributions,
    #[error("no events")]
    NoEvents,
    #[error("covariate does not vary")]
    NoVariation,
    #[error("outcome does not vary (separation)")]
    Separation,
    #[error("singular design")]
    Singular,
    #[error("design shape mismatch")]
    Shape,
    #[error("non-finite or negative value")]
    InvalidValue,
    #[error("invalid analysis config: {0}")]
    Config(String),
}
