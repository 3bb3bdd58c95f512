//! Scripted-agent experiments on a virtual clock.
//!
//! Each simulated group runs its own [`Service`](crate::api::Service) and
//! agents act only through it, so gating applies to them exactly as to
//! people. Agents react to the notifications they are pushed; message
//! bodies are tokens (`start ...`, `reply to m<id>`), not language.
//!
//! A group run is single-threaded and deterministic in its seed. Groups are
//! independent and may run in parallel.

mod checks;
mod contrast;
mod plan;
mod run;

pub use checks::{check_gated_reads, check_monotone};
pub use contrast::{
    condition_contrast, contrast_over_seeds, ContrastDelta, ContrastReport, PooledArm, PooledContrast,
};
pub use plan::{derive_seed, AgentPolicy, ArmPlan, ExperimentPlan, GroupSettings, GroupSpec};
pub use run::{
    run_experiment, run_group, run_specs, ExperimentRun, GroupRun, RunGroupEntry, RunManifest,
    REPLY_PREFIX, RUN_FILE,
};

use thiserror::Error;

use crate::api::ApiError;
use crate::metrics::MetricError;
use crate::store::StoreError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error(transparent)]
    Api(#[from] ApiError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Metrics(#[from] MetricError),
    #[error("invariant violated: {0}")]
    Invariant(String),
}
