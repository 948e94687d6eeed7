//! Experiment plans and the measurement protocols that run them.

mod journal;
mod plan;
mod protocol;
mod runner;

use std::path::PathBuf;

use thiserror::Error;

use crate::package::PackageError;
use crate::provider::ProviderError;

pub use journal::{read_journal, Journal, JournalEntry, JournalState, JOURNAL_FILE};
pub use plan::{
    builtin_sweep, builtin_sweeps, package_size_variants, Axis, AxisName, AxisPoint, AxisValue, ExperimentPlan,
    PointDefaults, Protocol, ThroughputParams, BASE_VARIANT, DEFAULT_REPETITIONS, SYNTHETIC_WORKLOAD,
};
pub use protocol::{
    coldstart_from_pair, req_per_s, run_coldstart_trial, run_latency_trial, run_throughput, TrialResult,
    COLDSTART_METRIC, REASON_NEGATIVE, REASON_SECOND_NOT_WARM, REQ_PER_S_METRIC,
};
pub use runner::{
    locate_workload, outcome_from_state, point_spec, prepare_packages, run_plan, ColdForcing, PlanOutcome,
    PointOutcome, PointStatus, PreparedPackages, RunOptions,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("{0}")]
    Workload(String),
    #[error("journal: {0}")]
    Journal(String),
    #[error("journal {journal} belongs to a different plan named {plan_id}; clean the run first")]
    PlanMismatch { plan_id: String, journal: PathBuf },
    #[error("run interrupted after {trials} trials")]
    Interrupted { trials: u64 },
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Package(#[from] PackageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
