use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::journal::{Journal, JournalEntry, JournalState};
use super::plan::{AxisName, AxisPoint, ExperimentPlan, Protocol, BASE_VARIANT, SYNTHETIC_WORKLOAD};
use super::protocol::{
    req_per_s, run_coldstart_trial, run_latency_trial, run_throughput, TrialResult, REQ_PER_S_METRIC,
};
use super::EngineError;
use crate::clock::Clock;
use crate::package::{build_package, make_size_variants, PackageArtifact, WorkloadManifest};
use crate::par::{self, Execution};
use crate::platform::{DeploymentSpec, Language, PlatformProfile, Violation};
use crate::provider::{deploy, DeploymentHandle, Provider, ProviderError};
use crate::sim::write_synthetic_workload;

/// How the engine gets a cold instance before each cold-start trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColdForcing {
    /// Evict when the provider supports it, otherwise redeploy.
    #[default]
    Auto,
    Evict,
    /// Deploy a copy with a fresh environment marker for every trial.
    Redeploy,
    None,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub output_dir: PathBuf,
    /// Tear deployments down after each point.
    pub cleanup: bool,
    /// Pause between trials, spent on the run clock.
    pub pacing: Duration,
    pub cold_forcing: ColdForcing,
    pub execution: Execution,
    /// Seeds generated workload and padding content.
    pub seed: u64,
    /// Where workload directories are looked up by id.
    pub workload_dirs: Vec<PathBuf>,
    /// Stop with [`EngineError::Interrupted`] once this many trials have been
    /// recorded by this call. For exercising resume.
    pub stop_after_trials: Option<u64>,
}

impl RunOptions {
    pub fn new(output_dir: impl Into<PathBuf>) -> Self {
        Self {
            output_dir: output_dir.into(),
            cleanup: true,
            pacing: Duration::from_secs(1),
            cold_forcing: ColdForcing::Auto,
            execution: Execution::default(),
            seed: 0,
            workload_dirs: Vec::new(),
            stop_after_trials: None,
        }
    }

    pub fn run_dir(&self, plan_id: &str) -> PathBuf {
        self.output_dir.join(plan_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PointStatus {
    Completed { trials: Vec<TrialResult> },
    Failed { reason: String, violations: Vec<Violation> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointOutcome {
    pub point: AxisPoint,
    #[serde(flatten)]
    pub status: PointStatus,
}

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub plan: ExperimentPlan,
    pub run_dir: PathBuf,
    pub points: Vec<PointOutcome>,
}

impl PlanOutcome {
    pub fn trials(&self) -> impl Iterator<Item = &TrialResult> {
        self.points.iter().flat_map(|p| match &p.status {
            PointStatus::Completed { trials } => trials.as_slice(),
            PointStatus::Failed { .. } => &[],
        })
    }

    pub fn failed_points(&self) -> usize {
        self.points
            .iter()
            .filter(|p| matches!(p.status, PointStatus::Failed { .. }))
            .count()
    }
}

/// Rebuilds a plan's outcome from its journal.
pub fn outcome_from_state(plan: &ExperimentPlan, run_dir: &Path, state: &JournalState) -> PlanOutcome {
    let points = plan
        .points()
        .into_iter()
        .filter_map(|point| {
            if let Some((reason, violations)) = state.failed.get(&point) {
                return Some(PointOutcome {
                    point,
                    status: PointStatus::Failed {
                        reason: reason.clone(),
                        violations: violations.clone(),
                    },
                });
            }
            let mut trials = state.trials.get(&point).cloned()?;
            trials.sort_by_key(|t| t.trial);
            Some(PointOutcome {
                point,
                status: PointStatus::Completed { trials },
            })
        })
        .collect();
    PlanOutcome {
        plan: plan.clone(),
        run_dir: run_dir.to_path_buf(),
        points,
    }
}

/// The base package and the declared size variants of a plan.
#[derive(Debug, Clone)]
pub struct PreparedPackages {
    pub base: PackageArtifact,
    pub variants: BTreeMap<String, PackageArtifact>,
}

impl PreparedPackages {
    pub fn get(&self, label: &str) -> Option<&PackageArtifact> {
        if label == BASE_VARIANT {
            Some(&self.base)
        } else {
            self.variants.get(label)
        }
    }
}

/// Finds a workload directory: `workload` itself if it is a directory,
/// otherwise `<dir>/<workload>` in the search path.
pub fn locate_workload(workload: &str, dirs: &[PathBuf]) -> Result<PathBuf, EngineError> {
    let direct = Path::new(workload);
    if direct.is_dir() {
        return Ok(direct.to_path_buf());
    }
    dirs.iter()
        .map(|d| d.join(workload))
        .find(|p| p.is_dir())
        .ok_or_else(|| {
            EngineError::Workload(format!(
                "workload {workload:?} not found (searched: {})",
                dirs.iter()
                    .map(|d| d.display().to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            ))
        })
}

fn default_language(plan: &ExperimentPlan, profile: &PlatformProfile) -> Result<Language, EngineError> {
    let lang = Language::from_str(&plan.defaults.language)
        .map_err(|e| EngineError::InvalidPlan(format!("language {:?}: {e}", plan.defaults.language)))?;
    Ok(profile.resolve_language(&lang))
}

/// Builds the base package and the plan's size variants under the run dir.
pub fn prepare_packages(
    plan: &ExperimentPlan,
    profile: &PlatformProfile,
    opts: &RunOptions,
) -> Result<PreparedPackages, EngineError> {
    let run_dir = opts.run_dir(&plan.id);
    let (dir, manifest) = if plan.workload == SYNTHETIC_WORKLOAD {
        let dir = run_dir.join("workload");
        let m = write_synthetic_workload(&dir, SYNTHETIC_WORKLOAD, default_language(plan, profile)?, opts.seed)?;
        (dir, m)
    } else {
        let dir = locate_workload(&plan.workload, &opts.workload_dirs)?;
        let m = WorkloadManifest::load(&dir)?;
        (dir, m)
    };
    let out = run_dir.join("packages");
    std::fs::create_dir_all(&out)?;
    let base = build_package(&dir, &manifest, &out)?;
    let variants = make_size_variants(&base, &plan.package_variants, &out, opts.seed, opts.execution)?;
    Ok(PreparedPackages {
        base,
        variants: variants
            .into_iter()
            .map(|a| (a.manifest.variant.clone().unwrap_or_default(), a))
            .collect(),
    })
}

/// The deployment spec of one point.
pub fn point_spec(
    plan: &ExperimentPlan,
    point: &AxisPoint,
    profile: &PlatformProfile,
    packages: &PreparedPackages,
) -> Result<DeploymentSpec, EngineError> {
    let bad = |m: String| EngineError::InvalidPlan(format!("{} at {point}: {m}", plan.id));
    let language = match point.get(AxisName::Language) {
        Some(l) => profile.resolve_language(&Language::from_str(l).map_err(|e| bad(e.to_string()))?),
        None => default_language(plan, profile)?,
    };
    let memory_mb = match point.get(AxisName::MemoryMb) {
        Some(m) => m.parse().map_err(|_| bad(format!("memory {m:?}")))?,
        None => plan.defaults.memory_mb,
    };
    let region = point
        .get(AxisName::Region)
        .map(str::to_string)
        .or_else(|| plan.defaults.region.clone())
        .or_else(|| profile.regions.first().cloned())
        .ok_or_else(|| bad("profile lists no regions".into()))?;
    let label = point.get(AxisName::PackageVariant).unwrap_or(BASE_VARIANT);
    let package = packages
        .get(label)
        .cloned()
        .ok_or_else(|| bad(format!("package variant {label:?} was not built")))?;
    Ok(DeploymentSpec {
        language,
        memory_mb,
        timeout_s: plan.defaults.timeout_s,
        region,
        trigger: package.manifest.trigger,
        package,
        marker: None,
    })
}

type PointWork = (AxisPoint, Result<DeploymentSpec, EngineError>, Arc<dyn Clock>);

fn point_concurrency(plan: &ExperimentPlan, point: &AxisPoint) -> u32 {
    point
        .get(AxisName::Concurrency)
        .and_then(|c| c.parse().ok())
        .unwrap_or(plan.defaults.concurrency)
}

struct Ctx<'a> {
    plan: &'a ExperimentPlan,
    provider: &'a dyn Provider,
    opts: &'a RunOptions,
    journal: &'a Journal,
    recorded: AtomicU64,
    stopped: AtomicBool,
}

impl Ctx<'_> {
    fn record(&self, trial: TrialResult) -> Result<TrialResult, EngineError> {
        self.journal.append(&JournalEntry::Trial(trial.clone()))?;
        let n = self.recorded.fetch_add(1, Ordering::SeqCst) + 1;
        if self.opts.stop_after_trials.is_some_and(|limit| n >= limit) {
            self.stopped.store(true, Ordering::SeqCst);
        }
        self.check_stopped()?;
        Ok(trial)
    }

    fn check_stopped(&self) -> Result<(), EngineError> {
        if self.stopped.load(Ordering::SeqCst) {
            return Err(EngineError::Interrupted {
                trials: self.recorded.load(Ordering::SeqCst),
            });
        }
        Ok(())
    }

    fn fail_point(
        &self,
        point: &AxisPoint,
        reason: String,
        violations: Vec<Violation>,
    ) -> Result<PointOutcome, EngineError> {
        warn!("{}: point {point} failed: {reason}", self.plan.id);
        self.journal.append(&JournalEntry::PointFailed {
            point: point.clone(),
            reason: reason.clone(),
            violations: violations.clone(),
        })?;
        Ok(PointOutcome {
            point: point.clone(),
            status: PointStatus::Failed { reason, violations },
        })
    }

    fn run_point(
        &self,
        point: &AxisPoint,
        spec: Result<DeploymentSpec, EngineError>,
        mut trials: Vec<TrialResult>,
        clock: &dyn Clock,
    ) -> Result<PointOutcome, EngineError> {
        self.check_stopped()?;
        let spec = match spec {
            Ok(s) => s,
            Err(e) => return self.fail_point(point, e.to_string(), Vec::new()),
        };
        let handle = match deploy(self.provider, spec) {
            Ok(h) => h,
            Err(ProviderError::Precondition(v)) => {
                return self.fail_point(point, "validation".into(), v);
            }
            Err(e) => return self.fail_point(point, format!("deployment failed: {e}"), Vec::new()),
        };
        // Trials may outlive an earlier process; re-attach the handle.
        self.provider.restore(&handle)?;

        let done: BTreeSet<u32> = trials.iter().map(|t| t.trial).collect();
        let todo: Vec<u32> = (0..self.plan.repetitions).filter(|i| !done.contains(i)).collect();
        info!("{}: point {point}: {} trials to run", self.plan.id, todo.len());
        let result = self.run_trials(point, &handle, &todo, clock, &mut trials);
        if self.opts.cleanup {
            match self.provider.teardown(&handle) {
                Ok(()) | Err(ProviderError::NotFound(_)) => {}
                Err(e) => warn!("{}: teardown of {} failed: {e}", self.plan.id, handle.function_id),
            }
        }
        result?;
        self.journal
            .append(&JournalEntry::PointComplete { point: point.clone() })?;
        self.journal.sync()?;
        trials.sort_by_key(|t| t.trial);
        Ok(PointOutcome {
            point: point.clone(),
            status: PointStatus::Completed { trials },
        })
    }

    fn run_trials(
        &self,
        point: &AxisPoint,
        handle: &DeploymentHandle,
        todo: &[u32],
        clock: &dyn Clock,
        trials: &mut Vec<TrialResult>,
    ) -> Result<(), EngineError> {
        let payload = &self.plan.payload;
        if todo.is_empty() {
            return Ok(());
        }
        if self.plan.protocol != Protocol::ColdstartPair {
            // Warm the function; this invocation is not part of any trial.
            let timeout = Duration::from_secs(handle.spec.timeout_s as u64);
            self.provider.invoke(handle, payload, timeout, clock)?;
        }
        for (k, &i) in todo.iter().enumerate() {
            self.check_stopped()?;
            if k > 0 {
                clock.sleep(self.opts.pacing);
            }
            let fresh = TrialResult::new(&self.plan.id, point, i);
            let trial = match self.plan.protocol {
                Protocol::ColdstartPair => self.coldstart(handle, clock, fresh)?,
                Protocol::Latency => run_latency_trial(self.provider, handle, payload, clock, fresh, i as u64)?,
                Protocol::Throughput => {
                    let duration = Duration::from_secs_f64(self.plan.throughput.duration_s);
                    let concurrency = point_concurrency(self.plan, point);
                    let records = run_throughput(self.provider, handle, payload, clock, concurrency, duration)?;
                    let mut t = fresh;
                    t.derived.insert(REQ_PER_S_METRIC.into(), req_per_s(&records, duration));
                    t.derived.insert("duration_s".into(), duration.as_secs_f64());
                    t.records = records;
                    t
                }
            };
            trials.push(self.record(trial)?);
        }
        Ok(())
    }

    fn coldstart(
        &self,
        handle: &DeploymentHandle,
        clock: &dyn Clock,
        trial: TrialResult,
    ) -> Result<TrialResult, EngineError> {
        let payload = &self.plan.payload;
        let seq = trial.trial as u64 * 2;
        let redeploy = match self.opts.cold_forcing {
            ColdForcing::None => false,
            ColdForcing::Redeploy => true,
            ColdForcing::Evict => {
                self.provider.evict(handle)?;
                false
            }
            ColdForcing::Auto => match self.provider.evict(handle) {
                Ok(()) => false,
                Err(ProviderError::Unsupported { .. }) => true,
                Err(e) => return Err(e.into()),
            },
        };
        if !redeploy {
            return run_coldstart_trial(self.provider, handle, payload, clock, trial, seq);
        }
        let mut spec = handle.spec.clone();
        spec.marker = Some(format!("cold-{}", trial.trial));
        let fresh = deploy(self.provider, spec)?;
        let result = run_coldstart_trial(self.provider, &fresh, payload, clock, trial, seq);
        match self.provider.teardown(&fresh) {
            Ok(()) | Err(ProviderError::NotFound(_)) => {}
            Err(e) => warn!("{}: teardown of {} failed: {e}", self.plan.id, fresh.function_id),
        }
        result
    }
}

/// Runs every point of `plan` on `provider`, resuming from the plan's
/// journal under the output directory.
///
/// Each point runs on its own fork of `clock`. With a virtual clock, parallel
/// execution and distinct deployments per point, points run concurrently;
/// trials within a point are always sequential.
pub fn run_plan(
    plan: &ExperimentPlan,
    provider: &dyn Provider,
    clock: &dyn Clock,
    opts: &RunOptions,
) -> Result<PlanOutcome, EngineError> {
    plan.check()?;
    let run_dir = opts.run_dir(&plan.id);
    let (journal, state) = Journal::open(&run_dir)?;
    let digest = plan.digest();
    match &state.plan_digest {
        Some(d) if *d != digest => {
            return Err(EngineError::PlanMismatch {
                plan_id: plan.id.clone(),
                journal: journal.path().to_path_buf(),
            })
        }
        Some(_) => info!("{}: resuming ({} trials on record)", plan.id, state.trial_count()),
        None => journal.append(&JournalEntry::Plan {
            plan_id: plan.id.clone(),
            plan_digest: digest,
            plan: plan.clone(),
        })?,
    }

    let profile = provider.profile();
    let pending: Vec<AxisPoint> = plan.points().into_iter().filter(|p| !state.is_done(p)).collect();
    let mut fresh = BTreeMap::new();
    if !pending.is_empty() {
        let packages = prepare_packages(plan, profile, opts)?;
        let specs: Vec<_> = pending
            .iter()
            .map(|p| point_spec(plan, p, profile, &packages))
            .collect();
        let keys: BTreeSet<String> = specs.iter().flatten().map(DeploymentSpec::deployment_key).collect();
        let parallel = opts.execution.is_parallel()
            && clock.is_virtual()
            && keys.len() == specs.iter().flatten().count()
            && opts.cold_forcing != ColdForcing::Redeploy;
        let exec = if parallel {
            Execution::Parallel
        } else {
            Execution::Sequential
        };

        let ctx = Ctx {
            plan,
            provider,
            opts,
            journal: &journal,
            recorded: AtomicU64::new(0),
            stopped: AtomicBool::new(false),
        };
        let work: Vec<PointWork> = pending
            .into_iter()
            .zip(specs)
            .map(|(p, s)| (p, s, clock.fork()))
            .collect();
        let results = par::map(exec, work, |(point, spec, pclock)| {
            let existing = state.trials.get(&point).cloned().unwrap_or_default();
            ctx.run_point(&point, spec, existing, pclock.as_ref())
        });
        for r in results {
            let outcome = r?;
            fresh.insert(outcome.point.clone(), outcome);
        }
    }

    let mut outcome = outcome_from_state(plan, &run_dir, &state);
    let mut by_point: BTreeMap<AxisPoint, PointOutcome> =
        outcome.points.drain(..).map(|p| (p.point.clone(), p)).collect();
    by_point.extend(fresh);
    outcome.points = plan.points().into_iter().filter_map(|p| by_point.remove(&p)).collect();
    Ok(outcome)
}
