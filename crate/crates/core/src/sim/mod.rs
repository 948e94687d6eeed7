//! Local platform simulator.
//!
//! [`LocalSim`] implements [`Provider`] with a pool of function instances per
//! deployment. An instance is created on a cold invocation, kept warm for the
//! model's keep-alive after its last use, serves at most the profile's
//! `instance_concurrency` requests at a time, and the pool holds at most
//! `instance_limit` instances; excess requests queue or are rejected.
//!
//! Latencies come from [`SimModel`] and are spent on the caller's clock, so
//! with a [`crate::VirtualClock`] a whole sweep runs in milliseconds and is
//! reproducible for a fixed seed. Subprocess handlers take real time, which
//! is then charged to a virtual clock as well.

mod model;
mod process;
mod synthetic;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tempfile::TempDir;
use thiserror::Error;

use crate::clock::{ms_to_duration, Clock};
use crate::package::extract_archive;
use crate::platform::{DeploymentSpec, PlatformProfile};
use crate::provider::{
    function_id_for, timed_request, unix_ms_now, DeploymentHandle, InvocationRecord, LogLine, Provider, ProviderError,
    RequestOutcome, ValidatedDeployment,
};

pub use model::{sim_cold_latency, Jitter, JitterStream, SimModel, DEFAULT_LABEL};
pub use synthetic::{
    take_first_run, write_synthetic_workload, FIRST_RUN_SENTINEL, SYNTHETIC_BASAL_BYTES, SYNTHETIC_HANDLER,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid sim model: {0}")]
    InvalidModel(String),
    #[error("unknown sim model {0:?}")]
    UnknownModel(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// What happens to a request when every instance is busy and the pool is full.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Admission {
    #[default]
    Queue,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Parent of instance scratch and extracted code directories.
    pub scratch_root: Option<PathBuf>,
    pub admission: Admission,
    /// Command prefix per language name for subprocess handlers.
    pub interpreters: BTreeMap<String, Vec<String>>,
    /// Overrides the model's jitter seed.
    pub seed: Option<u64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        let interpreters = [("python", "python3"), ("nodejs", "node"), ("shell", "sh")]
            .into_iter()
            .map(|(l, c)| (l.to_string(), vec![c.to_string()]))
            .collect();
        Self {
            scratch_root: None,
            admission: Admission::Queue,
            interpreters,
            seed: None,
        }
    }
}

struct Instance {
    id: u64,
    scratch: TempDir,
    busy: u32,
    last_used_ns: u64,
    /// Evicted while busy; discarded on release.
    doomed: bool,
}

#[derive(Default)]
struct Pool {
    instances: Vec<Instance>,
    next_id: u64,
}

struct SimDeployment {
    handle: DeploymentHandle,
    pool: Mutex<Pool>,
    freed: Condvar,
    jitter: Mutex<JitterStream>,
    logs: Mutex<Vec<LogLine>>,
    code_dir: Mutex<Option<TempDir>>,
}

struct Admitted {
    instance_id: u64,
    scratch: PathBuf,
    cold: bool,
}

pub struct LocalSim {
    profile: PlatformProfile,
    model: SimModel,
    config: SimConfig,
    scratch_root: PathBuf,
    deployments: Mutex<BTreeMap<String, Arc<SimDeployment>>>,
}

impl LocalSim {
    pub fn new(profile: PlatformProfile, model: SimModel, config: SimConfig) -> Result<Self, SimError> {
        model.check()?;
        let scratch_root = config.scratch_root.clone().unwrap_or_else(std::env::temp_dir);
        std::fs::create_dir_all(&scratch_root)?;
        Ok(Self {
            profile,
            model,
            config,
            scratch_root,
            deployments: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn model(&self) -> &SimModel {
        &self.model
    }

    fn seed(&self) -> u64 {
        self.config.seed.unwrap_or(self.model.jitter.seed)
    }

    fn registry(&self) -> MutexGuard<'_, BTreeMap<String, Arc<SimDeployment>>> {
        self.deployments.lock().expect("sim registry poisoned")
    }

    fn lookup(&self, handle: &DeploymentHandle) -> Result<Arc<SimDeployment>, ProviderError> {
        self.registry()
            .get(&handle.function_id)
            .cloned()
            .ok_or_else(|| ProviderError::NotFound(handle.function_id.clone()))
    }

    fn register(&self, handle: DeploymentHandle) -> Arc<SimDeployment> {
        let dep = Arc::new(SimDeployment {
            jitter: Mutex::new(JitterStream::new(
                self.seed(),
                &handle.function_id,
                self.model.jitter.epsilon,
            )),
            handle,
            pool: Mutex::new(Pool::default()),
            freed: Condvar::new(),
            logs: Mutex::new(Vec::new()),
            code_dir: Mutex::new(None),
        });
        self.registry()
            .entry(dep.handle.function_id.clone())
            .or_insert(dep)
            .clone()
    }

    /// Live instances of a deployment (idle and busy).
    pub fn instance_count(&self, handle: &DeploymentHandle) -> Result<usize, ProviderError> {
        let dep = self.lookup(handle)?;
        let n = dep.pool.lock().expect("pool poisoned").instances.len();
        Ok(n)
    }

    /// Scratch directories of the live instances.
    pub fn scratch_dirs(&self, handle: &DeploymentHandle) -> Result<Vec<PathBuf>, ProviderError> {
        let dep = self.lookup(handle)?;
        let pool = dep.pool.lock().expect("pool poisoned");
        Ok(pool.instances.iter().map(|i| i.scratch.path().to_path_buf()).collect())
    }

    fn admit(&self, dep: &SimDeployment, clock: &dyn Clock) -> Result<Admitted, String> {
        let keepalive_ns = (self.model.keepalive_s * 1e9) as u64;
        let slots = self.profile.instance_concurrency.max(1);
        let limit = self.profile.instance_limit.max(1) as usize;
        let mut pool = dep.pool.lock().expect("pool poisoned");
        loop {
            let now = clock.now_ns();
            let before: Vec<u64> = pool.instances.iter().map(|i| i.id).collect();
            pool.instances
                .retain(|i| i.busy > 0 || now.saturating_sub(i.last_used_ns) <= keepalive_ns);
            for id in before {
                if !pool.instances.iter().any(|i| i.id == id) {
                    dep.log(now, Some(id), "instance-expired", None);
                }
            }

            let warm = pool
                .instances
                .iter_mut()
                .filter(|i| !i.doomed && i.busy < slots)
                .max_by_key(|i| i.last_used_ns);
            if let Some(inst) = warm {
                inst.busy += 1;
                return Ok(Admitted {
                    instance_id: inst.id,
                    scratch: inst.scratch.path().to_path_buf(),
                    cold: false,
                });
            }
            if pool.instances.len() < limit {
                let scratch = tempfile::Builder::new()
                    .prefix("slsbench-instance-")
                    .tempdir_in(&self.scratch_root)
                    .map_err(|e| format!("creating instance scratch directory: {e}"))?;
                let id = pool.next_id;
                pool.next_id += 1;
                let path = scratch.path().to_path_buf();
                pool.instances.push(Instance {
                    id,
                    scratch,
                    busy: 1,
                    last_used_ns: now,
                    doomed: false,
                });
                dep.log(now, Some(id), "instance-created", None);
                return Ok(Admitted {
                    instance_id: id,
                    scratch: path,
                    cold: true,
                });
            }
            match self.config.admission {
                Admission::Reject => {
                    dep.log(now, None, "rejected", None);
                    return Err(format!("instance limit {limit} reached"));
                }
                Admission::Queue => {
                    pool = dep.freed.wait(pool).expect("pool poisoned");
                }
            }
        }
    }

    fn release(&self, dep: &SimDeployment, instance_id: u64, now: u64, discard: bool) {
        let mut pool = dep.pool.lock().expect("pool poisoned");
        if let Some(pos) = pool.instances.iter().position(|i| i.id == instance_id) {
            let inst = &mut pool.instances[pos];
            inst.busy -= 1;
            inst.last_used_ns = inst.last_used_ns.max(now);
            if discard || (inst.doomed && inst.busy == 0) {
                pool.instances.remove(pos);
                dep.log(now, Some(instance_id), "instance-discarded", None);
            }
        }
        drop(pool);
        dep.freed.notify_all();
    }

    /// Extracts the package once per deployment for subprocess handlers.
    fn code_dir(&self, dep: &SimDeployment) -> Result<PathBuf, String> {
        let mut slot = dep.code_dir.lock().expect("code dir poisoned");
        if let Some(d) = slot.as_ref() {
            return Ok(d.path().to_path_buf());
        }
        let dir = tempfile::Builder::new()
            .prefix("slsbench-code-")
            .tempdir_in(&self.scratch_root)
            .map_err(|e| format!("creating code directory: {e}"))?;
        extract_archive(&dep.handle.spec.package.archive_path, dir.path())
            .map_err(|e| format!("extracting package: {e}"))?;
        let path = dir.path().to_path_buf();
        *slot = Some(dir);
        Ok(path)
    }

    fn execute(
        &self,
        dep: &SimDeployment,
        payload: &serde_json::Value,
        scratch: &Path,
        budget: Duration,
        clock: &dyn Clock,
    ) -> (RequestOutcome, f64) {
        let spec = &dep.handle.spec;
        let manifest = &spec.package.manifest;
        match manifest.builtin_name() {
            Some("synthetic") => synthetic::run(manifest, payload, scratch, budget, clock),
            Some(other) => (
                RequestOutcome::Failed(format!("unknown builtin workload {other:?}")),
                0.0,
            ),
            None => {
                let Some(argv) = self.config.interpreters.get(&spec.language.name) else {
                    return (
                        RequestOutcome::Failed(format!("no interpreter configured for {}", spec.language.name)),
                        0.0,
                    );
                };
                let code = match self.code_dir(dep) {
                    Ok(c) => c,
                    Err(e) => return (RequestOutcome::Failed(e), 0.0),
                };
                let imports: Vec<String> = manifest
                    .dependencies
                    .iter()
                    .filter(|d| d.import_at_init)
                    .map(|d| code.join("deps").join(&d.name).display().to_string())
                    .collect();
                let (outcome, elapsed) = process::run_handler(process::HandlerRun {
                    argv,
                    handler: &code.join(&manifest.handler),
                    cwd: scratch,
                    env: vec![
                        ("SLSBENCH_SCRATCH_DIR", scratch.display().to_string()),
                        ("SLSBENCH_CODE_DIR", code.display().to_string()),
                        ("SLSBENCH_FUNCTION_ID", dep.handle.function_id.clone()),
                        ("SLSBENCH_MEMORY_MB", spec.memory_mb.to_string()),
                        ("SLSBENCH_IMPORT_AT_INIT", imports.join(":")),
                    ],
                    stdin: payload.to_string(),
                    timeout: budget,
                });
                let charged = if outcome == RequestOutcome::TimedOut {
                    budget
                } else {
                    elapsed
                };
                if clock.is_virtual() {
                    clock.sleep(charged);
                }
                (outcome, charged.as_secs_f64() * 1e3)
            }
        }
    }

    fn serve(
        &self,
        dep: &SimDeployment,
        payload: &serde_json::Value,
        timeout: Duration,
        clock: &dyn Clock,
    ) -> RequestOutcome {
        let admitted = match self.admit(dep, clock) {
            Ok(a) => a,
            Err(msg) => return RequestOutcome::Failed(msg),
        };
        let id = Some(admitted.instance_id);
        let overhead_ms = if admitted.cold {
            let mut jitter = dep.jitter.lock().expect("jitter poisoned");
            sim_cold_latency(&self.model, &self.profile.name, &dep.handle.spec, &mut jitter)
        } else {
            self.model.warm_overhead_ms
        };
        let overhead = ms_to_duration(overhead_ms);
        if overhead >= timeout {
            clock.sleep(timeout);
            let now = clock.now_ns();
            dep.log(now, id, "timeout", None);
            self.release(dep, admitted.instance_id, now, true);
            return RequestOutcome::TimedOut;
        }
        clock.sleep(overhead);
        if admitted.cold {
            dep.log(clock.now_ns(), id, "init-complete", None);
        }

        let (outcome, exec_ms) = self.execute(dep, payload, &admitted.scratch, timeout - overhead, clock);
        let now = clock.now_ns();
        let discard = match &outcome {
            RequestOutcome::TimedOut => {
                dep.log(now, id, "timeout", Some(exec_ms));
                true
            }
            RequestOutcome::Failed(msg) => {
                dep.log(now, id, &format!("exec-failed: {msg}"), Some(exec_ms));
                false
            }
            RequestOutcome::Body(_) => {
                dep.log(now, id, "exec-complete", Some(exec_ms));
                false
            }
        };
        self.release(dep, admitted.instance_id, now, discard);
        outcome
    }
}

impl SimDeployment {
    fn log(&self, now: u64, instance_id: Option<u64>, message: &str, exec_ms: Option<f64>) {
        self.logs.lock().expect("logs poisoned").push(LogLine {
            timestamp_ns: now,
            function_id: self.handle.function_id.clone(),
            instance_id,
            message: message.to_string(),
            exec_ms,
        });
    }
}

impl Provider for LocalSim {
    fn name(&self) -> &str {
        "local-sim"
    }

    fn profile(&self) -> &PlatformProfile {
        &self.profile
    }

    fn deploy_validated(&self, deployment: ValidatedDeployment) -> Result<DeploymentHandle, ProviderError> {
        let spec: DeploymentSpec = deployment.into_spec();
        let manifest = &spec.package.manifest;
        if !manifest.is_builtin() && !spec.package.archive_path.is_file() {
            return Err(ProviderError::Rejected(format!(
                "package archive {} does not exist",
                spec.package.archive_path.display()
            )));
        }
        let function_id = function_id_for("sim", &spec);
        if let Some(dep) = self.registry().get(&function_id) {
            return Ok(dep.handle.clone());
        }
        let handle = DeploymentHandle {
            provider: self.name().to_string(),
            endpoint: format!("sim://{function_id}"),
            function_id,
            spec,
            created_at_unix_ms: unix_ms_now(),
        };
        Ok(self.register(handle).handle.clone())
    }

    fn invoke(
        &self,
        handle: &DeploymentHandle,
        payload: &serde_json::Value,
        timeout: Duration,
        clock: &dyn Clock,
    ) -> Result<InvocationRecord, ProviderError> {
        let dep = self.lookup(handle)?;
        let schema = &dep.handle.spec.package.manifest.expected_output_schema;
        Ok(timed_request(clock, &handle.function_id, timeout, schema, || {
            self.serve(&dep, payload, timeout, clock)
        }))
    }

    fn teardown(&self, handle: &DeploymentHandle) -> Result<(), ProviderError> {
        let dep = self
            .registry()
            .remove(&handle.function_id)
            .ok_or_else(|| ProviderError::NotFound(handle.function_id.clone()))?;
        let instances = std::mem::take(&mut dep.pool.lock().expect("pool poisoned").instances);
        for inst in instances {
            inst.scratch.close()?;
        }
        if let Some(code) = dep.code_dir.lock().expect("code dir poisoned").take() {
            code.close()?;
        }
        dep.freed.notify_all();
        Ok(())
    }

    fn evict(&self, handle: &DeploymentHandle) -> Result<(), ProviderError> {
        let dep = self.lookup(handle)?;
        let mut pool = dep.pool.lock().expect("pool poisoned");
        let mut evicted = Vec::new();
        pool.instances.retain_mut(|i| {
            if i.busy == 0 {
                evicted.push(i.id);
                false
            } else {
                i.doomed = true;
                true
            }
        });
        drop(pool);
        let now = dep
            .logs
            .lock()
            .expect("logs poisoned")
            .last()
            .map_or(0, |l| l.timestamp_ns);
        for id in evicted {
            dep.log(now, Some(id), "instance-evicted", None);
        }
        Ok(())
    }

    fn fetch_logs(&self, handle: &DeploymentHandle, since_ns: u64) -> Result<Vec<LogLine>, ProviderError> {
        let dep = self.lookup(handle)?;
        let logs = dep.logs.lock().expect("logs poisoned");
        Ok(logs.iter().filter(|l| l.timestamp_ns >= since_ns).cloned().collect())
    }

    fn restore(&self, handle: &DeploymentHandle) -> Result<(), ProviderError> {
        if handle.provider != self.name() {
            return Err(ProviderError::Config(format!(
                "handle belongs to provider {}",
                handle.provider
            )));
        }
        self.register(handle.clone());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::VirtualClock;
    use crate::package::{PackageArtifact, WorkloadManifest};
    use crate::platform::{builtin_profile, Language, Trigger};
    use crate::provider::{deploy, ColdEvidence, InvocationStatus};
    use serde_json::json;

    fn spec() -> DeploymentSpec {
        let m = WorkloadManifest::minimal("syn", Language::new("python", "3.8"), SYNTHETIC_HANDLER);
        DeploymentSpec {
            language: Language::new("python", "3.8"),
            memory_mb: 128,
            timeout_s: 10,
            region: "us-east-1".into(),
            trigger: Trigger::Http,
            package: PackageArtifact::declared(m, 100, 100),
            marker: None,
        }
    }

    fn sim(model: SimModel, scratch: &Path) -> LocalSim {
        let config = SimConfig {
            scratch_root: Some(scratch.to_path_buf()),
            ..SimConfig::default()
        };
        LocalSim::new(builtin_profile("aws").unwrap(), model, config).unwrap()
    }

    fn model() -> SimModel {
        let mut m = SimModel::zero();
        m.base_ms.insert(DEFAULT_LABEL.into(), 200.0);
        m.warm_overhead_ms = 4.0;
        m.keepalive_s = 60.0;
        m
    }

    #[test]
    fn cold_then_warm() {
        let root = tempfile::tempdir().unwrap();
        let s = sim(model(), root.path());
        let h = deploy(&s, spec()).unwrap();
        let clock = VirtualClock::new();
        let p = json!({"sleep_ms": 10});
        let a = s.invoke(&h, &p, Duration::from_secs(5), &clock).unwrap();
        let b = s.invoke(&h, &p, Duration::from_secs(5), &clock).unwrap();
        assert_eq!(a.response_ms, 210.0);
        assert_eq!(b.response_ms, 14.0);
        assert_eq!(a.cold_evidence, ColdEvidence::Cold);
        assert_eq!(b.cold_evidence, ColdEvidence::Warm);
        assert_eq!(a.exec_ms_reported, Some(10.0));
    }

    #[test]
    fn keepalive_expiry_makes_the_next_call_cold() {
        let root = tempfile::tempdir().unwrap();
        let s = sim(model(), root.path());
        let h = deploy(&s, spec()).unwrap();
        let clock = VirtualClock::new();
        s.invoke(&h, &json!({}), Duration::from_secs(5), &clock).unwrap();
        clock.sleep(Duration::from_secs(59));
        let warm = s.invoke(&h, &json!({}), Duration::from_secs(5), &clock).unwrap();
        assert_eq!(warm.cold_evidence, ColdEvidence::Warm);
        clock.sleep(Duration::from_secs(61));
        let cold = s.invoke(&h, &json!({}), Duration::from_secs(5), &clock).unwrap();
        assert_eq!(cold.cold_evidence, ColdEvidence::Cold);
        let logs = s.fetch_logs(&h, 0).unwrap();
        assert!(logs.iter().any(|l| l.message == "instance-expired"));
    }

    #[test]
    fn evict_forces_a_cold_start() {
        let root = tempfile::tempdir().unwrap();
        let s = sim(model(), root.path());
        let h = deploy(&s, spec()).unwrap();
        let clock = VirtualClock::new();
        s.invoke(&h, &json!({}), Duration::from_secs(5), &clock).unwrap();
        s.evict(&h).unwrap();
        assert_eq!(s.instance_count(&h).unwrap(), 0);
        let r = s.invoke(&h, &json!({}), Duration::from_secs(5), &clock).unwrap();
        assert_eq!(r.cold_evidence, ColdEvidence::Cold);
        assert_eq!(r.response_ms, 200.0);
    }

    #[test]
    fn init_longer_than_timeout_times_out_and_discards() {
        let root = tempfile::tempdir().unwrap();
        let s = sim(model(), root.path());
        let h = deploy(&s, spec()).unwrap();
        let clock = VirtualClock::new();
        let r = s.invoke(&h, &json!({}), Duration::from_millis(100), &clock).unwrap();
        assert_eq!(r.status, InvocationStatus::Timeout);
        assert_eq!(r.response_ms, 100.0);
        assert_eq!(s.instance_count(&h).unwrap(), 0);
    }

    #[test]
    fn teardown_removes_scratch_and_is_not_repeatable() {
        let root = tempfile::tempdir().unwrap();
        let s = sim(model(), root.path());
        let h = deploy(&s, spec()).unwrap();
        let clock = VirtualClock::new();
        s.invoke(&h, &json!({}), Duration::from_secs(5), &clock).unwrap();
        let dirs = s.scratch_dirs(&h).unwrap();
        assert_eq!(dirs.len(), 1);
        assert!(dirs[0].is_dir());
        s.teardown(&h).unwrap();
        assert!(!dirs[0].exists());
        assert!(matches!(s.teardown(&h), Err(ProviderError::NotFound(_))));
        assert!(matches!(
            s.invoke(&h, &json!({}), Duration::from_secs(1), &clock),
            Err(ProviderError::NotFound(_))
        ));
    }

    #[test]
    fn deploy_is_idempotent() {
        let root = tempfile::tempdir().unwrap();
        let s = sim(model(), root.path());
        let a = deploy(&s, spec()).unwrap();
        let b = deploy(&s, spec()).unwrap();
        assert_eq!(a, b);
        let mut other = spec();
        other.marker = Some("x".into());
        assert_ne!(deploy(&s, other).unwrap().function_id, a.function_id);
    }

    #[test]
    fn rejecting_pool_fails_requests_beyond_the_limit() {
        let root = tempfile::tempdir().unwrap();
        let mut profile = builtin_profile("aws").unwrap();
        profile.instance_limit = 1;
        let config = SimConfig {
            scratch_root: Some(root.path().to_path_buf()),
            admission: Admission::Reject,
            ..SimConfig::default()
        };
        let s = Arc::new(LocalSim::new(profile, model(), config).unwrap());
        let h = deploy(s.as_ref(), spec()).unwrap();
        let clock = crate::clock::RealClock::new();
        let (s2, h2) = (s.clone(), h.clone());
        let slow = std::thread::spawn(move || {
            s2.invoke(&h2, &json!({"sleep_ms": 600}), Duration::from_secs(5), &clock)
                .unwrap()
        });
        std::thread::sleep(Duration::from_millis(300));
        let clock = crate::clock::RealClock::new();
        let r = s.invoke(&h, &json!({}), Duration::from_secs(5), &clock).unwrap();
        assert_eq!(r.status, InvocationStatus::Error);
        assert!(r.error.unwrap().contains("instance limit"));
        assert!(slow.join().unwrap().is_ok());
    }

    #[test]
    fn queued_requests_wait_for_a_free_instance() {
        let root = tempfile::tempdir().unwrap();
        let mut profile = builtin_profile("aws").unwrap();
        profile.instance_limit = 2;
        let config = SimConfig {
            scratch_root: Some(root.path().to_path_buf()),
            ..SimConfig::default()
        };
        let s = LocalSim::new(profile, model(), config).unwrap();
        let h = deploy(&s, spec()).unwrap();
        let base = VirtualClock::new();
        std::thread::scope(|scope| {
            for _ in 0..8 {
                let clock = base.fork();
                let (s, h) = (&s, &h);
                scope.spawn(move || {
                    for _ in 0..5 {
                        let r = s
                            .invoke(h, &json!({"sleep_ms": 1}), Duration::from_secs(5), clock.as_ref())
                            .unwrap();
                        assert!(r.is_ok());
                        assert!(s.instance_count(h).unwrap() <= 2);
                    }
                });
            }
        });
        assert!(s.instance_count(&h).unwrap() <= 2);
    }

    #[test]
    fn jitter_is_reproducible_per_seed() {
        let root = tempfile::tempdir().unwrap();
        let mut m = model();
        m.jitter.epsilon = 0.1;
        let run = |seed| {
            let config = SimConfig {
                scratch_root: Some(root.path().to_path_buf()),
                seed: Some(seed),
                ..SimConfig::default()
            };
            let s = LocalSim::new(builtin_profile("aws").unwrap(), m.clone(), config).unwrap();
            let h = deploy(&s, spec()).unwrap();
            let clock = VirtualClock::new();
            (0..5)
                .map(|_| {
                    s.evict(&h).unwrap();
                    s.invoke(&h, &json!({}), Duration::from_secs(5), &clock)
                        .unwrap()
                        .response_ms
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(1), run(1));
        assert_ne!(run(1), run(2));
    }
}
