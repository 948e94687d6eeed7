use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context as _};
use slsbench_core::engine::RunOptions;
use slsbench_core::platform::{apply_overlay, builtin_profiles, PlatformProfile};
use slsbench_core::provider::{HttpProvider, Provider};
use slsbench_core::sim::{LocalSim, SimConfig, SimModel};
use slsbench_core::{Clock, Execution, RealClock, VirtualClock};

use crate::config::{Config, TimeMode};
use crate::{ExecArgs, ExecutionArg, GlobalArgs};

pub const LOCAL_SIM: &str = "local-sim";
pub const HTTP: &str = "http";
pub const DEFAULT_OUTPUT: &str = "slsbench-out";

/// Everything a command needs after flags and the config file are merged.
pub struct Context {
    pub config: Config,
    pub output: PathBuf,
    pub seed: u64,
    pub profiles: Vec<PlatformProfile>,
    pub workload_dirs: Vec<PathBuf>,
}

impl Context {
    pub fn new(global: &GlobalArgs) -> anyhow::Result<Self> {
        let config = Config::load(global.config.as_deref())?;
        let output = global
            .output
            .clone()
            .or_else(|| config.output.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));
        let seed = global.seed.or(config.seed).unwrap_or(0);
        let mut profiles = builtin_profiles();
        if let Some(path) = &global.profile_overlay {
            let text =
                std::fs::read_to_string(path).with_context(|| format!("reading profile overlay {}", path.display()))?;
            profiles = apply_overlay(&profiles, &text)?;
        }
        let mut workload_dirs = global.workloads.clone();
        workload_dirs.extend(config.engine.workloads.iter().cloned());
        Ok(Self {
            config,
            output,
            seed,
            profiles,
            workload_dirs,
        })
    }

    pub fn profile(&self, name: &str) -> anyhow::Result<&PlatformProfile> {
        match self.profiles.iter().find(|p| p.name == name) {
            Some(p) => Ok(p),
            None => bail!(
                "unknown platform {name:?} (known: {})",
                self.profiles
                    .iter()
                    .map(|p| p.name.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        }
    }

    fn sim_model(&self) -> anyhow::Result<SimModel> {
        let name = &self.config.local_sim.model;
        if name.ends_with(".toml") {
            let text = std::fs::read_to_string(name).with_context(|| format!("reading sim model {name}"))?;
            return Ok(SimModel::parse(&text)?);
        }
        Ok(SimModel::builtin(name)?)
    }

    pub fn provider(&self, name: &str) -> anyhow::Result<Box<dyn Provider>> {
        match name {
            LOCAL_SIM => {
                let section = &self.config.local_sim;
                let mut config = SimConfig {
                    scratch_root: Some(
                        section
                            .scratch_root
                            .clone()
                            .unwrap_or_else(|| self.output.join(".scratch")),
                    ),
                    admission: section.admission,
                    seed: Some(self.seed),
                    ..SimConfig::default()
                };
                config.interpreters.extend(section.interpreters.clone());
                let profile = self.profile(&section.platform)?.clone();
                Ok(Box::new(LocalSim::new(profile, self.sim_model()?, config)?))
            }
            HTTP => {
                let profile = self.profile(&self.config.http.platform)?.clone();
                Ok(Box::new(HttpProvider::new(profile, self.config.http.http_config())))
            }
            other => bail!("unknown provider {other:?} (known: {LOCAL_SIM}, {HTTP})"),
        }
    }

    /// The local simulator runs on virtual time unless configured otherwise;
    /// everything else is measured in real time.
    pub fn clock(&self, provider: &str, mode: Option<TimeMode>) -> Box<dyn Clock> {
        let mode = mode.unwrap_or(self.config.local_sim.time_mode);
        if provider == LOCAL_SIM && mode == TimeMode::Virtual {
            Box::new(VirtualClock::new())
        } else {
            Box::new(RealClock::new())
        }
    }

    pub fn run_options(&self, exec: &ExecArgs) -> RunOptions {
        let engine = &self.config.engine;
        let mut opts = RunOptions::new(&self.output);
        opts.cleanup = engine.cleanup;
        opts.pacing = Duration::from_millis(exec.pacing_ms.unwrap_or(engine.pacing_ms));
        opts.cold_forcing = engine.cold_forcing;
        opts.execution = match exec.execution {
            Some(ExecutionArg::Sequential) => Execution::Sequential,
            Some(ExecutionArg::Parallel) => Execution::Parallel,
            None => engine.execution,
        };
        opts.seed = self.seed;
        opts.workload_dirs = self.workload_dirs.clone();
        opts
    }

    pub fn deployments_file(&self) -> PathBuf {
        self.output.join("deployments.json")
    }

    pub fn packages_dir(&self, workload_id: &str) -> PathBuf {
        self.output.join("packages").join(workload_id)
    }
}

pub fn read_json_file(path: &Path) -> anyhow::Result<serde_json::Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
