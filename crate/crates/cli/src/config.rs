use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;
use slsbench_core::engine::ColdForcing;
use slsbench_core::provider::HttpConfig;
use slsbench_core::sim::Admission;
use slsbench_core::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TimeMode {
    #[default]
    Virtual,
    Real,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalSimSection {
    /// Platform profile the simulator emulates.
    pub platform: String,
    /// Builtin model name or path to a model file.
    pub model: String,
    pub time_mode: TimeMode,
    pub scratch_root: Option<PathBuf>,
    pub admission: Admission,
    pub interpreters: BTreeMap<String, Vec<String>>,
}

impl Default for LocalSimSection {
    fn default() -> Self {
        Self {
            platform: "aws".into(),
            model: "default".into(),
            time_mode: TimeMode::Virtual,
            scratch_root: None,
            admission: Admission::Queue,
            interpreters: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpSection {
    pub platform: String,
    pub endpoints: BTreeMap<String, String>,
    pub default_endpoint: Option<String>,
    pub headers: BTreeMap<String, String>,
    pub auth_token: Option<String>,
}

impl Default for HttpSection {
    fn default() -> Self {
        Self {
            platform: "aws".into(),
            endpoints: BTreeMap::new(),
            default_endpoint: None,
            headers: BTreeMap::new(),
            auth_token: None,
        }
    }
}

impl HttpSection {
    pub fn http_config(&self) -> HttpConfig {
        HttpConfig {
            endpoints: self.endpoints.clone(),
            default_endpoint: self.default_endpoint.clone(),
            headers: self.headers.clone(),
            auth_token: self.auth_token.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSection {
    pub pacing_ms: u64,
    pub cold_forcing: ColdForcing,
    pub cleanup: bool,
    pub execution: Execution,
    /// Directories searched for workloads by id.
    pub workloads: Vec<PathBuf>,
}

impl Default for EngineSection {
    fn default() -> Self {
        Self {
            pacing_ms: 1000,
            cold_forcing: ColdForcing::Auto,
            cleanup: true,
            execution: Execution::Parallel,
            workloads: vec![PathBuf::from("workloads")],
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub local_sim: LocalSimSection,
    pub http: HttpSection,
    pub engine: EngineSection,
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Config = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        // Relative paths in the file are relative to the file.
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.engine.workloads.iter_mut().for_each(rebase);
        if let Some(p) = cfg.local_sim.scratch_root.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.output.as_mut() {
            rebase(p);
        }
        if cfg.local_sim.model.ends_with(".toml") {
            let mut p = PathBuf::from(&cfg.local_sim.model);
            rebase(&mut p);
            cfg.local_sim.model = p.display().to_string();
        }
        Ok(cfg)
    }
}
