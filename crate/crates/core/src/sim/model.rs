use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SimError;
use crate::platform::DeploymentSpec;

const BUILTIN_MODELS: [(&str, &str); 3] = [
    ("aws-like", include_str!("../../sim-models/aws-like.toml")),
    ("default", include_str!("../../sim-models/default.toml")),
    ("google-like", include_str!("../../sim-models/google-like.toml")),
];

/// Key in `base_ms` used when the platform label has no entry.
pub const DEFAULT_LABEL: &str = "default";

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Jitter {
    /// Relative noise bound; cold latencies are scaled by `1 + u`, `u` uniform
    /// in `[-epsilon, epsilon]`.
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Additive cold-start model.
///
/// ```text
/// cold = (base[platform] + runtime_init[language]
///         + imported_bytes / load_bandwidth + mem_coeff / memory_mb) * (1 + u)
/// ```
///
/// A `load_bandwidth_bytes_per_ms` of 0 disables the load term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimModel {
    #[serde(default)]
    pub base_ms: BTreeMap<String, f64>,
    #[serde(default)]
    pub runtime_init_ms: BTreeMap<String, f64>,
    #[serde(default)]
    pub load_bandwidth_bytes_per_ms: f64,
    #[serde(default)]
    pub mem_coeff_ms_mb: f64,
    #[serde(default)]
    pub warm_overhead_ms: f64,
    pub keepalive_s: f64,
    #[serde(default)]
    pub jitter: Jitter,
}

impl SimModel {
    /// A model with every term zero except those set afterwards.
    pub fn zero() -> Self {
        Self {
            base_ms: BTreeMap::new(),
            runtime_init_ms: BTreeMap::new(),
            load_bandwidth_bytes_per_ms: 0.0,
            mem_coeff_ms_mb: 0.0,
            warm_overhead_ms: 0.0,
            keepalive_s: 600.0,
            jitter: Jitter::default(),
        }
    }

    pub fn check(&self) -> Result<(), SimError> {
        let bad = |what: String| Err(SimError::InvalidModel(what));
        let scalars = [
            ("load_bandwidth_bytes_per_ms", self.load_bandwidth_bytes_per_ms),
            ("mem_coeff_ms_mb", self.mem_coeff_ms_mb),
            ("warm_overhead_ms", self.warm_overhead_ms),
            ("keepalive_s", self.keepalive_s),
            ("jitter.epsilon", self.jitter.epsilon),
        ];
        for (name, v) in scalars {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        for (name, v) in self.base_ms.iter().chain(&self.runtime_init_ms) {
            if !(v.is_finite() && *v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if self.jitter.epsilon >= 0.5 {
            return bad(format!("jitter epsilon {} must be < 0.5", self.jitter.epsilon));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, SimError> {
        let m: SimModel = toml::from_str(text).map_err(|e| SimError::InvalidModel(e.to_string()))?;
        m.check()?;
        Ok(m)
    }

    pub fn builtin(name: &str) -> Result<Self, SimError> {
        BUILTIN_MODELS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| Self::parse(text).expect("builtin sim model parses"))
            .ok_or_else(|| SimError::UnknownModel(name.to_string()))
    }

    pub fn builtin_names() -> Vec<&'static str> {
        BUILTIN_MODELS.iter().map(|(n, _)| *n).collect()
    }

    /// Looks `name` up as `<dir>/<name>.toml` in each directory, then among
    /// the builtin models.
    pub fn resolve(name: &str, dirs: &[&Path]) -> Result<Self, SimError> {
        for dir in dirs {
            let path = dir.join(format!("{name}.toml"));
            if path.is_file() {
                let text = std::fs::read_to_string(&path)?;
                return Self::parse(&text);
            }
        }
        Self::builtin(name)
    }

    pub fn base_for(&self, platform: &str) -> f64 {
        self.base_ms
            .get(platform)
            .or_else(|| self.base_ms.get(DEFAULT_LABEL))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn runtime_init_for(&self, language: &str) -> f64 {
        self.runtime_init_ms.get(language).copied().unwrap_or(0.0)
    }

    pub fn load_ms(&self, imported_bytes: u64) -> f64 {
        if self.load_bandwidth_bytes_per_ms > 0.0 {
            imported_bytes as f64 / self.load_bandwidth_bytes_per_ms
        } else {
            0.0
        }
    }

    pub fn memory_ms(&self, memory_mb: u32) -> f64 {
        if memory_mb == 0 {
            return 0.0;
        }
        self.mem_coeff_ms_mb / memory_mb as f64
    }

    /// Cold latency before noise.
    pub fn nominal_cold_ms(&self, platform: &str, spec: &DeploymentSpec) -> f64 {
        self.base_for(platform)
            + self.runtime_init_for(&spec.language.name)
            + self.load_ms(spec.package.manifest.imported_bytes())
            + self.memory_ms(spec.memory_mb)
    }

    /// Injected cold-start cost as the invoke-twice protocol sees it, with no
    /// noise: `cold - warm_overhead`.
    pub fn ground_truth_estimate_ms(&self, platform: &str, spec: &DeploymentSpec) -> f64 {
        self.nominal_cold_ms(platform, spec) - self.warm_overhead_ms
    }
}

/// Seeded noise source, one per deployment.
#[derive(Debug, Clone)]
pub struct JitterStream {
    rng: ChaCha8Rng,
    epsilon: f64,
}

impl JitterStream {
    pub fn new(seed: u64, stream: &str, epsilon: f64) -> Self {
        let mut h = Sha256::new();
        h.update(seed.to_le_bytes());
        h.update(stream.as_bytes());
        let key: [u8; 32] = h.finalize().into();
        Self {
            rng: ChaCha8Rng::from_seed(key),
            epsilon,
        }
    }

    /// Next `u` in `[-epsilon, epsilon]`.
    pub fn next_noise(&mut self) -> f64 {
        if self.epsilon == 0.0 {
            return 0.0;
        }
        self.rng.random_range(-self.epsilon..=self.epsilon)
    }
}

/// One cold-start latency draw in milliseconds.
pub fn sim_cold_latency(model: &SimModel, platform: &str, spec: &DeploymentSpec, stream: &mut JitterStream) -> f64 {
    model.nominal_cold_ms(platform, spec) * (1.0 + stream.next_noise())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::package::{Dependency, PackageArtifact, WorkloadManifest};
    use crate::platform::{Language, Trigger};

    fn spec(memory_mb: u32, deps: Vec<Dependency>) -> DeploymentSpec {
        let mut m = WorkloadManifest::minimal("w", Language::new("python", "3.8"), "builtin:synthetic");
        m.dependencies = deps;
        DeploymentSpec {
            language: Language::new("python", "3.8"),
            memory_mb,
            timeout_s: 10,
            region: "us-east-1".into(),
            trigger: Trigger::Http,
            package: PackageArtifact::declared(m, 0, 0),
            marker: None,
        }
    }

    fn no_noise() -> JitterStream {
        JitterStream::new(0, "t", 0.0)
    }

    #[test]
    fn base_only() {
        let mut m = SimModel::zero();
        m.base_ms.insert(DEFAULT_LABEL.into(), 100.0);
        assert_eq!(sim_cold_latency(&m, "aws", &spec(128, vec![]), &mut no_noise()), 100.0);
    }

    #[test]
    fn memory_term() {
        let mut m = SimModel::zero();
        m.mem_coeff_ms_mb = 102400.0;
        assert_eq!(sim_cold_latency(&m, "aws", &spec(128, vec![]), &mut no_noise()), 800.0);
        assert_eq!(sim_cold_latency(&m, "aws", &spec(1024, vec![]), &mut no_noise()), 100.0);
    }

    #[test]
    fn load_term_counts_only_imported_bytes() {
        let mut m = SimModel::zero();
        m.load_bandwidth_bytes_per_ms = 1000.0;
        let dep = |import| Dependency {
            name: "pad".into(),
            bytes: 50_000_000,
            import_at_init: import,
        };
        assert_eq!(
            sim_cold_latency(&m, "aws", &spec(128, vec![dep(false)]), &mut no_noise()),
            0.0
        );
        assert_eq!(
            sim_cold_latency(&m, "aws", &spec(128, vec![dep(true)]), &mut no_noise()),
            50_000.0
        );
    }

    #[test]
    fn platform_and_language_terms() {
        let mut m = SimModel::zero();
        m.base_ms.insert("google".into(), 300.0);
        m.base_ms.insert(DEFAULT_LABEL.into(), 10.0);
        m.runtime_init_ms.insert("python".into(), 5.0);
        assert_eq!(m.nominal_cold_ms("google", &spec(128, vec![])), 305.0);
        assert_eq!(m.nominal_cold_ms("aws", &spec(128, vec![])), 15.0);
    }

    #[test]
    fn noise_is_bounded_and_seeded() {
        let mut m = SimModel::zero();
        m.base_ms.insert(DEFAULT_LABEL.into(), 100.0);
        let mut a = JitterStream::new(7, "f", 0.05);
        let mut b = JitterStream::new(7, "f", 0.05);
        for _ in 0..1000 {
            let x = sim_cold_latency(&m, "aws", &spec(128, vec![]), &mut a);
            assert!((95.0..=105.0).contains(&x));
            assert_eq!(x, sim_cold_latency(&m, "aws", &spec(128, vec![]), &mut b));
        }
        let mut c = JitterStream::new(8, "f", 0.05);
        assert_ne!(
            sim_cold_latency(&m, "aws", &spec(128, vec![]), &mut a),
            sim_cold_latency(&m, "aws", &spec(128, vec![]), &mut c)
        );
    }

    #[test]
    fn more_memory_never_slower() {
        let m = SimModel::builtin("google-like").unwrap();
        let mut prev = f64::INFINITY;
        for mem in (128..=3008).step_by(64) {
            let c = m.nominal_cold_ms("google", &spec(mem, vec![]));
            assert!(c <= prev);
            prev = c;
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut m = SimModel::zero();
        m.jitter.epsilon = 0.5;
        assert!(m.check().is_err());
        let mut m = SimModel::zero();
        m.warm_overhead_ms = -1.0;
        assert!(m.check().is_err());
        let mut m = SimModel::zero();
        m.runtime_init_ms.insert("java".into(), f64::NAN);
        assert!(m.check().is_err());
    }

    #[test]
    fn builtin_models_parse() {
        for name in SimModel::builtin_names() {
            SimModel::builtin(name).unwrap();
        }
        assert!(SimModel::builtin("nope").is_err());
    }
}
