use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::EngineError;
use crate::package::SizeVariant;

pub const DEFAULT_REPETITIONS: u32 = 20;

/// Label of the unpadded package on the `package_variant` axis.
pub const BASE_VARIANT: &str = "base";

/// Workload id that makes the engine generate the synthetic workload.
pub const SYNTHETIC_WORKLOAD: &str = "synthetic";

const MIB: f64 = 1024.0 * 1024.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    ColdstartPair,
    Latency,
    Throughput,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::ColdstartPair => "coldstart-pair",
            Protocol::Latency => "latency",
            Protocol::Throughput => "throughput",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisName {
    Language,
    MemoryMb,
    PackageVariant,
    Region,
    Concurrency,
}

impl AxisName {
    pub fn as_str(self) -> &'static str {
        match self {
            AxisName::Language => "language",
            AxisName::MemoryMb => "memory_mb",
            AxisName::PackageVariant => "package_variant",
            AxisName::Region => "region",
            AxisName::Concurrency => "concurrency",
        }
    }
}

/// Axis values are written as numbers or strings in plan files and kept as
/// their string form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisValue {
    Int(i64),
    Text(String),
}

impl fmt::Display for AxisValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AxisValue::Int(i) => write!(f, "{i}"),
            AxisValue::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: AxisName,
    pub values: Vec<AxisValue>,
}

/// Defaults for every point, overridden per point by the axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointDefaults {
    /// `name` or `name:version`; an empty version takes the profile default.
    pub language: String,
    pub memory_mb: u32,
    pub timeout_s: u32,
    /// Defaults to the profile's first region.
    pub region: Option<String>,
    pub concurrency: u32,
}

impl Default for PointDefaults {
    fn default() -> Self {
        Self {
            language: "python".into(),
            memory_mb: 128,
            timeout_s: 60,
            region: None,
            concurrency: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThroughputParams {
    pub duration_s: f64,
}

impl Default for ThroughputParams {
    fn default() -> Self {
        Self { duration_s: 30.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub id: String,
    pub provider: String,
    pub workload: String,
    pub protocol: Protocol,
    #[serde(default = "default_repetitions")]
    pub repetitions: u32,
    #[serde(default)]
    pub axes: Vec<Axis>,
    #[serde(default)]
    pub defaults: PointDefaults,
    /// Sent with every invocation.
    #[serde(default = "empty_payload")]
    pub payload: serde_json::Value,
    #[serde(default)]
    pub package_variants: Vec<SizeVariant>,
    #[serde(default)]
    pub throughput: ThroughputParams,
    /// Metrics to report in addition to the protocol's own.
    #[serde(default)]
    pub metrics: Vec<String>,
}

fn default_repetitions() -> u32 {
    DEFAULT_REPETITIONS
}

fn empty_payload() -> serde_json::Value {
    serde_json::json!({})
}

/// One assignment of a value to every axis, in axis order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct AxisPoint(pub Vec<(String, String)>);

impl AxisPoint {
    pub fn get(&self, axis: AxisName) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == axis.as_str()).map(|(_, v)| v.as_str())
    }

    /// `axis=value` pairs joined by `;`, or `all` for a plan without axes.
    pub fn label(&self) -> String {
        if self.0.is_empty() {
            return "all".into();
        }
        self.0
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

impl fmt::Display for AxisPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl ExperimentPlan {
    pub fn parse(text: &str) -> Result<Self, EngineError> {
        let plan: ExperimentPlan = toml::from_str(text).map_err(|e| EngineError::InvalidPlan(e.to_string()))?;
        plan.check()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self, EngineError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| EngineError::InvalidPlan(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plan serializes to TOML")
    }

    /// Structural checks that need no profile.
    pub fn check(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::InvalidPlan(format!("{}: {m}", self.id)));
        if self.id.is_empty() || self.id.contains(['/', '\\']) || self.id.starts_with('.') {
            return bad("id must be a plain file name".into());
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        let mut seen = Vec::new();
        for axis in &self.axes {
            if seen.contains(&axis.name) {
                return bad(format!("axis {} appears twice", axis.name.as_str()));
            }
            seen.push(axis.name);
            if axis.values.is_empty() {
                return bad(format!("axis {} has no values", axis.name.as_str()));
            }
            for v in &axis.values {
                let s = v.to_string();
                match axis.name {
                    AxisName::MemoryMb | AxisName::Concurrency if s.parse::<u32>().is_err() => {
                        return bad(format!(
                            "{} value {s:?} is not a non-negative integer",
                            axis.name.as_str()
                        ));
                    }
                    AxisName::PackageVariant
                        if s != BASE_VARIANT && !self.package_variants.iter().any(|p| p.label == s) =>
                    {
                        return bad(format!("package variant {s:?} is not declared"));
                    }
                    _ => {}
                }
            }
        }
        if seen.contains(&AxisName::Concurrency) && self.protocol != Protocol::Throughput {
            return bad("the concurrency axis needs the throughput protocol".into());
        }
        if !(self.throughput.duration_s.is_finite() && self.throughput.duration_s >= 0.0) {
            return bad("throughput duration must be >= 0".into());
        }
        Ok(())
    }

    /// Cartesian product of the axes, first axis outermost.
    pub fn points(&self) -> Vec<AxisPoint> {
        let mut points = vec![AxisPoint::default()];
        for axis in &self.axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.0.push((axis.name.as_str().to_string(), v.to_string()));
                        q
                    })
                })
                .collect();
        }
        points
    }

    /// Digest of the plan document, recorded in the journal so a resumed run
    /// refuses a different plan under the same id.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("plan serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

fn axis(name: AxisName, values: &[&str]) -> Axis {
    Axis {
        name,
        values: values
            .iter()
            .map(|v| match v.parse::<i64>() {
                Ok(i) => AxisValue::Int(i),
                Err(_) => AxisValue::Text(v.to_string()),
            })
            .collect(),
    }
}

const MEMORY_AXIS: [&str; 5] = ["128", "256", "512", "1024", "2048"];

/// Package-size sweep: the base package, then three padding sizes without
/// and with loading the padding at init.
pub fn package_size_variants() -> Vec<SizeVariant> {
    let sizes = [("2.8mb", 2.8), ("21.9mb", 21.9), ("48.6mb", 48.6)];
    let mut out = Vec::new();
    for import in [false, true] {
        for (label, mb) in sizes {
            let suffix = if import { "import" } else { "noimport" };
            out.push(SizeVariant::new(
                format!("{label}-{suffix}"),
                (mb * MIB).round() as i64,
                import,
            ));
        }
    }
    out
}

fn coldstart(id: &str, axes: Vec<Axis>) -> ExperimentPlan {
    ExperimentPlan {
        id: id.into(),
        provider: "local-sim".into(),
        workload: SYNTHETIC_WORKLOAD.into(),
        protocol: Protocol::ColdstartPair,
        repetitions: DEFAULT_REPETITIONS,
        axes,
        defaults: PointDefaults::default(),
        payload: empty_payload(),
        package_variants: Vec::new(),
        throughput: ThroughputParams::default(),
        metrics: Vec::new(),
    }
}

/// Workloads with a builtin memory sweep, with the metric each reports
/// beyond execution time.
const LATENCY_WORKLOADS: [(&str, Option<&str>); 9] = [
    ("sls-fib", None),
    ("sls-matrixMul", None),
    ("sls-linpack", Some("mflops")),
    ("sls-dd", Some("write_mb_s")),
    ("sls-sequentialIO", Some("read_mb_s")),
    ("sls-randomIO", Some("read_mb_s")),
    ("sls-image", None),
    ("sls-mapreduce", None),
    ("sls-lr-serving", None),
];

/// Ready-made plans for the cold-start studies, the per-workload memory
/// sweeps and the throughput study.
pub fn builtin_sweeps() -> Vec<ExperimentPlan> {
    let mut plans = vec![
        coldstart(
            "coldstart-language",
            vec![axis(AxisName::Language, &["python", "nodejs", "java"])],
        ),
        coldstart("coldstart-memory", vec![axis(AxisName::MemoryMb, &MEMORY_AXIS)]),
    ];
    let mut package = coldstart("coldstart-package", Vec::new());
    package.package_variants = package_size_variants();
    let labels: Vec<String> = std::iter::once(BASE_VARIANT.to_string())
        .chain(package.package_variants.iter().map(|v| v.label.clone()))
        .collect();
    package.axes = vec![axis(
        AxisName::PackageVariant,
        &labels.iter().map(String::as_str).collect::<Vec<_>>(),
    )];
    plans.push(package);

    for (workload, metric) in LATENCY_WORKLOADS {
        let mut p = coldstart(
            &format!("latency-{workload}"),
            vec![axis(AxisName::MemoryMb, &MEMORY_AXIS)],
        );
        p.workload = workload.into();
        p.protocol = Protocol::Latency;
        p.defaults.timeout_s = 300;
        p.metrics = metric.map(|m| vec![m.to_string()]).unwrap_or_default();
        plans.push(p);
    }

    let mut tp = coldstart(
        "synthetic-throughput",
        vec![axis(AxisName::Concurrency, &["1", "4", "16"])],
    );
    tp.protocol = Protocol::Throughput;
    tp.payload = serde_json::json!({"sleep_ms": 250});
    plans.push(tp);
    plans
}

pub fn builtin_sweep(name: &str) -> Option<ExperimentPlan> {
    builtin_sweeps().into_iter().find(|p| p.id == name)
}
