use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ReportError;
use crate::engine::{Protocol, TrialResult, COLDSTART_METRIC, REQ_PER_S_METRIC};
use crate::provider::InvocationRecord;

pub const EXEC_METRIC: &str = "exec_ms";
pub const RESPONSE_METRIC: &str = "response_ms";
pub const THROUGHPUT_LATENCY_METRIC: &str = "latency_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "ms")]
    Ms,
    #[serde(rename = "MB/s")]
    MbPerS,
    #[serde(rename = "MFLOPS")]
    Mflops,
    #[serde(rename = "req/s")]
    ReqPerS,
    #[serde(rename = "count")]
    Count,
}

impl Unit {
    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Ms => "ms",
            Unit::MbPerS => "MB/s",
            Unit::Mflops => "MFLOPS",
            Unit::ReqPerS => "req/s",
            Unit::Count => "count",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Unit::Ms, Unit::MbPerS, Unit::Mflops, Unit::ReqPerS, Unit::Count]
            .into_iter()
            .find(|u| u.as_str() == s)
    }

    /// Unit implied by a metric's name.
    pub fn for_metric(name: &str) -> Self {
        let n = name.to_ascii_lowercase();
        if n == "mflops" {
            Unit::Mflops
        } else if n == REQ_PER_S_METRIC {
            Unit::ReqPerS
        } else if n.ends_with("_mb_s") {
            Unit::MbPerS
        } else if n.ends_with("_ms") {
            Unit::Ms
        } else {
            Unit::Count
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One observation of a metric, tagged with the validity of its trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub metric: String,
    pub value: f64,
    pub valid: bool,
}

/// Metrics a protocol always reports, in report order.
pub fn protocol_metrics(protocol: Protocol) -> &'static [&'static str] {
    match protocol {
        Protocol::ColdstartPair => &[COLDSTART_METRIC],
        Protocol::Latency => &[EXEC_METRIC, RESPONSE_METRIC],
        Protocol::Throughput => &[REQ_PER_S_METRIC, THROUGHPUT_LATENCY_METRIC],
    }
}

/// Looks `name` up in a handler result: under `metrics`, at the top level,
/// or inside `result`.
pub fn lookup_reported(doc: &Value, name: &str) -> Option<f64> {
    [doc.get("metrics"), Some(doc), doc.get("result")]
        .into_iter()
        .flatten()
        .find_map(|v| v.get(name))
        .and_then(Value::as_f64)
}

fn exec_ms(r: &InvocationRecord) -> f64 {
    r.exec_ms_reported.unwrap_or(r.response_ms)
}

/// Observations of `metric` in one trial.
///
/// Invalid trials contribute observations flagged invalid where a value
/// exists, so they are counted but kept out of the statistics. A valid
/// trial whose result lacks a named pass-through metric is a schema error.
pub fn derive_metric(protocol: Protocol, trial: &TrialResult, metric: &str) -> Result<Vec<Observation>, ReportError> {
    let obs = |value: f64, valid: bool| Observation {
        metric: metric.to_string(),
        value,
        valid,
    };
    let valid = trial.valid;
    Ok(match (protocol, metric) {
        (Protocol::ColdstartPair, COLDSTART_METRIC) => match trial.derived.get(COLDSTART_METRIC) {
            Some(v) => vec![obs(*v, valid)],
            None if valid => {
                return Err(ReportError::Schema {
                    field: COLDSTART_METRIC.into(),
                    context: format!("trial {} at {}", trial.trial, trial.point),
                })
            }
            None => vec![obs(f64::NAN, false)],
        },
        (Protocol::Latency, EXEC_METRIC) => trial
            .records
            .iter()
            .map(|r| obs(exec_ms(r), valid && r.is_ok()))
            .collect(),
        (Protocol::Latency, RESPONSE_METRIC) => trial
            .records
            .iter()
            .map(|r| obs(r.response_ms, valid && r.is_ok()))
            .collect(),
        (Protocol::Throughput, REQ_PER_S_METRIC) => {
            vec![obs(trial.derived.get(REQ_PER_S_METRIC).copied().unwrap_or(0.0), valid)]
        }
        (Protocol::Throughput, THROUGHPUT_LATENCY_METRIC) => {
            trial.records.iter().map(|r| obs(r.response_ms, r.is_ok())).collect()
        }
        (_, name) => {
            let mut out = Vec::new();
            for r in &trial.records {
                let ok = valid && r.is_ok();
                match r.result.as_ref().and_then(|doc| lookup_reported(doc, name)) {
                    Some(v) => out.push(obs(v, ok)),
                    None if ok => {
                        return Err(ReportError::Schema {
                            field: name.to_string(),
                            context: format!("trial {} at {}", trial.trial, trial.point),
                        })
                    }
                    None => out.push(obs(f64::NAN, false)),
                }
            }
            out
        }
    })
}
