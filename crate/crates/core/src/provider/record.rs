use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::clock::Clock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InvocationStatus {
    Ok,
    Error,
    Timeout,
}

/// Cold/warm ground truth, available when the workload reports `first_run`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColdEvidence {
    #[default]
    Unknown,
    Cold,
    Warm,
}

/// One timed invocation as seen by the client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvocationRecord {
    pub function_id: String,
    /// Ordinal within the experiment; assigned by the caller.
    pub seq: u64,
    pub t_start_ns: u64,
    pub t_end_ns: u64,
    pub response_ms: f64,
    pub status: InvocationStatus,
    /// The parsed response document.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    /// Raw body, kept when it could not be parsed or failed the schema.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_body: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub cold_evidence: ColdEvidence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exec_ms_reported: Option<f64>,
    /// Wall-clock start, unix milliseconds. Never used for durations.
    pub wall_start_unix_ms: u64,
}

impl InvocationRecord {
    pub fn is_ok(&self) -> bool {
        self.status == InvocationStatus::Ok
    }
}

/// What the transport produced, before timing is attached.
#[derive(Debug, Clone, PartialEq)]
pub enum RequestOutcome {
    Body(String),
    TimedOut,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedResponse {
    pub status: InvocationStatus,
    pub result: Option<Value>,
    pub raw_body: Option<String>,
    pub error: Option<String>,
    pub cold_evidence: ColdEvidence,
    pub exec_ms: Option<f64>,
}

/// Parses a workload response document.
///
/// Each field in `schema` must be present either at the top level or inside
/// the `result` object; otherwise the invocation counts as an error and the
/// raw body is kept.
pub fn parse_response(body: &str, schema: &[String]) -> ParsedResponse {
    let failed = |msg: String| ParsedResponse {
        status: InvocationStatus::Error,
        result: None,
        raw_body: Some(body.to_string()),
        error: Some(msg),
        cold_evidence: ColdEvidence::Unknown,
        exec_ms: None,
    };
    let doc: Value = match serde_json::from_str(body) {
        Ok(v) => v,
        Err(e) => return failed(format!("unparseable response: {e}")),
    };
    let Some(obj) = doc.as_object() else {
        return failed("response is not a key-value document".into());
    };
    let nested = obj.get("result").and_then(Value::as_object);
    let missing: Vec<&str> = schema
        .iter()
        .filter(|f| !obj.contains_key(f.as_str()) && !nested.is_some_and(|r| r.contains_key(f.as_str())))
        .map(String::as_str)
        .collect();
    let cold_evidence = match obj.get("first_run").and_then(Value::as_bool) {
        Some(true) => ColdEvidence::Cold,
        Some(false) => ColdEvidence::Warm,
        None => ColdEvidence::Unknown,
    };
    let exec_ms = obj
        .get("exec_ms")
        .and_then(Value::as_f64)
        .filter(|v| v.is_finite() && *v >= 0.0);
    if !missing.is_empty() {
        return ParsedResponse {
            cold_evidence,
            exec_ms,
            ..failed(format!("schema mismatch: missing {}", missing.join(", ")))
        };
    }
    ParsedResponse {
        status: InvocationStatus::Ok,
        result: Some(doc),
        raw_body: None,
        error: None,
        cold_evidence,
        exec_ms,
    }
}

/// Runs `request` between two readings of `clock` and builds the record.
///
/// A timed-out request ends exactly at the deadline.
pub fn timed_request<F>(
    clock: &dyn Clock,
    function_id: &str,
    timeout: Duration,
    schema: &[String],
    request: F,
) -> InvocationRecord
where
    F: FnOnce() -> RequestOutcome,
{
    let wall_start_unix_ms = super::unix_ms_now();
    let t_start_ns = clock.now_ns();
    let outcome = request();
    let mut t_end_ns = clock.now_ns().max(t_start_ns);
    let parsed = match outcome {
        RequestOutcome::Body(body) => parse_response(&body, schema),
        RequestOutcome::TimedOut => {
            t_end_ns = t_start_ns + timeout.as_nanos() as u64;
            ParsedResponse {
                status: InvocationStatus::Timeout,
                result: None,
                raw_body: None,
                error: Some(format!("timed out after {timeout:?}")),
                cold_evidence: ColdEvidence::Unknown,
                exec_ms: None,
            }
        }
        RequestOutcome::Failed(msg) => ParsedResponse {
            status: InvocationStatus::Error,
            result: None,
            raw_body: None,
            error: Some(msg),
            cold_evidence: ColdEvidence::Unknown,
            exec_ms: None,
        },
    };
    InvocationRecord {
        function_id: function_id.to_string(),
        seq: 0,
        t_start_ns,
        t_end_ns,
        response_ms: (t_end_ns - t_start_ns) as f64 / 1e6,
        status: parsed.status,
        result: parsed.result,
        raw_body: parsed.raw_body,
        error: parsed.error,
        cold_evidence: parsed.cold_evidence,
        exec_ms_reported: parsed.exec_ms,
        wall_start_unix_ms,
    }
}
