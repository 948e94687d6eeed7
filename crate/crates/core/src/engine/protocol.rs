use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{AxisPoint, EngineError};
use crate::clock::Clock;
use crate::provider::{ColdEvidence, DeploymentHandle, InvocationRecord, InvocationStatus, Provider};

pub const COLDSTART_METRIC: &str = "coldstart_est_ms";
pub const REQ_PER_S_METRIC: &str = "req_per_s";

pub const REASON_NEGATIVE: &str = "negative-estimate";
pub const REASON_SECOND_NOT_WARM: &str = "second-not-warm";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub plan_id: String,
    pub point: AxisPoint,
    pub trial: u32,
    pub records: Vec<InvocationRecord>,
    #[serde(default)]
    pub derived: BTreeMap<String, f64>,
    pub valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl TrialResult {
    pub fn new(plan_id: &str, point: &AxisPoint, trial: u32) -> Self {
        Self {
            plan_id: plan_id.to_string(),
            point: point.clone(),
            trial,
            records: Vec::new(),
            derived: BTreeMap::new(),
            valid: true,
            reason: None,
        }
    }

    fn invalidate(&mut self, reason: impl Into<String>) {
        self.valid = false;
        self.reason.get_or_insert_with(|| reason.into());
    }
}

fn failure_reason(r: &InvocationRecord) -> Option<String> {
    match r.status {
        InvocationStatus::Ok => None,
        InvocationStatus::Timeout => Some("timeout".into()),
        InvocationStatus::Error => Some(format!("error: {}", r.error.as_deref().unwrap_or("invocation failed"))),
    }
}

/// Applies the invoke-twice rule to two sequential records.
pub fn coldstart_from_pair(trial: &mut TrialResult, first: InvocationRecord, second: InvocationRecord) {
    let estimate = first.response_ms - second.response_ms;
    for r in [&first, &second] {
        if let Some(reason) = failure_reason(r) {
            trial.invalidate(reason);
        }
    }
    if trial.valid {
        trial.derived.insert(COLDSTART_METRIC.into(), estimate);
        if second.cold_evidence == ColdEvidence::Cold {
            trial.invalidate(REASON_SECOND_NOT_WARM);
        } else if estimate < 0.0 {
            trial.invalidate(REASON_NEGATIVE);
        }
    }
    trial.records = vec![first, second];
}

/// Invokes a cold function twice in sequence and estimates its cold-start
/// latency as the difference of the two response times.
///
/// The caller must have forced a cold state. Record sequence numbers are
/// `seq_base` and `seq_base + 1`.
pub fn run_coldstart_trial(
    provider: &dyn Provider,
    handle: &DeploymentHandle,
    payload: &Value,
    clock: &dyn Clock,
    mut trial: TrialResult,
    seq_base: u64,
) -> Result<TrialResult, EngineError> {
    let timeout = Duration::from_secs(handle.spec.timeout_s as u64);
    let mut first = provider.invoke(handle, payload, timeout, clock)?;
    first.seq = seq_base;
    let mut second = provider.invoke(handle, payload, timeout, clock)?;
    second.seq = seq_base + 1;
    coldstart_from_pair(&mut trial, first, second);
    Ok(trial)
}

/// One invocation, recorded as is.
pub fn run_latency_trial(
    provider: &dyn Provider,
    handle: &DeploymentHandle,
    payload: &Value,
    clock: &dyn Clock,
    mut trial: TrialResult,
    seq: u64,
) -> Result<TrialResult, EngineError> {
    let timeout = Duration::from_secs(handle.spec.timeout_s as u64);
    let mut r = provider.invoke(handle, payload, timeout, clock)?;
    r.seq = seq;
    if let Some(reason) = failure_reason(&r) {
        trial.invalidate(reason);
    }
    trial.records = vec![r];
    Ok(trial)
}

/// `concurrency` workers invoke back to back until `duration` has elapsed
/// on their clocks. Each worker runs on a fork of `clock`. Failed requests
/// are kept as error records. Records come back ordered by start time.
pub fn run_throughput(
    provider: &dyn Provider,
    handle: &DeploymentHandle,
    payload: &Value,
    clock: &dyn Clock,
    concurrency: u32,
    duration: Duration,
) -> Result<Vec<InvocationRecord>, EngineError> {
    if concurrency == 0 {
        return Err(EngineError::Precondition(
            "throughput concurrency must be at least 1".into(),
        ));
    }
    if duration.is_zero() {
        return Ok(Vec::new());
    }
    let timeout = Duration::from_secs(handle.spec.timeout_s as u64);
    let sink: Mutex<Vec<(u32, InvocationRecord)>> = Mutex::new(Vec::new());
    let failure: Mutex<Option<EngineError>> = Mutex::new(None);
    let clocks: Vec<Arc<dyn Clock>> = (0..concurrency).map(|_| clock.fork()).collect();
    let deadline = clock.now_ns() + duration.as_nanos() as u64;
    std::thread::scope(|scope| {
        for (worker, wclock) in clocks.iter().enumerate() {
            let (sink, failure) = (&sink, &failure);
            scope.spawn(move || {
                while wclock.now_ns() < deadline {
                    match provider.invoke(handle, payload, timeout, wclock.as_ref()) {
                        Ok(r) => sink.lock().expect("sink poisoned").push((worker as u32, r)),
                        Err(e) => {
                            failure.lock().expect("failure poisoned").get_or_insert(e.into());
                            return;
                        }
                    }
                }
            });
        }
    });
    if let Some(e) = failure.into_inner().expect("failure poisoned") {
        return Err(e);
    }
    let mut records = sink.into_inner().expect("sink poisoned");
    records.sort_by_key(|(w, r)| (r.t_start_ns, *w));
    let mut out: Vec<InvocationRecord> = records.into_iter().map(|(_, r)| r).collect();
    for (i, r) in out.iter_mut().enumerate() {
        r.seq = i as u64;
    }
    if clock.is_virtual() {
        let end = out.iter().map(|r| r.t_end_ns).max().unwrap_or(deadline).max(deadline);
        clock.sleep(Duration::from_nanos(end - clock.now_ns()));
    }
    Ok(out)
}

/// Requests per second of successful records over the run duration.
pub fn req_per_s(records: &[InvocationRecord], duration: Duration) -> f64 {
    if duration.is_zero() {
        return 0.0;
    }
    records.iter().filter(|r| r.is_ok()).count() as f64 / duration.as_secs_f64()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(ms: f64, status: InvocationStatus, cold: ColdEvidence) -> InvocationRecord {
        InvocationRecord {
            function_id: "f".into(),
            seq: 0,
            t_start_ns: 0,
            t_end_ns: (ms * 1e6) as u64,
            response_ms: ms,
            status,
            result: None,
            raw_body: None,
            error: None,
            cold_evidence: cold,
            exec_ms_reported: None,
            wall_start_unix_ms: 0,
        }
    }

    fn pair(a: f64, b: f64) -> TrialResult {
        let mut t = TrialResult::new("p", &AxisPoint::default(), 0);
        coldstart_from_pair(
            &mut t,
            record(a, InvocationStatus::Ok, ColdEvidence::Unknown),
            record(b, InvocationStatus::Ok, ColdEvidence::Unknown),
        );
        t
    }

    #[test]
    fn estimate_is_the_difference() {
        let t = pair(500.0, 200.0);
        assert!(t.valid);
        assert_eq!(t.derived[COLDSTART_METRIC], 300.0);
        assert_eq!(t.records.len(), 2);
    }

    #[test]
    fn negative_estimate_is_invalid_but_kept() {
        let t = pair(200.0, 500.0);
        assert!(!t.valid);
        assert_eq!(t.reason.as_deref(), Some(REASON_NEGATIVE));
        assert_eq!(t.derived[COLDSTART_METRIC], -300.0);
    }

    #[test]
    fn cold_second_invocation_is_invalid() {
        let mut t = TrialResult::new("p", &AxisPoint::default(), 0);
        coldstart_from_pair(
            &mut t,
            record(500.0, InvocationStatus::Ok, ColdEvidence::Cold),
            record(450.0, InvocationStatus::Ok, ColdEvidence::Cold),
        );
        assert_eq!(t.reason.as_deref(), Some(REASON_SECOND_NOT_WARM));
    }

    #[test]
    fn failed_invocation_names_the_reason() {
        let mut t = TrialResult::new("p", &AxisPoint::default(), 0);
        coldstart_from_pair(
            &mut t,
            record(500.0, InvocationStatus::Timeout, ColdEvidence::Unknown),
            record(100.0, InvocationStatus::Ok, ColdEvidence::Unknown),
        );
        assert!(!t.valid);
        assert_eq!(t.reason.as_deref(), Some("timeout"));
        assert!(!t.derived.contains_key(COLDSTART_METRIC));
    }

    #[test]
    fn throughput_rate() {
        let recs: Vec<_> = (0..120)
            .map(|_| record(1.0, InvocationStatus::Ok, ColdEvidence::Unknown))
            .chain([record(1.0, InvocationStatus::Error, ColdEvidence::Unknown)])
            .collect();
        assert_eq!(req_per_s(&recs, Duration::from_secs(30)), 4.0);
        assert_eq!(req_per_s(&recs, Duration::ZERO), 0.0);
    }
}
