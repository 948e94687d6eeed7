//! The in-process `builtin:synthetic` workload.
//!
//! Payload (falling back to manifest params): `sleep_ms` (number, default 0),
//! `echo` (any value, returned as-is), `fail` (bool, answer with an error).

use std::io::Write;
use std::path::Path;
use std::time::Duration;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::clock::{ms_to_duration, Clock};
use crate::package::{PackageError, WorkloadManifest, MANIFEST_FILE};
use crate::platform::Language;
use crate::provider::RequestOutcome;

pub const SYNTHETIC_HANDLER: &str = "builtin:synthetic";

/// Sentinel file a warm instance leaves in its scratch directory.
pub const FIRST_RUN_SENTINEL: &str = ".first_run";

/// Size of the filler file that gives the synthetic base package a
/// realistic footprint (504.6 KiB).
pub const SYNTHETIC_BASAL_BYTES: u64 = 516_710;

fn param<'a>(payload: &'a Value, params: &'a Map<String, Value>, key: &str) -> Option<&'a Value> {
    payload.get(key).or_else(|| params.get(key))
}

/// Marks `scratch` as used and reports whether this was its first use.
pub fn take_first_run(scratch: &Path) -> std::io::Result<bool> {
    let path = scratch.join(FIRST_RUN_SENTINEL);
    match std::fs::OpenOptions::new().write(true).create_new(true).open(&path) {
        Ok(_) => Ok(true),
        Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Ok(false),
        Err(e) => Err(e),
    }
}

/// Runs the synthetic handler with `budget` left before the deadline.
pub(super) fn run(
    manifest: &WorkloadManifest,
    payload: &Value,
    scratch: &Path,
    budget: Duration,
    clock: &dyn Clock,
) -> (RequestOutcome, f64) {
    let params: Map<String, Value> = manifest.params.clone().into_iter().collect();
    if param(payload, &params, "fail").and_then(Value::as_bool) == Some(true) {
        return (RequestOutcome::Failed("synthetic failure requested".into()), 0.0);
    }
    let sleep_ms = param(payload, &params, "sleep_ms")
        .and_then(Value::as_f64)
        .filter(|v| v.is_finite() && *v > 0.0)
        .unwrap_or(0.0);
    let sleep = ms_to_duration(sleep_ms);
    if sleep >= budget {
        clock.sleep(budget);
        return (RequestOutcome::TimedOut, budget.as_secs_f64() * 1e3);
    }
    let first_run = match take_first_run(scratch) {
        Ok(f) => f,
        Err(e) => return (RequestOutcome::Failed(format!("scratch directory: {e}")), 0.0),
    };
    clock.sleep(sleep);
    let echo = param(payload, &params, "echo").cloned().unwrap_or(Value::Null);
    let body = json!({
        "result": {"echo": echo},
        "exec_ms": sleep_ms,
        "first_run": first_run,
    });
    (RequestOutcome::Body(body.to_string()), sleep_ms)
}

/// Writes a deployable synthetic workload directory and returns its manifest.
pub fn write_synthetic_workload(
    dir: &Path,
    id: &str,
    language: Language,
    seed: u64,
) -> Result<WorkloadManifest, PackageError> {
    std::fs::create_dir_all(dir.join("lib"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut filler = vec![0u8; SYNTHETIC_BASAL_BYTES as usize];
    rng.fill_bytes(&mut filler);
    std::fs::File::create(dir.join("lib").join("basal.bin"))?.write_all(&filler)?;
    let mut manifest = WorkloadManifest::minimal(id, language, SYNTHETIC_HANDLER);
    manifest.expected_output_schema = vec!["echo".into()];
    std::fs::write(dir.join(MANIFEST_FILE), manifest.to_toml())?;
    Ok(manifest)
}
