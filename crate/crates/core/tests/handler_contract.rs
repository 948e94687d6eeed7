//! Subprocess handlers under the local simulator: JSON in on stdin, handler
//! result out on stdout, nonzero exit is an error, and `first_run` comes from
//! a sentinel in the instance scratch directory.

use std::path::Path;
use std::time::Duration;

use serde_json::json;
use slsbench_core::package::{build_package, Dependency, PackageArtifact, WorkloadManifest};
use slsbench_core::platform::{builtin_profile, DeploymentSpec, Language, Trigger};
use slsbench_core::provider::{deploy, ColdEvidence, InvocationStatus, Provider};
use slsbench_core::sim::{LocalSim, SimConfig, SimModel, DEFAULT_LABEL};
use slsbench_core::{Clock, VirtualClock};

const PY_HANDLER: &str = r#"
import json, os, sys, time
t0 = time.perf_counter()
event = json.load(sys.stdin)
sentinel = os.path.join(os.environ["SLSBENCH_SCRATCH_DIR"], ".first_run")
first = not os.path.exists(sentinel)
open(sentinel, "w").close()
if event.get("fail"):
    sys.stderr.write("asked to fail\n")
    sys.exit(4)
imports = [p for p in os.environ.get("SLSBENCH_IMPORT_AT_INIT", "").split(":") if p]
print(json.dumps({
    "result": {"doubled": event.get("n", 0) * 2, "imports": len(imports), "cwd_is_scratch": os.getcwd() == os.environ["SLSBENCH_SCRATCH_DIR"]},
    "exec_ms": (time.perf_counter() - t0) * 1000.0,
    "first_run": first,
}))
"#;

fn package(dir: &Path, out: &Path) -> PackageArtifact {
    std::fs::write(dir.join("handler.py"), PY_HANDLER).unwrap();
    std::fs::create_dir_all(dir.join("deps/lib")).unwrap();
    std::fs::write(dir.join("deps/lib/data.bin"), [7u8; 64]).unwrap();
    let mut m = WorkloadManifest::minimal("doubler", Language::new("python", "3.8"), "handler.py");
    m.expected_output_schema = vec!["doubled".into()];
    m.dependencies.push(Dependency {
        name: "lib".into(),
        bytes: 64,
        import_at_init: true,
    });
    build_package(dir, &m, out).unwrap()
}

fn setup() -> (tempfile::TempDir, LocalSim, DeploymentSpec) {
    let root = tempfile::tempdir().unwrap();
    let (src, out, scratch) = (
        root.path().join("src"),
        root.path().join("out"),
        root.path().join("scratch"),
    );
    for d in [&src, &out] {
        std::fs::create_dir_all(d).unwrap();
    }
    let artifact = package(&src, &out);
    let mut model = SimModel::zero();
    model.base_ms.insert(DEFAULT_LABEL.into(), 250.0);
    let config = SimConfig {
        scratch_root: Some(scratch),
        ..SimConfig::default()
    };
    let sim = LocalSim::new(builtin_profile("aws").unwrap(), model, config).unwrap();
    let spec = DeploymentSpec {
        language: Language::new("python", "3.8"),
        memory_mb: 256,
        timeout_s: 20,
        region: "us-east-1".into(),
        trigger: Trigger::Http,
        package: artifact,
        marker: None,
    };
    (root, sim, spec)
}

#[test]
fn first_run_is_true_exactly_once_per_instance() {
    let (_root, sim, spec) = setup();
    let h = deploy(&sim, spec).unwrap();
    let clock = VirtualClock::new();
    let timeout = Duration::from_secs(20);
    let a = sim.invoke(&h, &json!({"n": 21}), timeout, &clock).unwrap();
    let b = sim.invoke(&h, &json!({"n": 1}), timeout, &clock).unwrap();
    assert_eq!(a.status, InvocationStatus::Ok, "{a:?}");
    assert_eq!(a.result.as_ref().unwrap()["result"]["doubled"], 42);
    assert_eq!(a.result.as_ref().unwrap()["result"]["imports"], 1);
    assert_eq!(a.result.as_ref().unwrap()["result"]["cwd_is_scratch"], true);
    assert_eq!(a.cold_evidence, ColdEvidence::Cold);
    assert_eq!(b.cold_evidence, ColdEvidence::Warm);
    // Virtual time advances by the injected cold start plus the real handler time.
    assert!(a.response_ms >= 250.0);
    assert!(a.response_ms >= a.exec_ms_reported.unwrap());

    sim.evict(&h).unwrap();
    let c = sim.invoke(&h, &json!({"n": 1}), timeout, &clock).unwrap();
    assert_eq!(c.cold_evidence, ColdEvidence::Cold);
}

#[test]
fn nonzero_exit_is_an_invocation_error() {
    let (_root, sim, spec) = setup();
    let h = deploy(&sim, spec).unwrap();
    let r = sim
        .invoke(
            &h,
            &json!({"fail": true}),
            Duration::from_secs(20),
            &VirtualClock::new(),
        )
        .unwrap();
    assert_eq!(r.status, InvocationStatus::Error);
    assert!(r.error.unwrap().contains("asked to fail"));
    let logs = sim.fetch_logs(&h, 0).unwrap();
    assert!(logs.iter().any(|l| l.message.starts_with("exec-failed")));
}

#[test]
fn teardown_removes_scratch_and_code() {
    let (root, sim, spec) = setup();
    let h = deploy(&sim, spec).unwrap();
    let clock = VirtualClock::new();
    sim.invoke(&h, &json!({"n": 1}), Duration::from_secs(20), &clock)
        .unwrap();
    let scratch_root = root.path().join("scratch");
    assert!(std::fs::read_dir(&scratch_root).unwrap().count() >= 2);
    sim.teardown(&h).unwrap();
    assert_eq!(std::fs::read_dir(&scratch_root).unwrap().count(), 0);
    assert!(clock.now_ns() > 0);
}
