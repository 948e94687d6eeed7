use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_slsbench");

fn slsbench(out: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .arg("--quiet")
        .arg("--output")
        .arg(out)
        .args(args)
        .env_remove("SLSBENCH_CONFIG")
        .env_remove("SLSBENCH_OUTPUT")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const HANDLER: &str = r#"
import json, os, sys
event = json.load(sys.stdin)
sentinel = os.path.join(os.environ["SLSBENCH_SCRATCH_DIR"], ".first_run")
first = not os.path.exists(sentinel)
open(sentinel, "w").close()
if event.get("crash"):
    sys.exit(3)
print(json.dumps({"result": {"greeting": "hello " + event.get("name", "")}, "exec_ms": 0.5, "first_run": first}))
"#;

fn write_workload(root: &Path) -> std::path::PathBuf {
    let dir = root.join("workloads").join("hello");
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("handler.py"), HANDLER).unwrap();
    std::fs::write(
        dir.join("workload.manifest"),
        "id = \"hello\"\nlanguage = \"python:3.8\"\nhandler = \"handler.py\"\nexpected_output_schema = [\"greeting\"]\n",
    )
    .unwrap();
    dir
}

#[test]
fn exit_codes_distinguish_usage_violations_and_runtime_errors() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("out");
    assert_eq!(slsbench(&out, &["frobnicate"]).status.code(), Some(3));
    assert_eq!(slsbench(&out, &["sweep", "no-such-sweep"]).status.code(), Some(3));
    assert_eq!(slsbench(&out, &["platforms", "show", "nimbus"]).status.code(), Some(2));

    let off_grid = slsbench(&out, &["validate", "synthetic", "--platform", "aws", "--memory", "130"]);
    assert_eq!(off_grid.status.code(), Some(1));
    assert!(stdout(&off_grid).contains("next valid 192 MB"), "{}", stdout(&off_grid));
    assert_eq!(
        slsbench(&out, &["validate", "synthetic", "--platform", "aws", "--memory", "192"])
            .status
            .code(),
        Some(0)
    );
}

#[test]
fn platforms_list_and_show() {
    let d = tempfile::tempdir().unwrap();
    let o = slsbench(d.path(), &["platforms", "list"]);
    assert_eq!(stdout(&o), "alibaba\naws\nazure\ngoogle\n");
    let o = slsbench(d.path(), &["platforms", "show", "google"]);
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["memory_max_mb"], 2048);
}

#[test]
fn profile_overlay_patches_limits() {
    let d = tempfile::tempdir().unwrap();
    let overlay = d.path().join("overlay.toml");
    std::fs::write(&overlay, "[aws]\ntimeout_max_s = 30\n").unwrap();
    let o = slsbench(
        d.path(),
        &[
            "--profile-overlay",
            overlay.to_str().unwrap(),
            "validate",
            "synthetic",
            "--platform",
            "aws",
            "--timeout",
            "60",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("exceeds maximum 30 s"));
}

#[test]
fn package_builds_requested_variants() {
    let d = tempfile::tempdir().unwrap();
    let o = slsbench(
        d.path(),
        &[
            "package",
            "synthetic",
            "--variant",
            "small:4096",
            "--variant",
            "big:65536:import",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let artifacts: Vec<Value> = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(artifacts.len(), 3);
    assert!(artifacts[2]["unzipped_bytes"].as_u64() > artifacts[0]["unzipped_bytes"].as_u64());
    assert_eq!(artifacts[2]["manifest"]["dependencies"][0]["import_at_init"], true);
    assert_eq!(
        slsbench(d.path(), &["package", "synthetic", "--variant", "oops"])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn deploy_invoke_and_clean_a_subprocess_handler() {
    let d = tempfile::tempdir().unwrap();
    write_workload(d.path());
    let out = d.path().join("out");
    let workloads = d.path().join("workloads");
    let w = workloads.to_str().unwrap();

    let o = slsbench(&out, &["--workloads", w, "deploy", "hello", "--memory", "256"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let function = stdout(&o).trim().to_string();
    assert!(function.starts_with("sim-"));

    let payload = d.path().join("payload.json");
    std::fs::write(&payload, r#"{"name": "bench"}"#).unwrap();
    let o = slsbench(
        &out,
        &[
            "invoke",
            &function,
            "--payload",
            payload.to_str().unwrap(),
            "--repeat",
            "2",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let records: Vec<Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 2);
    assert_eq!(records[0]["status"], "ok");
    assert_eq!(records[0]["result"]["result"]["greeting"], "hello bench");
    assert_eq!(records[0]["cold_evidence"], "cold");
    assert_eq!(records[1]["cold_evidence"], "warm");
    assert!(records[0]["response_ms"].as_f64() > records[1]["response_ms"].as_f64());

    std::fs::write(&payload, r#"{"crash": true}"#).unwrap();
    let o = slsbench(&out, &["invoke", &function, "--payload", payload.to_str().unwrap()]);
    let record: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(record["status"], "error");

    let o = slsbench(&out, &["clean"]);
    assert!(stdout(&o).contains(&function));
    assert!(!out.join("deployments.json").exists());
    assert_eq!(slsbench(&out, &["invoke", &function]).status.code(), Some(2));
}

#[test]
fn plan_run_report_and_clean() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("out");
    let plan = d.path().join("plan.toml");
    std::fs::write(
        &plan,
        r#"
id = "mini"
provider = "local-sim"
workload = "synthetic"
protocol = "latency"
repetitions = 4
payload = { sleep_ms = 40 }
axes = [{ name = "memory_mb", values = [128, 130, 256] }]
"#,
    )
    .unwrap();
    let o = slsbench(&out, &["run", plan.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = out.join("mini").join("report");
    let csv = std::fs::read_to_string(report.join("summary.csv")).unwrap();
    assert!(csv.contains("mini,memory_mb=128,exec_ms,ms,4,4,40,"), "{csv}");
    assert!(!csv.contains("memory_mb=130"));
    let failed: Value =
        serde_json::from_str(&std::fs::read_to_string(report.join("failed_points.json")).unwrap()).unwrap();
    assert_eq!(failed[0]["point"], "memory_mb=130");

    // Regenerating from the journal gives the same bytes.
    std::fs::remove_dir_all(&report).unwrap();
    let o = slsbench(&out, &["report", out.join("mini").to_str().unwrap(), "--format", "csv"]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(report.join("summary.csv")).unwrap(), csv);
    assert!(!std::fs::read_dir(&report)
        .unwrap()
        .any(|e| e.unwrap().path().extension().is_some_and(|x| x == "figure")));

    // A changed plan under the same id is refused.
    std::fs::write(
        &plan,
        std::fs::read_to_string(&plan)
            .unwrap()
            .replace("repetitions = 4", "repetitions = 5"),
    )
    .unwrap();
    let o = slsbench(&out, &["run", plan.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("different plan"));

    assert!(slsbench(&out, &["clean", "--run", "mini"]).status.success());
    assert!(!out.join("mini").exists());
    assert_eq!(slsbench(&out, &["clean", "--run", "mini"]).status.code(), Some(2));
}
