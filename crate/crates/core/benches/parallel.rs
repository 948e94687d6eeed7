use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use slsbench_core::engine::{run_plan, Axis, AxisName, AxisValue, ExperimentPlan, PlanOutcome, Protocol, RunOptions};
use slsbench_core::package::{build_package, make_size_variants, SizeVariant};
use slsbench_core::platform::{builtin_profile, Language};
use slsbench_core::report::summarize_outcome;
use slsbench_core::sim::{write_synthetic_workload, LocalSim, SimConfig, SimModel};
use slsbench_core::{Execution, VirtualClock};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn wide_plan(reps: u32) -> ExperimentPlan {
    let mut plan = slsbench_core::engine::builtin_sweep("coldstart-memory").unwrap();
    plan.id = "bench".into();
    plan.protocol = Protocol::ColdstartPair;
    plan.repetitions = reps;
    plan.axes = vec![
        Axis {
            name: AxisName::Language,
            values: ["python", "nodejs", "java"].map(|l| AxisValue::Text(l.into())).to_vec(),
        },
        Axis {
            name: AxisName::MemoryMb,
            values: (128..=3008).step_by(64).map(AxisValue::Int).collect(),
        },
    ];
    plan
}

fn sim(scratch: &std::path::Path) -> LocalSim {
    let config = SimConfig {
        scratch_root: Some(scratch.to_path_buf()),
        seed: Some(1),
        ..SimConfig::default()
    };
    LocalSim::new(
        builtin_profile("aws").unwrap(),
        SimModel::builtin("default").unwrap(),
        config,
    )
    .unwrap()
}

fn run(plan: &ExperimentPlan, exec: Execution) -> PlanOutcome {
    let dir = tempfile::tempdir().unwrap();
    let mut opts = RunOptions::new(dir.path().join("out"));
    opts.execution = exec;
    run_plan(plan, &sim(&dir.path().join("scratch")), &VirtualClock::new(), &opts).unwrap()
}

fn summarize_groups(c: &mut Criterion) {
    let outcome = run(&wide_plan(200), Execution::Parallel);
    let mut g = c.benchmark_group("summarize_outcome");
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| summarize_outcome(&outcome, exec).unwrap()));
    }
    g.finish();
}

fn size_variants(c: &mut Criterion) {
    let dir = tempfile::tempdir().unwrap();
    let manifest =
        write_synthetic_workload(&dir.path().join("src"), "synthetic", Language::new("python", "3.8"), 0).unwrap();
    let base = build_package(&dir.path().join("src"), &manifest, dir.path()).unwrap();
    let variants: Vec<SizeVariant> = (1..=8)
        .map(|i| SizeVariant::new(format!("v{i}"), i * 1_000_000, i % 2 == 0))
        .collect();
    let mut g = c.benchmark_group("make_size_variants");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter_batched(
                || tempfile::tempdir().unwrap(),
                |out| make_size_variants(&base, &variants, out.path(), 7, exec).unwrap(),
                BatchSize::PerIteration,
            )
        });
    }
    g.finish();
}

fn virtual_sweep(c: &mut Criterion) {
    let plan = wide_plan(20);
    let mut g = c.benchmark_group("virtual_sweep");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new(name, plan.points().len()), &exec, |b, &exec| {
            b.iter(|| run(&plan, exec))
        });
    }
    g.finish();
}

criterion_group!(benches, summarize_groups, size_variants, virtual_sweep);
criterion_main!(benches);
