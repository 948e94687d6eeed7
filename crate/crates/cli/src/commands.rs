use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use anyhow::{anyhow, bail, Context as _};
use log::{info, warn};
use slsbench_core::engine::{
    builtin_sweep, builtin_sweeps, locate_workload, outcome_from_state, read_journal, run_plan, ExperimentPlan,
    PlanOutcome, JOURNAL_FILE, SYNTHETIC_WORKLOAD,
};
use slsbench_core::package::{build_package, make_size_variants, PackageArtifact, SizeVariant, WorkloadManifest};
use slsbench_core::platform::{validate, DeploymentSpec, Language, PlatformProfile};
use slsbench_core::provider::{deploy, DeploymentHandle};
use slsbench_core::report::{write_report, ReportFormat, REPORT_DIR};
use slsbench_core::sim::write_synthetic_workload;

use crate::context::{read_json_file, Context};
use crate::{
    CleanArgs, Cli, Command, DeployArgs, ExecArgs, Failure, FormatArg, InvokeArgs, PackageArgs, PlatformsCmd,
    ReportArgs, SpecArgs, SweepArgs, ValidateArgs,
};

pub fn dispatch(cli: Cli) -> Result<(), Failure> {
    let ctx = Context::new(&cli.global)?;
    match cli.command {
        Command::Platforms(cmd) => platforms(&ctx, cmd),
        Command::Validate(args) => validate_cmd(&ctx, args),
        Command::Package(args) => package(&ctx, args),
        Command::Deploy(args) => deploy_cmd(&ctx, args),
        Command::Invoke(args) => invoke(&ctx, args),
        Command::Run(args) => {
            let plan = ExperimentPlan::load(&args.plan).map_err(anyhow::Error::from)?;
            run(&ctx, plan, &args.exec)
        }
        Command::Sweep(args) => sweep(&ctx, args),
        Command::Report(args) => report(&ctx, args),
        Command::Clean(args) => clean(&ctx, args),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn platforms(ctx: &Context, cmd: PlatformsCmd) -> Result<(), Failure> {
    match cmd {
        PlatformsCmd::List => {
            let mut names: Vec<&str> = ctx.profiles.iter().map(|p| p.name.as_str()).collect();
            names.sort_unstable();
            for n in names {
                println!("{n}");
            }
        }
        PlatformsCmd::Show { name } => print_json(ctx.profile(&name)?)?,
    }
    Ok(())
}

/// A workload directory and its manifest. The synthetic workload is
/// generated under `scratch` on demand.
fn load_workload(ctx: &Context, workload: &str, scratch: &Path) -> anyhow::Result<(PathBuf, WorkloadManifest)> {
    if workload == SYNTHETIC_WORKLOAD && !Path::new(workload).is_dir() {
        let dir = scratch.join("src");
        let m = write_synthetic_workload(&dir, SYNTHETIC_WORKLOAD, Language::new("python", "3.8"), ctx.seed)?;
        return Ok((dir, m));
    }
    let dir = locate_workload(workload, &ctx.workload_dirs)?;
    let manifest = WorkloadManifest::load(&dir)?;
    Ok((dir, manifest))
}

fn build_spec(
    profile: &PlatformProfile,
    args: &SpecArgs,
    manifest: &WorkloadManifest,
    package: PackageArtifact,
) -> anyhow::Result<DeploymentSpec> {
    let language = match &args.language {
        Some(l) => Language::from_str(l)?,
        None => manifest.language.clone(),
    };
    let region = match &args.region {
        Some(r) => r.clone(),
        None => profile
            .regions
            .first()
            .cloned()
            .ok_or_else(|| anyhow!("platform {} lists no regions", profile.name))?,
    };
    Ok(DeploymentSpec {
        language: profile.resolve_language(&language),
        memory_mb: args.memory.unwrap_or(128),
        timeout_s: args.timeout,
        region,
        trigger: manifest.trigger,
        package,
        marker: None,
    })
}

fn validate_cmd(ctx: &Context, args: ValidateArgs) -> Result<(), Failure> {
    let profile = ctx.profile(&args.platform)?;
    let tmp = tempfile::tempdir().map_err(anyhow::Error::from)?;
    let (manifest, package) = match (args.zip_bytes, args.unzipped_bytes) {
        (Some(zip), Some(unzipped)) => {
            // Declared sizes need no files; a workload that is not on disk
            // stands in as a minimal manifest.
            let manifest = match load_workload(ctx, &args.workload, tmp.path()) {
                Ok((_, m)) => m,
                Err(_) => WorkloadManifest::minimal(&args.workload, Language::new("python", ""), "handler.py"),
            };
            let artifact = PackageArtifact::declared(manifest.clone(), zip, unzipped);
            (manifest, artifact)
        }
        _ => {
            let (dir, manifest) = load_workload(ctx, &args.workload, tmp.path())?;
            let artifact = build_package(&dir, &manifest, tmp.path()).map_err(anyhow::Error::from)?;
            (manifest, artifact)
        }
    };
    let spec = build_spec(profile, &args.spec, &manifest, package)?;
    let report = validate(profile, &spec);
    if report.accepted() {
        println!(
            "ok: {} accepts {} ({} MB, {})",
            profile.name, manifest.id, spec.memory_mb, spec.language
        );
        return Ok(());
    }
    for v in &report.violations {
        println!("{v}");
    }
    Err(Failure::Violations)
}

fn parse_variant(text: &str) -> Result<SizeVariant, Failure> {
    let parts: Vec<&str> = text.split(':').collect();
    let usage = || Failure::Usage(format!("variant {text:?}: expected label:bytes or label:bytes:import"));
    let (label, bytes, import) = match parts.as_slice() {
        [label, bytes] => (*label, *bytes, false),
        [label, bytes, "import"] => (*label, *bytes, true),
        _ => return Err(usage()),
    };
    let bytes: i64 = bytes.parse().map_err(|_| usage())?;
    if label.is_empty() {
        return Err(usage());
    }
    Ok(SizeVariant::new(label, bytes, import))
}

fn package(ctx: &Context, args: PackageArgs) -> Result<(), Failure> {
    let variants = args
        .variants
        .iter()
        .map(|v| parse_variant(v))
        .collect::<Result<Vec<_>, _>>()?;
    let out = ctx.packages_dir(&args.workload.replace(['/', '\\'], "_"));
    std::fs::create_dir_all(&out).map_err(anyhow::Error::from)?;
    let (dir, manifest) = load_workload(ctx, &args.workload, &out)?;
    let base = build_package(&dir, &manifest, &out).map_err(anyhow::Error::from)?;
    let mut artifacts = vec![base.clone()];
    artifacts.extend(
        make_size_variants(&base, &variants, &out, ctx.seed, ctx.config.engine.execution)
            .map_err(anyhow::Error::from)?,
    );
    print_json(&artifacts)?;
    Ok(())
}

type Deployments = BTreeMap<String, DeploymentHandle>;

fn load_deployments(ctx: &Context) -> anyhow::Result<Deployments> {
    let path = ctx.deployments_file();
    if !path.exists() {
        return Ok(Deployments::new());
    }
    Ok(serde_json::from_value(read_json_file(&path)?)?)
}

fn save_deployments(ctx: &Context, deployments: &Deployments) -> anyhow::Result<()> {
    let path = ctx.deployments_file();
    if deployments.is_empty() {
        if path.exists() {
            std::fs::remove_file(&path)?;
        }
        return Ok(());
    }
    std::fs::create_dir_all(&ctx.output)?;
    let mut text = serde_json::to_string_pretty(deployments)?;
    text.push('\n');
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn deploy_cmd(ctx: &Context, args: DeployArgs) -> Result<(), Failure> {
    let provider = ctx.provider(&args.provider)?;
    let out = ctx.packages_dir(&args.workload.replace(['/', '\\'], "_"));
    std::fs::create_dir_all(&out).map_err(anyhow::Error::from)?;
    let (dir, manifest) = load_workload(ctx, &args.workload, &out)?;
    let package = build_package(&dir, &manifest, &out).map_err(anyhow::Error::from)?;
    let spec = build_spec(provider.profile(), &args.spec, &manifest, package)?;
    let handle = match deploy(provider.as_ref(), spec) {
        Ok(h) => h,
        Err(slsbench_core::provider::ProviderError::Precondition(violations)) => {
            for v in &violations {
                println!("{v}");
            }
            return Err(Failure::Violations);
        }
        Err(e) => return Err(anyhow::Error::from(e).into()),
    };
    let mut deployments = load_deployments(ctx)?;
    deployments.insert(handle.function_id.clone(), handle.clone());
    save_deployments(ctx, &deployments)?;
    println!("{}", handle.function_id);
    Ok(())
}

fn invoke(ctx: &Context, args: InvokeArgs) -> Result<(), Failure> {
    let deployments = load_deployments(ctx)?;
    let handle = deployments.get(&args.function).ok_or_else(|| {
        anyhow!(
            "no recorded deployment {:?} under {}",
            args.function,
            ctx.output.display()
        )
    })?;
    let payload = match &args.payload {
        Some(p) => read_json_file(p)?,
        None => serde_json::json!({}),
    };
    let provider = ctx.provider(&handle.provider)?;
    provider.restore(handle).map_err(anyhow::Error::from)?;
    let clock = ctx.clock(&handle.provider, None);
    let timeout = Duration::from_secs(u64::from(handle.spec.timeout_s));
    for seq in 0..args.repeat {
        let mut record = provider
            .invoke(handle, &payload, timeout, clock.as_ref())
            .map_err(anyhow::Error::from)?;
        record.seq = u64::from(seq);
        println!("{}", serde_json::to_string(&record).map_err(anyhow::Error::from)?);
    }
    Ok(())
}

fn apply_exec(plan: &mut ExperimentPlan, exec: &ExecArgs) {
    if let Some(p) = &exec.provider {
        plan.provider = p.clone();
    }
    if let Some(r) = exec.repetitions {
        plan.repetitions = r;
    }
}

fn write_outcome(ctx: &Context, outcome: &PlanOutcome, format: ReportFormat) -> anyhow::Result<()> {
    let dir = outcome.run_dir.join(REPORT_DIR);
    let written = write_report(outcome, &dir, format, ctx.config.engine.execution)?;
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

fn run(ctx: &Context, mut plan: ExperimentPlan, exec: &ExecArgs) -> Result<(), Failure> {
    apply_exec(&mut plan, exec);
    let provider = ctx.provider(&plan.provider)?;
    let clock = ctx.clock(&plan.provider, exec.time_mode);
    let opts = ctx.run_options(exec);
    info!("{}: {} points on {}", plan.id, plan.points().len(), provider.name());
    let outcome = run_plan(&plan, provider.as_ref(), clock.as_ref(), &opts).map_err(anyhow::Error::from)?;
    let failed = outcome.failed_points();
    if failed > 0 {
        warn!("{}: {failed} point(s) failed; see the report's failed points", plan.id);
    }
    info!("{}: {} trials", plan.id, outcome.trials().count());
    write_outcome(ctx, &outcome, ReportFormat::All)?;
    Ok(())
}

fn sweep(ctx: &Context, args: SweepArgs) -> Result<(), Failure> {
    if args.list {
        for plan in builtin_sweeps() {
            let protocol = serde_json::to_value(plan.protocol).map_err(anyhow::Error::from)?;
            println!(
                "{}\t{}\t{}\t{} points",
                plan.id,
                protocol.as_str().unwrap_or_default(),
                plan.workload,
                plan.points().len()
            );
        }
        return Ok(());
    }
    let name = args.name.expect("clap requires a name without --list");
    let plan =
        builtin_sweep(&name).ok_or_else(|| Failure::Usage(format!("unknown sweep {name:?}; see `sweep --list`")))?;
    run(ctx, plan, &args.exec)
}

fn report(ctx: &Context, args: ReportArgs) -> Result<(), Failure> {
    let state = read_journal(&args.run_dir.join(JOURNAL_FILE)).map_err(anyhow::Error::from)?;
    let plan = state
        .plan
        .clone()
        .ok_or_else(|| anyhow!("{} has no plan on record", args.run_dir.display()))?;
    let outcome = outcome_from_state(&plan, &args.run_dir, &state);
    let format = match args.format {
        FormatArg::Csv => ReportFormat::Csv,
        FormatArg::Figures => ReportFormat::Figures,
        FormatArg::All => ReportFormat::All,
    };
    write_outcome(ctx, &outcome, format)?;
    Ok(())
}

fn clean(ctx: &Context, args: CleanArgs) -> Result<(), Failure> {
    if let Some(run) = &args.run {
        let dir = ctx.output.join(run);
        if !dir.join(JOURNAL_FILE).is_file() {
            bail_runtime(format!("{} is not a run directory", dir.display()))?;
        }
        std::fs::remove_dir_all(&dir).map_err(anyhow::Error::from)?;
        println!("removed {}", dir.display());
        return Ok(());
    }
    let mut deployments = load_deployments(ctx)?;
    let mut remaining = Deployments::new();
    for (id, handle) in std::mem::take(&mut deployments) {
        let provider = ctx.provider(&handle.provider)?;
        let result = provider.restore(&handle).and_then(|()| provider.teardown(&handle));
        match result {
            Ok(()) => println!("torn down {id}"),
            Err(e) => {
                warn!("{id}: {e}");
                remaining.insert(id, handle);
            }
        }
    }
    save_deployments(ctx, &remaining)?;
    if !remaining.is_empty() {
        bail_runtime(format!("{} deployment(s) could not be torn down", remaining.len()))?;
    }
    if args.all && ctx.output.exists() {
        std::fs::remove_dir_all(&ctx.output).map_err(anyhow::Error::from)?;
        println!("removed {}", ctx.output.display());
    }
    Ok(())
}

fn bail_runtime(msg: String) -> anyhow::Result<()> {
    bail!(msg)
}
