//! Summary statistics, CSV tables and figure specifications.
//!
//! Statistics are computed over valid observations only, with nearest-rank
//! percentiles. Everything written here is a pure function of the plan
//! outcome, so identical runs give identical bytes.

mod figure;
mod metrics;
mod stats;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{PlanOutcome, PointStatus};
use crate::par::{self, Execution};

pub use figure::{build_figures, unresolved_refs, ChartKind, FigureSpec, Series, SummaryRef, XAxis};
pub use metrics::{
    derive_metric, lookup_reported, protocol_metrics, Observation, Unit, EXEC_METRIC, RESPONSE_METRIC,
    THROUGHPUT_LATENCY_METRIC,
};
pub use stats::{percentile, summarize, Stats};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const FAILED_POINTS_FILE: &str = "failed_points.json";
pub const REPORT_DIR: &str = "report";

pub const CSV_HEADER: [&str; 14] = [
    "plan",
    "point",
    "metric",
    "unit",
    "count",
    "valid_count",
    "min",
    "p25",
    "median",
    "p75",
    "p95",
    "max",
    "mean",
    "stddev",
];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot summarize an empty group")]
    EmptyGroup,
    #[error("non-finite value {0} in group")]
    NonFinite(f64),
    #[error("metric {field:?} missing from result ({context})")]
    Schema { field: String, context: String },
    #[error("malformed summary CSV: {0}")]
    Csv(String),
    #[error("cannot write report to {path}: {source}")]
    Unwritable { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub plan: String,
    pub point: String,
    pub metric: String,
    pub unit: Unit,
    pub count: usize,
    pub valid_count: usize,
    /// Absent when no observation is valid.
    pub stats: Option<Stats>,
}

fn metrics_of(outcome: &PlanOutcome) -> Vec<String> {
    let mut names: Vec<String> = protocol_metrics(outcome.plan.protocol)
        .iter()
        .map(|s| s.to_string())
        .collect();
    for m in &outcome.plan.metrics {
        if !names.contains(m) {
            names.push(m.clone());
        }
    }
    names
}

/// One summary per (completed point, metric), in plan point order.
pub fn summarize_outcome(outcome: &PlanOutcome, exec: Execution) -> Result<Vec<MetricsSummary>, ReportError> {
    let metrics = metrics_of(outcome);
    let groups: Vec<_> = outcome
        .points
        .iter()
        .filter_map(|p| match &p.status {
            PointStatus::Completed { trials } => Some((p, trials)),
            PointStatus::Failed { .. } => None,
        })
        .flat_map(|(p, trials)| metrics.iter().map(move |m| (p, trials, m)))
        .collect();
    let protocol = outcome.plan.protocol;
    let plan_id = &outcome.plan.id;
    par::map(exec, groups, |(point, trials, metric)| {
        let mut obs = Vec::new();
        for t in trials {
            obs.extend(derive_metric(protocol, t, metric)?);
        }
        let valid: Vec<f64> = obs.iter().filter(|o| o.valid).map(|o| o.value).collect();
        let stats = if valid.is_empty() {
            None
        } else {
            Some(summarize(&valid)?)
        };
        Ok(MetricsSummary {
            plan: plan_id.clone(),
            point: point.point.label(),
            metric: metric.clone(),
            unit: Unit::for_metric(metric),
            count: obs.len(),
            valid_count: valid.len(),
            stats,
        })
    })
    .into_iter()
    .collect()
}

pub fn write_csv(summaries: &[MetricsSummary]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for s in summaries {
        let mut row = vec![
            s.plan.clone(),
            s.point.clone(),
            s.metric.clone(),
            s.unit.to_string(),
            s.count.to_string(),
            s.valid_count.to_string(),
        ];
        match &s.stats {
            Some(st) => row
                .extend([st.min, st.p25, st.median, st.p75, st.p95, st.max, st.mean, st.stddev].map(|v| v.to_string())),
            None => row.extend(std::iter::repeat_n(String::new(), 8)),
        }
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}

pub fn parse_csv(text: &str) -> Result<Vec<MetricsSummary>, ReportError> {
    let bad = |m: String| ReportError::Csv(m);
    let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| bad(e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let f = |k: usize| rec.get(k).unwrap_or("");
        let num = |k: usize| -> Result<f64, ReportError> {
            f(k).parse()
                .map_err(|_| bad(format!("row {}: column {} = {:?}", i + 1, CSV_HEADER[k], f(k))))
        };
        let int = |k: usize| -> Result<usize, ReportError> {
            f(k).parse()
                .map_err(|_| bad(format!("row {}: column {} = {:?}", i + 1, CSV_HEADER[k], f(k))))
        };
        let stats = if f(6).is_empty() {
            None
        } else {
            Some(Stats {
                min: num(6)?,
                p25: num(7)?,
                median: num(8)?,
                p75: num(9)?,
                p95: num(10)?,
                max: num(11)?,
                mean: num(12)?,
                stddev: num(13)?,
            })
        };
        out.push(MetricsSummary {
            plan: f(0).to_string(),
            point: f(1).to_string(),
            metric: f(2).to_string(),
            unit: Unit::parse(f(3)).ok_or_else(|| bad(format!("row {}: unit {:?}", i + 1, f(3))))?,
            count: int(4)?,
            valid_count: int(5)?,
            stats,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    Csv,
    Figures,
    #[default]
    All,
}

#[derive(Debug, Clone, Serialize)]
struct FailedPoint<'a> {
    point: String,
    reason: &'a str,
    violations: Vec<String>,
}

fn write_file(path: &Path, contents: &str) -> Result<(), ReportError> {
    std::fs::write(path, contents).map_err(|source| ReportError::Unwritable {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the report for `outcome` into `dir` and returns the written paths.
pub fn write_report(
    outcome: &PlanOutcome,
    dir: &Path,
    format: ReportFormat,
    exec: Execution,
) -> Result<Vec<PathBuf>, ReportError> {
    std::fs::create_dir_all(dir).map_err(|source| ReportError::Unwritable {
        path: dir.to_path_buf(),
        source,
    })?;
    let summaries = summarize_outcome(outcome, exec)?;
    let mut written = Vec::new();
    if format != ReportFormat::Figures {
        let path = dir.join(SUMMARY_FILE);
        write_file(&path, &write_csv(&summaries))?;
        written.push(path);
        let failed: Vec<FailedPoint> = outcome
            .points
            .iter()
            .filter_map(|p| match &p.status {
                PointStatus::Failed { reason, violations } => Some(FailedPoint {
                    point: p.point.label(),
                    reason,
                    violations: violations.iter().map(ToString::to_string).collect(),
                }),
                PointStatus::Completed { .. } => None,
            })
            .collect();
        let path = dir.join(FAILED_POINTS_FILE);
        let mut json = serde_json::to_string_pretty(&failed).expect("failed points serialize");
        json.push('\n');
        write_file(&path, &json)?;
        written.push(path);
    }
    if format != ReportFormat::Csv {
        for fig in build_figures(outcome, &summaries) {
            let path = dir.join(fig.file_name());
            let mut json = serde_json::to_string_pretty(&fig).expect("figure serializes");
            json.push('\n');
            write_file(&path, &json)?;
            written.push(path);
        }
    }
    Ok(written)
}
