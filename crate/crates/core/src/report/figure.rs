use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{metrics_of, MetricsSummary, Unit};
use crate::engine::{AxisPoint, PlanOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartKind {
    Box,
    Bar,
    Line,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XAxis {
    pub label: String,
    pub categories: Vec<String>,
}

/// Points at one row of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRef {
    pub plan: String,
    pub point: String,
    pub metric: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    /// One entry per x category; `null` where the point failed or has no
    /// valid observations.
    pub refs: Vec<Option<SummaryRef>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureSpec {
    pub title: String,
    pub kind: ChartKind,
    pub unit: Unit,
    pub x: XAxis,
    pub series: Vec<Series>,
}

impl FigureSpec {
    /// `<plan>_<metric>.figure`, derived from the first resolvable ref.
    pub fn file_name(&self) -> String {
        let r = self.series.iter().flat_map(|s| s.refs.iter().flatten()).next();
        match r {
            Some(r) => format!("{}_{}.figure", r.plan, r.metric),
            None => format!("{}.figure", self.title.replace([' ', '/'], "_")),
        }
    }
}

/// Categories of the first axis: ascending when all numeric, plan order
/// otherwise.
fn ordered(values: Vec<String>) -> Vec<String> {
    let mut uniq: Vec<String> = Vec::new();
    for v in values {
        if !uniq.contains(&v) {
            uniq.push(v);
        }
    }
    if uniq.iter().all(|v| v.parse::<f64>().is_ok()) {
        uniq.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
    }
    uniq
}

/// One figure per metric. The first axis is the x axis; each combination of
/// the remaining axes is a series.
pub fn build_figures(outcome: &PlanOutcome, summaries: &[MetricsSummary]) -> Vec<FigureSpec> {
    let plan = &outcome.plan;
    let points = plan.points();
    let x_label = plan
        .axes
        .first()
        .map(|a| a.name.as_str().to_string())
        .unwrap_or_else(|| "point".into());
    let x_of = |p: &AxisPoint| p.0.first().map(|(_, v)| v.clone()).unwrap_or_else(|| "all".into());
    let rest_of = |p: &AxisPoint| AxisPoint(p.0.iter().skip(1).cloned().collect());
    let categories = ordered(points.iter().map(x_of).collect());
    let mut series_keys: Vec<AxisPoint> = Vec::new();
    let mut seen = BTreeSet::new();
    for p in &points {
        let k = rest_of(p);
        if seen.insert(k.clone()) {
            series_keys.push(k);
        }
    }

    metrics_of(outcome)
        .into_iter()
        .map(|metric| {
            let unit = Unit::for_metric(&metric);
            let kind = if unit == Unit::ReqPerS {
                ChartKind::Bar
            } else {
                ChartKind::Box
            };
            let series = series_keys
                .iter()
                .map(|key| {
                    let refs = categories
                        .iter()
                        .map(|cat| {
                            let point = points.iter().find(|p| x_of(p) == *cat && rest_of(p) == *key)?;
                            let label = point.label();
                            summaries
                                .iter()
                                .find(|s| s.point == label && s.metric == metric && s.stats.is_some())
                                .map(|s| SummaryRef {
                                    plan: s.plan.clone(),
                                    point: s.point.clone(),
                                    metric: s.metric.clone(),
                                })
                        })
                        .collect();
                    Series {
                        label: if key.0.is_empty() { metric.clone() } else { key.label() },
                        refs,
                    }
                })
                .collect();
            FigureSpec {
                title: format!("{} {metric} by {x_label}", plan.id),
                kind,
                unit,
                x: XAxis {
                    label: x_label.clone(),
                    categories: categories.clone(),
                },
                series,
            }
        })
        .collect()
}

/// Refs in `fig` that match no row of `summaries`.
pub fn unresolved_refs<'a>(fig: &'a FigureSpec, summaries: &[MetricsSummary]) -> Vec<&'a SummaryRef> {
    fig.series
        .iter()
        .flat_map(|s| s.refs.iter().flatten())
        .filter(|r| {
            !summaries
                .iter()
                .any(|s| s.plan == r.plan && s.point == r.point && s.metric == r.metric)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{builtin_sweep, PointOutcome, PointStatus, TrialResult, COLDSTART_METRIC};
    use crate::report::{summarize, summarize_outcome};
    use crate::Execution;

    fn outcome(memory_order: &[&str]) -> PlanOutcome {
        let mut plan = builtin_sweep("coldstart-memory").unwrap();
        plan.axes[0].values = memory_order
            .iter()
            .map(|m| crate::engine::AxisValue::Int(m.parse().unwrap()))
            .collect();
        let points = plan
            .points()
            .into_iter()
            .map(|point| {
                let trials = (0..3)
                    .map(|i| {
                        let mut t = TrialResult::new(&plan.id, &point, i);
                        t.derived.insert(COLDSTART_METRIC.into(), 100.0 + i as f64);
                        t
                    })
                    .collect();
                PointOutcome {
                    point,
                    status: PointStatus::Completed { trials },
                }
            })
            .collect();
        PlanOutcome {
            plan,
            run_dir: Default::default(),
            points,
        }
    }

    #[test]
    fn memory_categories_ascend_and_refs_resolve() {
        let o = outcome(&["1024", "128", "512"]);
        let sums = summarize_outcome(&o, Execution::Sequential).unwrap();
        let figs = build_figures(&o, &sums);
        assert_eq!(figs.len(), 1);
        assert_eq!(figs[0].x.categories, ["128", "512", "1024"]);
        assert_eq!(figs[0].file_name(), "coldstart-memory_coldstart_est_ms.figure");
        assert!(unresolved_refs(&figs[0], &sums).is_empty());
        assert_eq!(figs[0].series[0].refs[0].as_ref().unwrap().point, "memory_mb=128");
        assert_eq!(sums[0].stats, Some(summarize(&[100.0, 101.0, 102.0]).unwrap()));
    }

    #[test]
    fn failed_point_leaves_a_gap() {
        let mut o = outcome(&["128", "256"]);
        o.points[1].status = PointStatus::Failed {
            reason: "validation".into(),
            violations: vec![],
        };
        let sums = summarize_outcome(&o, Execution::Sequential).unwrap();
        let figs = build_figures(&o, &sums);
        assert!(figs[0].series[0].refs[1].is_none());
    }
}
