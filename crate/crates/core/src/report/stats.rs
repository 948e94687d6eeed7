use serde::{Deserialize, Serialize};

use super::ReportError;

/// Order statistics of one group of values, in the group's unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub min: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub p95: f64,
    pub max: f64,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub stddev: f64,
}

/// Nearest-rank percentile of ascending `sorted`: the `ceil(p/100 * n)`-th
/// smallest value, with rank 0 read as rank 1. `p` is in percent, 0..=100.
pub fn percentile(sorted: &[f64], p: u32) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty list");
    assert!(p <= 100, "percentile {p} out of range");
    let n = sorted.len() as u64;
    let rank = (p as u64 * n).div_ceil(100).max(1);
    sorted[rank as usize - 1]
}

pub fn summarize(values: &[f64]) -> Result<Stats, ReportError> {
    if values.is_empty() {
        return Err(ReportError::EmptyGroup);
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(ReportError::NonFinite(*v));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let stddev = if sorted.len() < 2 {
        0.0
    } else {
        (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Ok(Stats {
        min: sorted[0],
        p25: percentile(&sorted, 25),
        median: percentile(&sorted, 50),
        p75: percentile(&sorted, 75),
        p95: percentile(&sorted, 95),
        max: sorted[sorted.len() - 1],
        mean,
        stddev,
    })
}
