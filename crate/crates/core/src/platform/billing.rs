use serde::{Deserialize, Serialize};

use super::{BillingMode, PlatformError, PlatformProfile};

/// User-supplied prices. Vendor rate cards are not bundled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCard {
    pub per_gb_second: f64,
    pub per_invocation: f64,
}

/// Cost of `invocations` executions totalling `duration_s` seconds.
///
/// Allocated-memory platforms bill `memory_mb`; consumed-memory platforms
/// bill `consumed_mb`.
pub fn estimate_cost(
    profile: &PlatformProfile,
    memory_mb: u32,
    duration_s: f64,
    consumed_mb: u32,
    invocations: u64,
    rate_card: Option<&RateCard>,
) -> Result<f64, PlatformError> {
    let rates =
        rate_card.ok_or_else(|| PlatformError::Config(format!("no rate card configured for {}", profile.name)))?;
    if duration_s < 0.0 || !duration_s.is_finite() {
        return Err(PlatformError::InvalidRequest(format!(
            "duration must be a non-negative number of seconds, got {duration_s}"
        )));
    }
    let billed_mb = match profile.billing_mode {
        BillingMode::AllocatedMemory => memory_mb,
        BillingMode::ConsumedMemory => consumed_mb,
    };
    let gb_seconds = billed_mb as f64 / 1024.0 * duration_s;
    Ok(gb_seconds * rates.per_gb_second + invocations as f64 * rates.per_invocation)
}
