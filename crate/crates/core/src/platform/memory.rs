use super::{MemoryGrid, PlatformError, PlatformProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapWarning {
    /// The platform ignores the request and always grants its fixed size.
    FixedMemory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemorySnap {
    pub memory_mb: u32,
    pub warning: Option<SnapWarning>,
}

/// Smallest selectable memory size that is at least `requested_mb`.
pub fn snap_memory(profile: &PlatformProfile, requested_mb: u32) -> Result<MemorySnap, PlatformError> {
    if requested_mb == 0 {
        return Err(PlatformError::InvalidRequest(
            "requested memory must be positive".into(),
        ));
    }
    if let MemoryGrid::Fixed { fixed_mb } = profile.memory_grid {
        return Ok(MemorySnap {
            memory_mb: fixed_mb,
            warning: Some(SnapWarning::FixedMemory),
        });
    }
    let no_valid = || PlatformError::NoValidMemory {
        platform: profile.name.clone(),
        requested_mb,
        max_mb: profile.memory_max_mb,
    };
    if requested_mb > profile.memory_max_mb {
        return Err(no_valid());
    }
    let snapped = match &profile.memory_grid {
        MemoryGrid::Step { step_mb } => {
            let min = profile.memory_min_mb;
            if requested_mb <= min {
                min
            } else {
                let steps = (requested_mb - min).div_ceil(*step_mb);
                min + steps * step_mb
            }
        }
        MemoryGrid::Explicit { values_mb } => values_mb
            .iter()
            .copied()
            .filter(|v| *v >= requested_mb)
            .min()
            .ok_or_else(no_valid)?,
        MemoryGrid::Fixed { .. } => unreachable!(),
    };
    if snapped > profile.memory_max_mb {
        return Err(no_valid());
    }
    Ok(MemorySnap {
        memory_mb: snapped,
        warning: None,
    })
}

/// Fraction of one CPU granted at `memory_mb`.
///
/// Proportional to memory, reaching 1.0 at `cpu_full_share_at_mb`, and capped
/// at `cpu_share_cap` (by default the share implied by the maximum memory, so
/// e.g. 3008/1792 on a 1792 MB full-share platform).
pub fn cpu_share(profile: &PlatformProfile, memory_mb: u32) -> Result<f64, PlatformError> {
    let full = profile
        .cpu_full_share_at_mb
        .ok_or_else(|| PlatformError::UnsupportedQuery {
            platform: profile.name.clone(),
            query: "cpu_share (no cpu_full_share_at_mb)".into(),
        })?;
    if !profile.is_on_grid(memory_mb) {
        return Err(PlatformError::InvalidRequest(format!(
            "{memory_mb} MB is not a selectable memory size on {}",
            profile.name
        )));
    }
    let full = full as f64;
    let cap = profile.cpu_share_cap.unwrap_or(profile.memory_max_mb as f64 / full);
    Ok((memory_mb as f64 / full).min(cap))
}
