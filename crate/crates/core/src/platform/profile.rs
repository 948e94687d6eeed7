use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Language, PlatformError};

const BUILTIN: [(&str, &str); 4] = [
    ("alibaba", include_str!("../../profiles/alibaba.toml")),
    ("aws", include_str!("../../profiles/aws.toml")),
    ("azure", include_str!("../../profiles/azure.toml")),
    ("google", include_str!("../../profiles/google.toml")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupportStatus {
    Supported,
    Beta,
    Deprecated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LanguageSupport {
    pub name: String,
    pub versions: Vec<String>,
    pub status: SupportStatus,
}

/// The memory sizes a platform lets a function request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum MemoryGrid {
    /// `min, min + step, ...` up to the maximum.
    Step {
        step_mb: u32,
    },
    Explicit {
        values_mb: Vec<u32>,
    },
    /// Not selectable by the developer.
    Fixed {
        fixed_mb: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BillingMode {
    AllocatedMemory,
    ConsumedMemory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlatformProfile {
    pub name: String,
    pub languages: Vec<LanguageSupport>,
    pub memory_min_mb: u32,
    pub memory_max_mb: u32,
    pub memory_grid: MemoryGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpu_full_share_at_mb: Option<u32>,
    /// Upper bound on [`cpu_share`](super::cpu_share); defaults to the share
    /// implied by `memory_max_mb`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpu_share_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub package_zip_limit_bytes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub package_unzipped_limit_bytes: Option<u64>,
    pub timeout_max_s: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload_limit_bytes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process_limit: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file_descriptor_limit: Option<u32>,
    pub local_disk_mb: u32,
    /// Concurrent executions one instance accepts.
    pub instance_concurrency: u32,
    pub instance_limit: u32,
    pub regions: Vec<String>,
    pub runtime_os: Vec<String>,
    pub billing_mode: BillingMode,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl PlatformProfile {
    /// Every selectable memory size, ascending.
    pub fn memory_values(&self) -> Vec<u32> {
        match &self.memory_grid {
            MemoryGrid::Step { step_mb } => (self.memory_min_mb..=self.memory_max_mb)
                .step_by((*step_mb).max(1) as usize)
                .collect(),
            MemoryGrid::Explicit { values_mb } => {
                let set: BTreeSet<u32> = values_mb.iter().copied().collect();
                set.into_iter().collect()
            }
            MemoryGrid::Fixed { fixed_mb } => vec![*fixed_mb],
        }
    }

    pub fn is_on_grid(&self, memory_mb: u32) -> bool {
        match &self.memory_grid {
            MemoryGrid::Step { step_mb } => {
                memory_mb >= self.memory_min_mb
                    && memory_mb <= self.memory_max_mb
                    && (memory_mb - self.memory_min_mb).is_multiple_of((*step_mb).max(1))
            }
            MemoryGrid::Explicit { values_mb } => values_mb.contains(&memory_mb),
            MemoryGrid::Fixed { fixed_mb } => *fixed_mb == memory_mb,
        }
    }

    pub fn supports_region(&self, region: &str) -> bool {
        self.regions.iter().any(|r| r == region)
    }

    /// Support status of an exact language version, if listed.
    pub fn language_status(&self, language: &Language) -> Option<SupportStatus> {
        self.languages
            .iter()
            .filter(|l| l.name == language.name)
            .find(|l| l.versions.contains(&language.version))
            .map(|l| l.status)
    }

    /// Newest non-deprecated version listed for `name`, preferring supported
    /// over beta. Versions are listed oldest first in profile files.
    pub fn default_version(&self, name: &str) -> Option<&str> {
        let pick = |status: SupportStatus| {
            self.languages
                .iter()
                .filter(|l| l.name == name && l.status == status)
                .flat_map(|l| l.versions.iter())
                .next_back()
        };
        pick(SupportStatus::Supported)
            .or_else(|| pick(SupportStatus::Beta))
            .map(String::as_str)
    }

    /// Fills in an empty version from [`default_version`](Self::default_version).
    pub fn resolve_language(&self, language: &Language) -> Language {
        if !language.version.is_empty() {
            return language.clone();
        }
        match self.default_version(&language.name) {
            Some(v) => Language::new(language.name.clone(), v),
            None => language.clone(),
        }
    }

    pub fn check_invariants(&self) -> Result<(), PlatformError> {
        let fail = |reason: String| {
            Err(PlatformError::InvalidProfile {
                name: self.name.clone(),
                reason,
            })
        };
        if self.name.is_empty() {
            return fail("empty name".into());
        }
        if self.memory_min_mb == 0 || self.memory_min_mb > self.memory_max_mb {
            return fail(format!(
                "memory range {}..{} is empty or starts at zero",
                self.memory_min_mb, self.memory_max_mb
            ));
        }
        match &self.memory_grid {
            MemoryGrid::Step { step_mb: 0 } => return fail("memory step of 0".into()),
            MemoryGrid::Explicit { values_mb } if values_mb.is_empty() => return fail("empty memory grid".into()),
            _ => {}
        }
        if let Some(v) = self
            .memory_values()
            .into_iter()
            .find(|v| *v < self.memory_min_mb || *v > self.memory_max_mb)
        {
            return fail(format!("grid value {v} outside memory range"));
        }
        if let Some(full) = self.cpu_full_share_at_mb {
            if full < self.memory_min_mb || full > self.memory_max_mb {
                return fail(format!("cpu_full_share_at_mb {full} outside memory range"));
            }
        }
        if matches!(self.cpu_share_cap, Some(c) if c.is_nan() || c <= 0.0) {
            return fail("cpu_share_cap must be positive".into());
        }
        let positive = [
            ("package_zip_limit_bytes", self.package_zip_limit_bytes),
            ("package_unzipped_limit_bytes", self.package_unzipped_limit_bytes),
            ("timeout_max_s", Some(self.timeout_max_s as u64)),
            ("payload_limit_bytes", self.payload_limit_bytes),
            ("process_limit", self.process_limit.map(u64::from)),
            ("file_descriptor_limit", self.file_descriptor_limit.map(u64::from)),
            ("local_disk_mb", Some(self.local_disk_mb as u64)),
            ("instance_concurrency", Some(self.instance_concurrency as u64)),
            ("instance_limit", Some(self.instance_limit as u64)),
        ];
        for (field, value) in positive {
            if value == Some(0) {
                return fail(format!("{field} must be strictly positive"));
            }
        }
        Ok(())
    }
}

/// Parses and checks one profile document.
pub fn parse_profile(text: &str) -> Result<PlatformProfile, PlatformError> {
    let profile: PlatformProfile = toml::from_str(text).map_err(|e| PlatformError::Config(e.to_string()))?;
    profile.check_invariants()?;
    Ok(profile)
}

/// The four builtin profiles, alphabetical by name.
pub fn builtin_profiles() -> Vec<PlatformProfile> {
    BUILTIN
        .iter()
        .map(|(name, text)| parse_profile(text).unwrap_or_else(|e| panic!("builtin profile {name}: {e}")))
        .collect()
}

pub fn builtin_profile(name: &str) -> Result<PlatformProfile, PlatformError> {
    builtin_profiles()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| PlatformError::UnknownPlatform(name.to_string()))
}

/// Loads every `*.toml` profile in `dir`, sorted by name.
pub fn load_profile_dir(dir: &Path) -> Result<Vec<PlatformProfile>, PlatformError> {
    let mut profiles = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "toml") {
            let text = std::fs::read_to_string(&path)?;
            profiles.push(parse_profile(&text).map_err(|e| match e {
                PlatformError::Config(msg) => PlatformError::Config(format!("{}: {msg}", path.display())),
                other => other,
            })?);
        }
    }
    profiles.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(profiles)
}

/// Merges an overlay document into `profiles` field-wise; the overlay wins.
///
/// The overlay is a TOML document with one table per platform name:
///
/// ```toml
/// [aws]
/// payload_limit_bytes = 6291456
/// ```
pub fn apply_overlay(profiles: &[PlatformProfile], overlay: &str) -> Result<Vec<PlatformProfile>, PlatformError> {
    let overlay: toml::Table = toml::from_str(overlay).map_err(|e| PlatformError::Config(e.to_string()))?;
    for key in overlay.keys() {
        if !profiles.iter().any(|p| &p.name == key) {
            return Err(PlatformError::UnknownPlatform(key.clone()));
        }
    }
    profiles
        .iter()
        .map(|p| {
            let Some(patch) = overlay.get(&p.name) else {
                return Ok(p.clone());
            };
            let toml::Value::Table(patch) = patch else {
                return Err(PlatformError::Config(format!(
                    "overlay entry for {} must be a table",
                    p.name
                )));
            };
            let mut base = toml::Table::try_from(p).map_err(|e| PlatformError::Config(e.to_string()))?;
            merge_tables(&mut base, patch);
            let merged: PlatformProfile = base
                .try_into()
                .map_err(|e: toml::de::Error| PlatformError::Config(e.to_string()))?;
            if merged.name != p.name {
                return Err(PlatformError::Config(format!("overlay may not rename {}", p.name)));
            }
            merged.check_invariants()?;
            Ok(merged)
        })
        .collect()
}

fn merge_tables(base: &mut toml::Table, patch: &toml::Table) {
    for (key, value) in patch {
        match (base.get_mut(key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(p)) => merge_tables(b, p),
            _ => {
                base.insert(key.clone(), value.clone());
            }
        }
    }
}
