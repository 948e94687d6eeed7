//! Platform characteristics as data.
//!
//! A [`PlatformProfile`] is the machine-checkable form of one platform's
//! limits and scaling rules. Profiles are loaded from TOML documents (the
//! builtin four are embedded from `profiles/`) and may be patched by an
//! overlay document. Everything here is pure and immutable.

mod billing;
mod memory;
mod profile;
mod validate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::package::PackageArtifact;

pub use billing::{estimate_cost, RateCard};
pub use memory::{cpu_share, snap_memory, MemorySnap, SnapWarning};
pub use profile::{
    apply_overlay, builtin_profile, builtin_profiles, load_profile_dir, parse_profile, BillingMode, LanguageSupport,
    MemoryGrid, PlatformProfile, SupportStatus,
};
pub use validate::{validate, validate_payload, ValidationReport, Violation};

#[derive(Debug, Error)]
pub enum PlatformError {
    #[error("requested memory {requested_mb} MB exceeds the {platform} maximum of {max_mb} MB")]
    NoValidMemory {
        platform: String,
        requested_mb: u32,
        max_mb: u32,
    },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("{platform} does not support {query}")]
    UnsupportedQuery { platform: String, query: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid profile {name}: {reason}")]
    InvalidProfile { name: String, reason: String },
    #[error("unknown platform {0}")]
    UnknownPlatform(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A runtime language and version, written `name:version` (e.g. `python:3.8`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Language {
    pub name: String,
    pub version: String,
}

impl Language {
    pub fn new(name: impl Into<String>, version: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            version: version.into(),
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.name, self.version)
    }
}

impl FromStr for Language {
    type Err = PlatformError;

    /// Accepts `name:version`; a bare `name` leaves the version empty so the
    /// caller can resolve it against a profile.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(PlatformError::InvalidRequest("empty language".into()));
        }
        Ok(match s.split_once(':') {
            Some((name, version)) => Language::new(name, version),
            None => Language::new(s, ""),
        })
    }
}

impl Serialize for Language {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Language {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trigger {
    #[default]
    Http,
    Timer,
    Storage,
}

/// What to deploy and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentSpec {
    pub language: Language,
    pub memory_mb: u32,
    pub timeout_s: u32,
    pub region: String,
    pub trigger: Trigger,
    pub package: PackageArtifact,
    /// Environment marker; changing it forces a fresh deployment on real
    /// providers (used to force cold starts).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marker: Option<String>,
}

impl DeploymentSpec {
    /// Stable key over everything that defines the deployed function.
    pub fn deployment_key(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.package.content_digest.as_bytes());
        h.update([0]);
        h.update(self.language.to_string().as_bytes());
        h.update([0]);
        h.update(self.memory_mb.to_le_bytes());
        h.update(self.timeout_s.to_le_bytes());
        h.update(self.region.as_bytes());
        h.update([0]);
        h.update(format!("{:?}", self.trigger).as_bytes());
        h.update([0]);
        if let Some(m) = &self.marker {
            h.update(m.as_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn language_parse_and_display() {
        let l: Language = "python:3.8".parse().unwrap();
        assert_eq!(l, Language::new("python", "3.8"));
        assert_eq!(l.to_string(), "python:3.8");
        let bare: Language = "java".parse().unwrap();
        assert_eq!(bare.version, "");
        assert!("".parse::<Language>().is_err());
    }
}
