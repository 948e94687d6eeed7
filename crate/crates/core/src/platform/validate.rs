use std::fmt;

use serde::{Deserialize, Serialize};

use super::{DeploymentSpec, Language, MemoryGrid, PlatformProfile, SupportStatus};

/// One violated platform constraint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    LanguageUnsupported { language: Language },
    LanguageDeprecated { language: Language },
    MemoryOutOfRange { memory_mb: u32, min_mb: u32, max_mb: u32 },
    MemoryOffGrid { memory_mb: u32, next_valid_mb: Option<u32> },
    TimeoutNotPositive,
    TimeoutExceeded { timeout_s: u32, max_s: u32 },
    ZipTooLarge { bytes: u64, limit: u64 },
    UnzippedTooLarge { bytes: u64, limit: u64 },
    RegionUnknown { region: String },
    PayloadTooLarge { bytes: u64, limit: u64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LanguageUnsupported { language } => {
                write!(f, "language {language} is not supported")
            }
            Violation::LanguageDeprecated { language } => {
                write!(f, "language {language} is deprecated")
            }
            Violation::MemoryOutOfRange {
                memory_mb,
                min_mb,
                max_mb,
            } => write!(f, "memory {memory_mb} MB outside {min_mb}..={max_mb} MB"),
            Violation::MemoryOffGrid {
                memory_mb,
                next_valid_mb,
            } => match next_valid_mb {
                Some(next) => write!(f, "memory {memory_mb} MB is off-grid (next valid {next} MB)"),
                None => write!(f, "memory {memory_mb} MB is off-grid"),
            },
            Violation::TimeoutNotPositive => write!(f, "timeout must be positive"),
            Violation::TimeoutExceeded { timeout_s, max_s } => {
                write!(f, "timeout {timeout_s} s exceeds maximum {max_s} s")
            }
            Violation::ZipTooLarge { bytes, limit } => {
                write!(f, "zipped package {bytes} bytes exceeds limit {limit} bytes")
            }
            Violation::UnzippedTooLarge { bytes, limit } => {
                write!(f, "unzipped package {bytes} bytes exceeds limit {limit} bytes")
            }
            Violation::RegionUnknown { region } => write!(f, "region {region} is not offered"),
            Violation::PayloadTooLarge { bytes, limit } => {
                write!(f, "payload {bytes} bytes exceeds limit {limit} bytes")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn accepted(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `spec` against every constraint `profile` states.
///
/// Limits absent from the profile are skipped. A fixed-memory platform
/// ignores the requested size, so it never reports memory violations.
pub fn validate(profile: &PlatformProfile, spec: &DeploymentSpec) -> ValidationReport {
    let mut violations = Vec::new();

    match profile.language_status(&spec.language) {
        None => violations.push(Violation::LanguageUnsupported {
            language: spec.language.clone(),
        }),
        Some(SupportStatus::Deprecated) => violations.push(Violation::LanguageDeprecated {
            language: spec.language.clone(),
        }),
        Some(_) => {}
    }

    if !matches!(profile.memory_grid, MemoryGrid::Fixed { .. }) {
        let m = spec.memory_mb;
        if m < profile.memory_min_mb || m > profile.memory_max_mb {
            violations.push(Violation::MemoryOutOfRange {
                memory_mb: m,
                min_mb: profile.memory_min_mb,
                max_mb: profile.memory_max_mb,
            });
        } else if !profile.is_on_grid(m) {
            violations.push(Violation::MemoryOffGrid {
                memory_mb: m,
                next_valid_mb: super::snap_memory(profile, m).ok().map(|s| s.memory_mb),
            });
        }
    }

    if spec.timeout_s == 0 {
        violations.push(Violation::TimeoutNotPositive);
    } else if spec.timeout_s > profile.timeout_max_s {
        violations.push(Violation::TimeoutExceeded {
            timeout_s: spec.timeout_s,
            max_s: profile.timeout_max_s,
        });
    }

    if let Some(limit) = profile.package_zip_limit_bytes {
        if spec.package.zip_bytes > limit {
            violations.push(Violation::ZipTooLarge {
                bytes: spec.package.zip_bytes,
                limit,
            });
        }
    }
    if let Some(limit) = profile.package_unzipped_limit_bytes {
        if spec.package.unzipped_bytes > limit {
            violations.push(Violation::UnzippedTooLarge {
                bytes: spec.package.unzipped_bytes,
                limit,
            });
        }
    }

    if !profile.supports_region(&spec.region) {
        violations.push(Violation::RegionUnknown {
            region: spec.region.clone(),
        });
    }

    ValidationReport { violations }
}

/// Invocation payload check; `None` when within limits or no limit is known.
pub fn validate_payload(profile: &PlatformProfile, bytes: u64) -> Option<Violation> {
    profile
        .payload_limit_bytes
        .filter(|limit| bytes > *limit)
        .map(|limit| Violation::PayloadTooLarge { bytes, limit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::package::{PackageArtifact, WorkloadManifest};
    use crate::platform::{builtin_profile, builtin_profiles, snap_memory, Trigger};
    use proptest::prelude::*;

    const MB: f64 = 1024.0 * 1024.0;

    fn spec_for(profile: &PlatformProfile, zip: u64, unzipped: u64) -> DeploymentSpec {
        let manifest = WorkloadManifest::minimal("probe", Language::new("python", ""), "handler.py");
        DeploymentSpec {
            language: profile.resolve_language(&Language::new("python", "")),
            memory_mb: 128,
            timeout_s: 1,
            region: profile.regions[0].clone(),
            trigger: Trigger::Http,
            package: PackageArtifact::declared(manifest, zip, unzipped),
            marker: None,
        }
    }

    #[test]
    fn minimal_spec_accepted_everywhere() {
        for p in builtin_profiles() {
            let report = validate(&p, &spec_for(&p, 0, 0));
            assert!(report.accepted(), "{}: {:?}", p.name, report.violations);
        }
    }

    #[test]
    fn tensorflow_sized_package_table() {
        let zip = (106.4 * MB) as u64;
        let unzipped = (661.8 * MB) as u64;
        for p in builtin_profiles() {
            let report = validate(&p, &spec_for(&p, zip, unzipped));
            if p.name == "azure" {
                assert!(report.accepted());
                continue;
            }
            assert!(
                report
                    .violations
                    .iter()
                    .any(|v| matches!(v, Violation::ZipTooLarge { .. })),
                "{}",
                p.name
            );
            assert!(
                report
                    .violations
                    .iter()
                    .any(|v| matches!(v, Violation::UnzippedTooLarge { .. })),
                "{}",
                p.name
            );
        }
    }

    #[test]
    fn every_violation_kind_reported() {
        let aws = builtin_profile("aws").unwrap();
        let mut spec = spec_for(&aws, 60 << 20, 300 << 20);
        spec.language = Language::new("cobol", "85");
        spec.memory_mb = 130;
        spec.timeout_s = 901;
        spec.region = "mars-1".into();
        let v = validate(&aws, &spec).violations;
        assert_eq!(v.len(), 6, "{v:?}");
        assert!(v.contains(&Violation::MemoryOffGrid {
            memory_mb: 130,
            next_valid_mb: Some(192)
        }));

        spec.memory_mb = 4096;
        spec.timeout_s = 0;
        spec.language = Language::new("python", "2.7");
        let v = validate(&aws, &spec).violations;
        assert!(v.contains(&Violation::MemoryOutOfRange {
            memory_mb: 4096,
            min_mb: 128,
            max_mb: 3008
        }));
        assert!(v.contains(&Violation::TimeoutNotPositive));
        assert!(v.contains(&Violation::LanguageDeprecated {
            language: Language::new("python", "2.7")
        }));
    }

    #[test]
    fn payload_limit_only_when_known() {
        let mut aws = builtin_profile("aws").unwrap();
        assert_eq!(validate_payload(&aws, u64::MAX), None);
        aws.payload_limit_bytes = Some(6 << 20);
        assert_eq!(validate_payload(&aws, 6 << 20), None);
        assert!(validate_payload(&aws, (6 << 20) + 1).is_some());
    }

    proptest! {
        #[test]
        fn shrinking_never_adds_violations(
            idx in 0usize..4,
            zip in 0u64..(700 << 20),
            unzipped in 0u64..(900 << 20),
            memory in 1u32..3100,
            timeout in 1u32..1000,
            shrink in 0.0f64..1.0,
        ) {
            let p = &builtin_profiles()[idx];
            let mut spec = spec_for(p, zip, unzipped);
            spec.memory_mb = memory;
            spec.timeout_s = timeout;
            let before = validate(p, &spec).violations;

            let mut smaller = spec.clone();
            smaller.package.zip_bytes = (zip as f64 * shrink) as u64;
            smaller.package.unzipped_bytes = (unzipped as f64 * shrink) as u64;
            smaller.timeout_s = ((timeout as f64 * shrink) as u32).max(1);
            if let Ok(s) = snap_memory(p, memory) {
                smaller.memory_mb = s.memory_mb;
            }
            let after = validate(p, &smaller).violations;
            let kind = |v: &Violation| std::mem::discriminant(v);
            for v in &after {
                prop_assert!(before.iter().any(|b| kind(b) == kind(v)), "new violation {v:?}");
            }
        }
    }
}
