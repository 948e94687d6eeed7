use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::archive::{collect_tree, sanitize, write_archive, Member, MemberSource};
use super::{extract_archive, Dependency, PackageArtifact, PackageError, MANIFEST_FILE};
use crate::par::{self, Execution};

/// One point of a package-size sweep: the base package plus an inert
/// dependency of `padding_bytes`, loaded at init or not.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeVariant {
    pub label: String,
    pub padding_bytes: i64,
    #[serde(default)]
    pub import_at_init: bool,
}

impl SizeVariant {
    pub fn new(label: impl Into<String>, padding_bytes: i64, import_at_init: bool) -> Self {
        Self {
            label: label.into(),
            padding_bytes,
            import_at_init,
        }
    }
}

/// Builds one artifact per variant from `base`.
///
/// Padding is a seeded pseudo-random file under `deps/<label>/`, declared in
/// the manifest as a dependency so the handler (or the simulator) knows
/// whether it is imported at initialization. Zero padding adds nothing, so
/// such a variant has the base digest.
pub fn make_size_variants(
    base: &PackageArtifact,
    variants: &[SizeVariant],
    out_dir: &Path,
    seed: u64,
    exec: Execution,
) -> Result<Vec<PackageArtifact>, PackageError> {
    if let Some(v) = variants.iter().find(|v| v.padding_bytes < 0) {
        return Err(PackageError::NegativePadding {
            label: v.label.clone(),
            bytes: v.padding_bytes,
        });
    }
    let tree = tempfile::tempdir()?;
    extract_archive(&base.archive_path, tree.path())?;
    std::fs::remove_file(tree.path().join(MANIFEST_FILE))?;

    let results = par::map(exec, variants.iter().collect(), |variant| {
        let mut members: Vec<Member> = collect_tree(tree.path())?;
        let mut manifest = base.manifest.clone();
        manifest.variant = Some(variant.label.clone());
        if variant.padding_bytes > 0 {
            let len = variant.padding_bytes as u64;
            let dep_name = format!("padding-{}", sanitize(&variant.label));
            members.push(Member {
                path: format!("deps/{dep_name}/padding.bin"),
                source: MemberSource::Padding {
                    seed: padding_seed(seed, &variant.label),
                    len,
                },
            });
            manifest.dependencies.push(Dependency {
                name: dep_name,
                bytes: len,
                import_at_init: variant.import_at_init,
            });
        }
        write_archive(members, &manifest, out_dir)
    });
    results.into_iter().collect()
}

fn padding_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::package::{build_package, WorkloadManifest};
    use crate::platform::Language;

    fn base(out: &Path) -> (tempfile::TempDir, PackageArtifact) {
        let src = tempfile::tempdir().unwrap();
        std::fs::write(src.path().join("handler.py"), "def main(e):\n    return e\n").unwrap();
        let m = WorkloadManifest::minimal("w", Language::new("python", "3.8"), "handler.py");
        let a = build_package(src.path(), &m, out).unwrap();
        (src, a)
    }

    #[test]
    fn zero_padding_keeps_base_digest() {
        let out = tempfile::tempdir().unwrap();
        let (_src, b) = base(out.path());
        let v = make_size_variants(
            &b,
            &[SizeVariant::new("same", 0, false)],
            out.path(),
            1,
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(v[0].content_digest, b.content_digest);
        assert_eq!(v[0].manifest.variant.as_deref(), Some("same"));
    }

    #[test]
    fn negative_padding_is_rejected() {
        let out = tempfile::tempdir().unwrap();
        let (_src, b) = base(out.path());
        let err = make_size_variants(
            &b,
            &[SizeVariant::new("ok", 1, false), SizeVariant::new("bad", -1, false)],
            out.path(),
            1,
            Execution::Sequential,
        )
        .unwrap_err();
        assert!(matches!(err, PackageError::NegativePadding { bytes: -1, .. }));
    }

    #[test]
    fn padding_sizes_and_import_flag() {
        let out = tempfile::tempdir().unwrap();
        let (_src, b) = base(out.path());
        let padding = 3 << 20;
        let v = make_size_variants(
            &b,
            &[
                SizeVariant::new("no-import", padding, false),
                SizeVariant::new("with-import", padding, true),
            ],
            out.path(),
            9,
            Execution::Parallel,
        )
        .unwrap();
        for a in &v {
            let grown = a.unzipped_bytes - b.unzipped_bytes;
            assert!((grown as f64 - padding as f64).abs() <= 0.01 * padding as f64);
            // incompressible padding
            assert!(a.zip_bytes as f64 >= 0.99 * padding as f64);
        }
        assert_eq!(v[0].manifest.imported_bytes(), 0);
        assert_eq!(v[1].manifest.imported_bytes(), padding as u64);
        assert_ne!(v[0].content_digest, v[1].content_digest);
    }

    #[test]
    fn sequential_and_parallel_builds_agree() {
        let out = tempfile::tempdir().unwrap();
        let (_src, b) = base(out.path());
        let variants = [SizeVariant::new("a", 1000, false), SizeVariant::new("b", 5000, true)];
        let s = make_size_variants(&b, &variants, out.path(), 3, Execution::Sequential).unwrap();
        let p = make_size_variants(&b, &variants, out.path(), 3, Execution::Parallel).unwrap();
        let digests = |v: &[PackageArtifact]| v.iter().map(|a| a.content_digest.clone()).collect::<Vec<_>>();
        assert_eq!(digests(&s), digests(&p));
    }
}
