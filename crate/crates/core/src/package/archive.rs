use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, DateTime, ZipArchive, ZipWriter};

use super::{PackageError, WorkloadManifest, MANIFEST_FILE};

const DIGEST_DOMAIN: &[u8] = b"slsbench-package-v1\0";
const SAMPLE_BYTES: usize = 64 * 1024;
const CHUNK: usize = 64 * 1024;

/// A built, deployable archive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackageArtifact {
    pub manifest: WorkloadManifest,
    pub archive_path: PathBuf,
    pub zip_bytes: u64,
    pub unzipped_bytes: u64,
    /// Hash of the member tree and the manifest's behavioural fields (the
    /// variant label is excluded). Stable across rebuilds of the same tree.
    pub content_digest: String,
}

impl PackageArtifact {
    /// An artifact known only by its sizes, for what-if validation of
    /// packages that are not built locally.
    pub fn declared(manifest: WorkloadManifest, zip_bytes: u64, unzipped_bytes: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"declared\0");
        h.update(identity_json(&manifest));
        h.update(zip_bytes.to_le_bytes());
        h.update(unzipped_bytes.to_le_bytes());
        Self {
            manifest,
            archive_path: PathBuf::new(),
            zip_bytes,
            unzipped_bytes,
            content_digest: hex::encode(h.finalize()),
        }
    }

    pub fn short_digest(&self) -> &str {
        &self.content_digest[..self.content_digest.len().min(12)]
    }
}

pub(super) enum MemberSource {
    File(PathBuf),
    /// Seeded pseudo-random bytes; incompressible by construction.
    Padding {
        seed: u64,
        len: u64,
    },
}

pub(super) struct Member {
    pub path: String,
    pub source: MemberSource,
}

/// Packages `workload_dir` with `manifest` into a zip under `out_dir`.
///
/// The archive holds every regular file of the directory (any manifest file
/// already there is replaced by `manifest`), in sorted order with zeroed
/// timestamps and fixed permissions, so identical trees give identical bytes.
/// The input directory is never modified.
pub fn build_package(
    workload_dir: &Path,
    manifest: &WorkloadManifest,
    out_dir: &Path,
) -> Result<PackageArtifact, PackageError> {
    manifest.check()?;
    let members = collect_tree(workload_dir)?;
    if !manifest.is_builtin() {
        let handler = manifest.handler.trim_start_matches("./");
        if !members.iter().any(|m| m.path == handler) {
            return Err(PackageError::MissingHandler {
                handler: manifest.handler.clone(),
                dir: workload_dir.to_path_buf(),
            });
        }
    }
    write_archive(members, manifest, out_dir)
}

pub(super) fn collect_tree(dir: &Path) -> Result<Vec<Member>, PackageError> {
    let unreadable = |path: &Path, source: io::Error| PackageError::Unreadable {
        path: path.to_path_buf(),
        source,
    };
    let meta = std::fs::metadata(dir).map_err(|e| unreadable(dir, e))?;
    if !meta.is_dir() {
        return Err(unreadable(
            dir,
            io::Error::new(io::ErrorKind::NotADirectory, "not a directory"),
        ));
    }
    let mut members = Vec::new();
    for entry in walkdir::WalkDir::new(dir).follow_links(false) {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(dir).to_path_buf();
            unreadable(&path, e.into())
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(dir)
            .expect("walkdir yields paths under its root");
        let rel = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        if rel == MANIFEST_FILE {
            continue;
        }
        members.push(Member {
            path: rel,
            source: MemberSource::File(entry.path().to_path_buf()),
        });
    }
    Ok(members)
}

pub(super) fn write_archive(
    mut members: Vec<Member>,
    manifest: &WorkloadManifest,
    out_dir: &Path,
) -> Result<PackageArtifact, PackageError> {
    members.sort_by(|a, b| a.path.cmp(&b.path));
    std::fs::create_dir_all(out_dir)?;
    let tmp = tempfile::NamedTempFile::new_in(out_dir)?;
    let mut zip = ZipWriter::new(BufWriter::new(tmp.reopen()?));
    let base = SimpleFileOptions::default()
        .last_modified_time(DateTime::default())
        .unix_permissions(0o644)
        .large_file(false);

    let mut digest = Sha256::new();
    digest.update(DIGEST_DOMAIN);
    let mut unzipped = 0u64;

    for member in &members {
        let (mut reader, method): (Box<dyn Read>, _) = match &member.source {
            MemberSource::File(path) => {
                let method = if compresses(path)? {
                    CompressionMethod::Deflated
                } else {
                    CompressionMethod::Stored
                };
                let f = File::open(path).map_err(|source| PackageError::Unreadable {
                    path: path.clone(),
                    source,
                })?;
                (Box::new(f), method)
            }
            MemberSource::Padding { seed, len } => {
                (Box::new(PaddingReader::new(*seed, *len)), CompressionMethod::Stored)
            }
        };
        let large = match &member.source {
            MemberSource::Padding { len, .. } => *len >= u32::MAX as u64,
            MemberSource::File(p) => std::fs::metadata(p)?.len() >= u32::MAX as u64,
        };
        zip.start_file(member.path.as_str(), base.compression_method(method).large_file(large))?;
        digest.update(member.path.as_bytes());
        digest.update([0]);
        let mut len = 0u64;
        let mut member_hash = Sha256::new();
        let mut buf = vec![0u8; CHUNK];
        loop {
            let n = reader.read(&mut buf)?;
            if n == 0 {
                break;
            }
            member_hash.update(&buf[..n]);
            zip.write_all(&buf[..n])?;
            len += n as u64;
        }
        digest.update(len.to_le_bytes());
        digest.update(member_hash.finalize());
        unzipped += len;
    }

    let manifest_text = manifest.to_toml();
    zip.start_file(MANIFEST_FILE, base.compression_method(CompressionMethod::Deflated))?;
    zip.write_all(manifest_text.as_bytes())?;
    unzipped += manifest_text.len() as u64;
    digest.update(identity_json(manifest));

    let mut writer = zip.finish()?;
    writer.flush()?;
    drop(writer);

    let content_digest = hex::encode(digest.finalize());
    let file_name = match &manifest.variant {
        Some(v) => format!(
            "{}--{}-{}.zip",
            sanitize(&manifest.id),
            sanitize(v),
            &content_digest[..12]
        ),
        None => format!("{}-{}.zip", sanitize(&manifest.id), &content_digest[..12]),
    };
    let archive_path = out_dir.join(file_name);
    tmp.persist(&archive_path).map_err(|e| e.error)?;
    let zip_bytes = std::fs::metadata(&archive_path)?.len();
    Ok(PackageArtifact {
        manifest: manifest.clone(),
        archive_path,
        zip_bytes,
        unzipped_bytes: unzipped,
        content_digest,
    })
}

/// Manifest fields that change what gets deployed; excludes the variant label.
fn identity_json(manifest: &WorkloadManifest) -> Vec<u8> {
    let mut m = manifest.clone();
    m.variant = None;
    serde_json::to_vec(&m).expect("manifest serializes to JSON")
}

/// Deflate only when a leading sample actually shrinks.
fn compresses(path: &Path) -> Result<bool, PackageError> {
    let mut sample = Vec::with_capacity(SAMPLE_BYTES);
    File::open(path)
        .map_err(|source| PackageError::Unreadable {
            path: path.to_path_buf(),
            source,
        })?
        .take(SAMPLE_BYTES as u64)
        .read_to_end(&mut sample)?;
    if sample.len() < 512 {
        return Ok(true);
    }
    let mut enc = flate2::write::DeflateEncoder::new(Vec::new(), flate2::Compression::fast());
    enc.write_all(&sample)?;
    let out = enc.finish()?;
    Ok((out.len() as f64) < 0.95 * sample.len() as f64)
}

pub(super) fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "._-".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

struct PaddingReader {
    rng: ChaCha8Rng,
    remaining: u64,
}

impl PaddingReader {
    fn new(seed: u64, len: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            remaining: len,
        }
    }
}

impl Read for PaddingReader {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = (buf.len() as u64).min(self.remaining) as usize;
        self.rng.fill_bytes(&mut buf[..n]);
        self.remaining -= n as u64;
        Ok(n)
    }
}

/// Extracts `archive` under `dest`, returning the written paths in archive
/// order. Members that would land outside `dest` are refused.
pub fn extract_archive(archive: &Path, dest: &Path) -> Result<Vec<PathBuf>, PackageError> {
    let file = File::open(archive).map_err(|source| PackageError::Unreadable {
        path: archive.to_path_buf(),
        source,
    })?;
    let mut zip = ZipArchive::new(io::BufReader::new(file))?;
    let mut written = Vec::with_capacity(zip.len());
    for i in 0..zip.len() {
        let mut entry = zip.by_index(i)?;
        let rel = entry
            .enclosed_name()
            .ok_or_else(|| PackageError::UnsafeMember(entry.name().to_string()))?;
        let out = dest.join(rel);
        if entry.is_dir() {
            std::fs::create_dir_all(&out)?;
            continue;
        }
        if let Some(parent) = out.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut f = File::create(&out)?;
        io::copy(&mut entry, &mut f)?;
        written.push(out);
    }
    Ok(written)
}
