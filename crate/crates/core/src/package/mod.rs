//! Workload manifests and deployable archives.

mod archive;
mod manifest;
mod variants;

use std::path::PathBuf;

use thiserror::Error;

pub use archive::{build_package, extract_archive, PackageArtifact};
pub use manifest::{Dependency, WorkloadManifest, MANIFEST_FILE};
pub use variants::{make_size_variants, SizeVariant};

#[derive(Debug, Error)]
pub enum PackageError {
    #[error("handler file {handler} not found in {dir}")]
    MissingHandler { handler: String, dir: PathBuf },
    #[error("cannot read {path}: {source}")]
    Unreadable { path: PathBuf, source: std::io::Error },
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("variant {label}: padding of {bytes} bytes is negative")]
    NegativePadding { label: String, bytes: i64 },
    #[error("archive member {0} escapes the extraction directory")]
    UnsafeMember(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Zip(#[from] zip::result::ZipError),
}
