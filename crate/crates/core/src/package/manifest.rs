use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PackageError;
use crate::platform::{Language, Trigger};

/// Fixed name of the manifest document inside a workload directory and at
/// the root of every archive.
pub const MANIFEST_FILE: &str = "workload.manifest";

/// Handlers with this prefix run inside the provider process (only the local
/// simulator offers any) and need no handler file.
pub const BUILTIN_HANDLER_PREFIX: &str = "builtin:";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dependency {
    pub name: String,
    pub bytes: u64,
    /// Whether the handler loads the dependency while initializing.
    #[serde(default)]
    pub import_at_init: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadManifest {
    pub id: String,
    /// Package variant label, set on size-sweep variants.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    pub language: Language,
    pub handler: String,
    #[serde(default)]
    pub trigger: Trigger,
    #[serde(default)]
    pub expected_output_schema: Vec<String>,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
    #[serde(default)]
    pub dependencies: Vec<Dependency>,
}

impl WorkloadManifest {
    pub fn minimal(id: impl Into<String>, language: Language, handler: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            variant: None,
            language,
            handler: handler.into(),
            trigger: Trigger::Http,
            expected_output_schema: Vec::new(),
            params: BTreeMap::new(),
            dependencies: Vec::new(),
        }
    }

    pub fn check(&self) -> Result<(), PackageError> {
        if self.id.trim().is_empty() {
            return Err(PackageError::InvalidManifest("empty id".into()));
        }
        if self.handler.trim().is_empty() {
            return Err(PackageError::InvalidManifest(format!("{}: empty handler", self.id)));
        }
        Ok(())
    }

    pub fn is_builtin(&self) -> bool {
        self.handler.starts_with(BUILTIN_HANDLER_PREFIX)
    }

    /// Name of an in-process workload, for `builtin:` handlers.
    pub fn builtin_name(&self) -> Option<&str> {
        self.handler.strip_prefix(BUILTIN_HANDLER_PREFIX)
    }

    /// Bytes of dependencies loaded at initialization.
    pub fn imported_bytes(&self) -> u64 {
        self.dependencies
            .iter()
            .filter(|d| d.import_at_init)
            .map(|d| d.bytes)
            .sum()
    }

    pub fn parse(text: &str) -> Result<Self, PackageError> {
        let m: WorkloadManifest = toml::from_str(text).map_err(|e| PackageError::InvalidManifest(e.to_string()))?;
        m.check()?;
        Ok(m)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes to TOML")
    }

    /// Reads `<dir>/workload.manifest`.
    pub fn load(dir: &Path) -> Result<Self, PackageError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|source| PackageError::Unreadable { path, source })?;
        Self::parse(&text)
    }
}
