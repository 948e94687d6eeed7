//! The provider adapter contract.
//!
//! A provider deploys packaged workloads, invokes them, exposes their logs
//! and tears them down. Vendor adapters plug in by implementing [`Provider`];
//! this crate ships the generic [`HttpProvider`] for pre-deployed endpoints
//! and the local simulator ([`crate::sim::LocalSim`]).
//!
//! Timing is always taken by the caller's [`Clock`] immediately around the
//! request (see [`timed_request`]); providers never report durations of their
//! own for the response time.

mod http;
mod record;

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Clock;
use crate::platform::{validate, DeploymentSpec, PlatformProfile, Violation};

pub use http::{HttpConfig, HttpProvider};
pub use record::{
    parse_response, timed_request, ColdEvidence, InvocationRecord, InvocationStatus, ParsedResponse, RequestOutcome,
};

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("deployment violates platform limits: {}", join_violations(.0))]
    Precondition(Vec<Violation>),
    #[error("provider rejected the request: {0}")]
    Rejected(String),
    #[error("function {0} not found")]
    NotFound(String),
    #[error("{provider} does not support {operation}")]
    Unsupported { provider: String, operation: &'static str },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// A deployed function family on one provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentHandle {
    pub provider: String,
    pub function_id: String,
    pub spec: DeploymentSpec,
    pub endpoint: String,
    /// Wall-clock creation time, unix milliseconds. Informational only.
    pub created_at_unix_ms: u64,
}

/// A spec that passed [`validate`] against the provider's profile. Only
/// [`deploy`] constructs one, so adapters cannot be handed an unchecked spec.
#[derive(Debug, Clone)]
pub struct ValidatedDeployment {
    spec: DeploymentSpec,
}

impl ValidatedDeployment {
    pub fn spec(&self) -> &DeploymentSpec {
        &self.spec
    }

    pub fn into_spec(self) -> DeploymentSpec {
        self.spec
    }
}

/// One provider-side log line in the common schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLine {
    /// Provider clock reading in nanoseconds.
    pub timestamp_ns: u64,
    pub function_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_id: Option<u64>,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exec_ms: Option<f64>,
}

pub trait Provider: Send + Sync {
    fn name(&self) -> &str;

    /// Limits deployments are validated against.
    fn profile(&self) -> &PlatformProfile;

    /// Idempotent: an identical (digest, spec) returns the live handle.
    fn deploy_validated(&self, deployment: ValidatedDeployment) -> Result<DeploymentHandle, ProviderError>;

    /// One timed invocation. Timeouts and transport failures are reported in
    /// the record's status; only an unknown handle is an `Err`.
    fn invoke(
        &self,
        handle: &DeploymentHandle,
        payload: &serde_json::Value,
        timeout: Duration,
        clock: &dyn Clock,
    ) -> Result<InvocationRecord, ProviderError>;

    fn teardown(&self, handle: &DeploymentHandle) -> Result<(), ProviderError>;

    /// Drops warm instances without undeploying, so the next invocation is cold.
    fn evict(&self, _handle: &DeploymentHandle) -> Result<(), ProviderError> {
        Err(ProviderError::Unsupported {
            provider: self.name().to_string(),
            operation: "evict",
        })
    }

    /// Provider-side records newer than `since_ns` (inclusive).
    fn fetch_logs(&self, _handle: &DeploymentHandle, _since_ns: u64) -> Result<Vec<LogLine>, ProviderError> {
        Err(ProviderError::Unsupported {
            provider: self.name().to_string(),
            operation: "fetch_logs",
        })
    }

    /// Re-attaches a handle persisted by an earlier process.
    fn restore(&self, handle: &DeploymentHandle) -> Result<(), ProviderError> {
        let _ = handle;
        Ok(())
    }
}

/// Validates `spec` against the provider's profile and deploys it.
///
/// A rejected spec fails with [`ProviderError::Precondition`] before the
/// provider is contacted.
pub fn deploy(provider: &dyn Provider, spec: DeploymentSpec) -> Result<DeploymentHandle, ProviderError> {
    let report = validate(provider.profile(), &spec);
    if !report.accepted() {
        return Err(ProviderError::Precondition(report.violations));
    }
    provider.deploy_validated(ValidatedDeployment { spec })
}

pub(crate) fn unix_ms_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Function id derived from provider name and deployment key.
pub(crate) fn function_id_for(prefix: &str, spec: &DeploymentSpec) -> String {
    format!("{prefix}-{}", &spec.deployment_key()[..16])
}

/// Hands out sequence numbers for records appended from many threads.
#[derive(Debug, Default)]
pub struct SeqCounter(AtomicU64);

impl SeqCounter {
    pub fn next(&self) -> u64 {
        self.0.fetch_add(1, Ordering::SeqCst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::package::{PackageArtifact, WorkloadManifest};
    use crate::platform::{builtin_profile, Language, Trigger};
    use std::sync::atomic::AtomicUsize;

    struct Counting {
        profile: PlatformProfile,
        deploys: AtomicUsize,
    }

    impl Provider for Counting {
        fn name(&self) -> &str {
            "counting"
        }
        fn profile(&self) -> &PlatformProfile {
            &self.profile
        }
        fn deploy_validated(&self, d: ValidatedDeployment) -> Result<DeploymentHandle, ProviderError> {
            self.deploys.fetch_add(1, Ordering::SeqCst);
            let spec = d.into_spec();
            Ok(DeploymentHandle {
                provider: "counting".into(),
                function_id: function_id_for("c", &spec),
                endpoint: "none".into(),
                spec,
                created_at_unix_ms: 0,
            })
        }
        fn invoke(
            &self,
            _: &DeploymentHandle,
            _: &serde_json::Value,
            _: Duration,
            _: &dyn Clock,
        ) -> Result<InvocationRecord, ProviderError> {
            unimplemented!()
        }
        fn teardown(&self, _: &DeploymentHandle) -> Result<(), ProviderError> {
            Ok(())
        }
    }

    fn spec(memory_mb: u32) -> DeploymentSpec {
        let m = WorkloadManifest::minimal("w", Language::new("python", "3.8"), "builtin:synthetic");
        DeploymentSpec {
            language: Language::new("python", "3.8"),
            memory_mb,
            timeout_s: 10,
            region: "us-east-1".into(),
            trigger: Trigger::Http,
            package: PackageArtifact::declared(m, 10, 10),
            marker: None,
        }
    }

    #[test]
    fn off_grid_spec_never_reaches_the_provider() {
        let p = Counting {
            profile: builtin_profile("aws").unwrap(),
            deploys: AtomicUsize::new(0),
        };
        let err = deploy(&p, spec(130)).unwrap_err();
        assert!(matches!(&err, ProviderError::Precondition(v) if v.len() == 1));
        assert!(err.to_string().contains("off-grid"));
        assert_eq!(p.deploys.load(Ordering::SeqCst), 0);
        deploy(&p, spec(192)).unwrap();
        assert_eq!(p.deploys.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn default_optional_operations_are_unsupported() {
        let p = Counting {
            profile: builtin_profile("aws").unwrap(),
            deploys: AtomicUsize::new(0),
        };
        let h = deploy(&p, spec(128)).unwrap();
        assert!(matches!(
            p.evict(&h),
            Err(ProviderError::Unsupported { operation: "evict", .. })
        ));
        assert!(matches!(
            p.fetch_logs(&h, 0),
            Err(ProviderError::Unsupported {
                operation: "fetch_logs",
                ..
            })
        ));
    }

    #[test]
    fn function_id_is_stable_per_spec() {
        assert_eq!(function_id_for("x", &spec(128)), function_id_for("x", &spec(128)));
        assert_ne!(function_id_for("x", &spec(128)), function_id_for("x", &spec(256)));
        let mut marked = spec(128);
        marked.marker = Some("cold-1".into());
        assert_ne!(function_id_for("x", &spec(128)), function_id_for("x", &marked));
    }
}
