//! Generic HTTP adapter for functions deployed by other means.
//!
//! "Deploying" binds a workload id to a configured endpoint; invocation is a
//! POST of the JSON payload whose response body is parsed as a handler
//! result. Vendor-specific deployment glue is out of scope here.

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{
    function_id_for, timed_request, unix_ms_now, DeploymentHandle, InvocationRecord, Provider, ProviderError,
    RequestOutcome, ValidatedDeployment,
};
use crate::clock::Clock;
use crate::platform::PlatformProfile;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpConfig {
    /// Endpoint per workload id.
    #[serde(default)]
    pub endpoints: BTreeMap<String, String>,
    /// Used for workloads without their own entry.
    #[serde(default)]
    pub default_endpoint: Option<String>,
    #[serde(default)]
    pub headers: BTreeMap<String, String>,
    /// Sent as `Authorization: Bearer <token>`.
    #[serde(default)]
    pub auth_token: Option<String>,
}

pub struct HttpProvider {
    profile: PlatformProfile,
    config: HttpConfig,
    agent: ureq::Agent,
    live: Mutex<BTreeMap<String, DeploymentHandle>>,
}

impl HttpProvider {
    pub fn new(profile: PlatformProfile, config: HttpConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Self {
            profile,
            config,
            agent,
            live: Mutex::new(BTreeMap::new()),
        }
    }

    fn endpoint_for(&self, workload: &str) -> Option<&str> {
        self.config
            .endpoints
            .get(workload)
            .or(self.config.default_endpoint.as_ref())
            .map(String::as_str)
    }

    fn post(&self, url: &str, body: &str, timeout: Duration) -> RequestOutcome {
        let mut req = self
            .agent
            .post(url)
            .config()
            .timeout_global(Some(timeout))
            .build()
            .header("content-type", "application/json");
        for (k, v) in &self.config.headers {
            req = req.header(k.as_str(), v.as_str());
        }
        if let Some(token) = &self.config.auth_token {
            req = req.header("authorization", format!("Bearer {token}"));
        }
        match req.send(body) {
            Ok(mut resp) => {
                let status = resp.status();
                let text = match resp.body_mut().read_to_string() {
                    Ok(t) => t,
                    Err(ureq::Error::Timeout(_)) => return RequestOutcome::TimedOut,
                    Err(e) => return RequestOutcome::Failed(format!("reading body: {e}")),
                };
                if status.is_success() {
                    RequestOutcome::Body(text)
                } else {
                    RequestOutcome::Failed(format!("HTTP {}: {}", status.as_u16(), text))
                }
            }
            Err(ureq::Error::Timeout(_)) => RequestOutcome::TimedOut,
            Err(e) => RequestOutcome::Failed(e.to_string()),
        }
    }
}

impl Provider for HttpProvider {
    fn name(&self) -> &str {
        "http"
    }

    fn profile(&self) -> &PlatformProfile {
        &self.profile
    }

    fn deploy_validated(&self, deployment: ValidatedDeployment) -> Result<DeploymentHandle, ProviderError> {
        let spec = deployment.into_spec();
        let function_id = function_id_for("http", &spec);
        let mut live = self.live.lock().expect("http registry poisoned");
        if let Some(h) = live.get(&function_id) {
            return Ok(h.clone());
        }
        let workload = &spec.package.manifest.id;
        let endpoint = self
            .endpoint_for(workload)
            .ok_or_else(|| ProviderError::Rejected(format!("no endpoint configured for {workload}")))?
            .to_string();
        let handle = DeploymentHandle {
            provider: self.name().to_string(),
            function_id: function_id.clone(),
            spec,
            endpoint,
            created_at_unix_ms: unix_ms_now(),
        };
        live.insert(function_id, handle.clone());
        Ok(handle)
    }

    fn invoke(
        &self,
        handle: &DeploymentHandle,
        payload: &serde_json::Value,
        timeout: Duration,
        clock: &dyn Clock,
    ) -> Result<InvocationRecord, ProviderError> {
        if !self
            .live
            .lock()
            .expect("http registry poisoned")
            .contains_key(&handle.function_id)
        {
            return Err(ProviderError::NotFound(handle.function_id.clone()));
        }
        let body = payload.to_string();
        let schema = &handle.spec.package.manifest.expected_output_schema;
        Ok(timed_request(clock, &handle.function_id, timeout, schema, || {
            self.post(&handle.endpoint, &body, timeout)
        }))
    }

    fn teardown(&self, handle: &DeploymentHandle) -> Result<(), ProviderError> {
        self.live
            .lock()
            .expect("http registry poisoned")
            .remove(&handle.function_id)
            .map(|_| ())
            .ok_or_else(|| ProviderError::NotFound(handle.function_id.clone()))
    }

    fn restore(&self, handle: &DeploymentHandle) -> Result<(), ProviderError> {
        self.live
            .lock()
            .expect("http registry poisoned")
            .insert(handle.function_id.clone(), handle.clone());
        Ok(())
    }
}
