//! Provider-agnostic serverless benchmarking.
//!
//! The crate is organized along the benchmarking pipeline:
//!
//! * [`platform`] encodes platform characteristics (limits, memory grids, CPU
//!   share, billing) and validates candidate deployments against them.
//! * [`package`] turns a workload directory plus its manifest into a
//!   reproducible zip archive and builds package-size sweep variants.
//! * [`provider`] defines the deploy / invoke / logs / teardown adapter
//!   contract and ships a generic HTTP adapter.
//! * [`sim`] is an in-process provider with an explicit cold-start model and
//!   keep-alive instance pool, so every protocol has a known ground truth.
//! * [`engine`] runs measurement plans: the invoke-twice cold-start
//!   estimator, repeated latency trials and throughput runs.
//! * [`report`] reduces persisted trials into order statistics, CSV tables and
//!   declarative figure documents.

pub mod clock;
pub mod engine;
pub mod package;
pub mod par;
pub mod platform;
pub mod provider;
pub mod report;
pub mod sim;

pub use clock::{Clock, RealClock, VirtualClock};
pub use par::Execution;
