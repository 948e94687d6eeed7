//! Monotonic client clocks.
//!
//! Every duration the harness reports is the difference of two readings of a
//! [`Clock`]. Providers that simulate latency (the local simulator) spend time
//! through the same clock, which lets a whole experiment run on virtual time
//! without changing any measurement code.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

pub trait Clock: Send + Sync {
    /// Nanoseconds since the clock's epoch. Never decreases for a given clock.
    fn now_ns(&self) -> u64;

    /// Lets `d` elapse on this clock.
    fn sleep(&self, d: Duration);

    /// A clock for an independent timeline (a worker thread or sweep point).
    ///
    /// Real clocks share one timeline, so this returns an equivalent clock.
    /// Virtual clocks start a new timeline at the current reading.
    fn fork(&self) -> Arc<dyn Clock>;

    fn is_virtual(&self) -> bool;
}

/// `std::time::Instant`-backed clock.
#[derive(Debug, Clone, Copy)]
pub struct RealClock {
    epoch: Instant,
}

impl RealClock {
    pub fn new() -> Self {
        Self { epoch: Instant::now() }
    }
}

impl Default for RealClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for RealClock {
    fn now_ns(&self) -> u64 {
        self.epoch.elapsed().as_nanos() as u64
    }

    fn sleep(&self, d: Duration) {
        if !d.is_zero() {
            std::thread::sleep(d);
        }
    }

    fn fork(&self) -> Arc<dyn Clock> {
        Arc::new(*self)
    }

    fn is_virtual(&self) -> bool {
        false
    }
}

/// Simulated clock: time only moves when something sleeps on it.
#[derive(Debug, Default)]
pub struct VirtualClock {
    now: AtomicU64,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::starting_at(0)
    }

    pub fn starting_at(ns: u64) -> Self {
        Self {
            now: AtomicU64::new(ns),
        }
    }
}

impl Clock for VirtualClock {
    fn now_ns(&self) -> u64 {
        self.now.load(Ordering::SeqCst)
    }

    fn sleep(&self, d: Duration) {
        self.now.fetch_add(d.as_nanos() as u64, Ordering::SeqCst);
    }

    fn fork(&self) -> Arc<dyn Clock> {
        Arc::new(VirtualClock::starting_at(self.now_ns()))
    }

    fn is_virtual(&self) -> bool {
        true
    }
}

pub fn ms_to_duration(ms: f64) -> Duration {
    Duration::from_nanos((ms.max(0.0) * 1e6).round() as u64)
}
