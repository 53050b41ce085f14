//! Clocks and per-pass latency emulation.
//!
//! n-gram "models" are all about equally cheap, which would leave the
//! draft/target cost ratio near 1. [`Emulated`] charges a fixed busy-wait per
//! forward pass so that a target pass costs what a large model's would,
//! relative to the draft.

use std::time::{Duration, Instant};

use specroute_core::engine::Clock;
use specroute_core::{LanguageModel, ProbVector, TokenId};

/// Seconds since construction, from the monotonic clock.
#[derive(Debug, Clone, Copy)]
pub struct MonotonicClock {
    origin: Instant,
}

impl MonotonicClock {
    pub fn new() -> Self {
        MonotonicClock {
            origin: Instant::now(),
        }
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for MonotonicClock {
    fn now(&self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }
}

fn spin(d: Duration) {
    if d.is_zero() {
        return;
    }
    let end = Instant::now() + d;
    while Instant::now() < end {
        std::hint::spin_loop();
    }
}

/// Wraps a model and burns `pass_cost` of wall time per forward pass. A
/// multi-position `forward` call is one pass.
#[derive(Debug, Clone)]
pub struct Emulated<M> {
    inner: M,
    pass_cost: Duration,
}

impl<M> Emulated<M> {
    pub fn new(inner: M, pass_cost: Duration) -> Self {
        Emulated { inner, pass_cost }
    }

    pub fn micros(inner: M, us: u64) -> Self {
        Self::new(inner, Duration::from_micros(us))
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }
}

impl<M: LanguageModel> LanguageModel for Emulated<M> {
    fn vocab_size(&self) -> usize {
        self.inner.vocab_size()
    }

    fn next_distribution(&self, context: &[TokenId]) -> ProbVector {
        spin(self.pass_cost);
        self.inner.next_distribution(context)
    }

    fn forward(&self, context: &[TokenId], continuation: &[TokenId]) -> Vec<ProbVector> {
        spin(self.pass_cost);
        self.inner.forward(context, continuation)
    }
}
