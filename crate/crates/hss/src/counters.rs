//! Cost-model instrumentation: tallies of matvecs, entry evaluations,
//! random draws and an analytic flop estimate.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;

/// Thread-safe monotone counters attached to every matrix accessor.
///
/// Counts only ever increase except through [`reset`](Self::reset). The flop
/// field is an analytic estimate accumulated by the accessor's own operations
/// and by the compression sweep; it is not a hardware measurement.
#[derive(Debug, Default)]
pub struct InstrumentationCounters {
    matvecs: AtomicU64,
    transpose_matvecs: AtomicU64,
    entries: AtomicU64,
    rng_draws: AtomicU64,
    flops: AtomicU64,
}

impl InstrumentationCounters {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn record_matvec(&self) {
        self.matvecs.fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn record_transpose_matvec(&self) {
        self.transpose_matvecs.fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn record_entries(&self, count: u64) {
        self.entries.fetch_add(count, Ordering::Relaxed);
    }

    pub(crate) fn record_rng_draws(&self, count: u64) {
        self.rng_draws.fetch_add(count, Ordering::Relaxed);
    }

    pub(crate) fn record_flops(&self, count: u64) {
        self.flops.fetch_add(count, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> CounterSnapshot {
        CounterSnapshot {
            matvec_count: self.matvecs.load(Ordering::Relaxed),
            transpose_matvec_count: self.transpose_matvecs.load(Ordering::Relaxed),
            entry_count: self.entries.load(Ordering::Relaxed),
            rng_draws: self.rng_draws.load(Ordering::Relaxed),
            flop_estimate: self.flops.load(Ordering::Relaxed),
        }
    }

    /// Zero all counters. The only non-monotone operation.
    pub fn reset(&self) {
        self.matvecs.store(0, Ordering::Relaxed);
        self.transpose_matvecs.store(0, Ordering::Relaxed);
        self.entries.store(0, Ordering::Relaxed);
        self.rng_draws.store(0, Ordering::Relaxed);
        self.flops.store(0, Ordering::Relaxed);
    }
}

/// A point-in-time copy of the counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct CounterSnapshot {
    pub matvec_count: u64,
    pub transpose_matvec_count: u64,
    pub entry_count: u64,
    pub rng_draws: u64,
    pub flop_estimate: u64,
}

impl CounterSnapshot {
    /// Counter increments since `earlier`.
    pub fn delta(&self, earlier: &CounterSnapshot) -> CounterSnapshot {
        CounterSnapshot {
            matvec_count: self.matvec_count - earlier.matvec_count,
            transpose_matvec_count: self.transpose_matvec_count
                - earlier.transpose_matvec_count,
            entry_count: self.entry_count - earlier.entry_count,
            rng_draws: self.rng_draws - earlier.rng_draws,
            flop_estimate: self.flop_estimate - earlier.flop_estimate,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deltas_and_reset() {
        let c = InstrumentationCounters::new();
        c.record_matvec();
        c.record_entries(5);
        let first = c.snapshot();
        c.record_matvec();
        c.record_transpose_matvec();
        let second = c.snapshot();
        let d = second.delta(&first);
        assert_eq!(d.matvec_count, 1);
        assert_eq!(d.transpose_matvec_count, 1);
        assert_eq!(d.entry_count, 0);
        c.reset();
        assert_eq!(c.snapshot(), CounterSnapshot::default());
    }

    #[test]
    fn concurrent_increments_are_not_lost() {
        let c = std::sync::Arc::new(InstrumentationCounters::new());
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let c = c.clone();
                std::thread::spawn(move || {
                    for _ in 0..1000 {
                        c.record_entries(1);
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(c.snapshot().entry_count, 8000);
    }
}
