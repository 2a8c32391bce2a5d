//! Deterministic discrete-event core: virtual clock, event queue, seeded
//! randomness and statistics.

mod queue;
mod rng;
mod stats;
mod time;
mod timeline;

use thiserror::Error;

pub use queue::EventQueue;
pub use rng::SimRng;
pub use stats::{
    percentile, CacheCounters, FinalReport, GcEvent, LatencySample, LatencySummary, SampleOp,
    ServedBy, StatsReport, RESULTS_CSV_HEADER,
};
pub use time::{Clock, Tick};
pub use timeline::Timeline;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("event due at {due} scheduled while the clock is at {now}")]
    SchedulingInPast { due: Tick, now: Tick },
    #[error("percentile of an empty sample set")]
    EmptySamples,
    #[error("percentile fraction {0} is outside (0, 1]")]
    InvalidFraction(f64),
}
