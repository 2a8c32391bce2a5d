use std::fmt;
use std::io::{self, Write};

use serde::Serialize;

use super::{EngineError, Tick};
use crate::protocol::Annotation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ServedBy {
    CpuL1,
    CpuL2,
    DeviceDram,
    DeviceFlash,
    HostDram,
}

impl ServedBy {
    pub fn as_str(self) -> &'static str {
        match self {
            ServedBy::CpuL1 => "cpu_l1",
            ServedBy::CpuL2 => "cpu_l2",
            ServedBy::DeviceDram => "device_dram",
            ServedBy::DeviceFlash => "device_flash",
            ServedBy::HostDram => "host_dram",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SampleOp {
    Load,
    Store,
}

impl SampleOp {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleOp::Load => "load",
            SampleOp::Store => "store",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatencySample {
    pub req_id: u64,
    pub op: SampleOp,
    pub issue: Tick,
    pub complete: Tick,
    pub annotation: Annotation,
    pub served_by: ServedBy,
}

impl LatencySample {
    pub fn latency(&self) -> Tick {
        self.complete - self.issue
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GcEvent {
    pub start: Tick,
    pub end: Tick,
    pub pages_moved: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CacheCounters {
    pub hits: u64,
    pub misses: u64,
}

impl CacheCounters {
    pub fn hit_ratio(&self) -> f64 {
        let total = self.hits + self.misses;
        if total == 0 {
            0.0
        } else {
            self.hits as f64 / total as f64
        }
    }
}

/// Everything a finished run reports. Built by the simulation, then frozen
/// by [`StatsReport::finalize`].
#[derive(Debug, Clone, Default)]
pub struct StatsReport {
    pub samples: Vec<LatencySample>,
    /// Host requests delivered to the expander endpoint.
    pub storage_accesses: u64,
    pub flash_reads: u64,
    pub flash_programs: u64,
    pub flash_erases: u64,
    pub device_dram_hits: u64,
    pub device_dram_misses: u64,
    pub pinned_demotions: u64,
    pub l1: CacheCounters,
    pub l2: CacheCounters,
    pub gc_events: Vec<GcEvent>,
    pub bandwidth_window: Tick,
    pub bandwidth_windows: Vec<(Tick, u64)>,
    /// Host-visible execution time: last instruction retired and every
    /// request completed.
    pub total_ticks: Tick,
    /// Every memory instruction executed, warm-up included.
    pub memory_ops: u64,
    pub issued: u64,
    pub completed: u64,
    pub in_flight: u64,
    pub dt_requests: u64,
    pub annotated_requests: u64,
    pub device_requests: u64,
}

impl StatsReport {
    pub fn finalize(mut self) -> FinalReport {
        self.samples.sort_by_key(|s| s.req_id);
        FinalReport { inner: self }
    }

    pub fn record_bytes(&mut self, at: Tick, bytes: u64) {
        let w = self.bandwidth_window.as_ps().max(1);
        let start = Tick(at.as_ps() / w * w);
        match self.bandwidth_windows.last_mut() {
            Some((s, b)) if *s == start => *b += bytes,
            _ => {
                debug_assert!(self
                    .bandwidth_windows
                    .last()
                    .is_none_or(|(s, _)| *s < start));
                self.bandwidth_windows.push((start, bytes));
            }
        }
    }
}

/// Immutable, finalized statistics.
#[derive(Debug, Clone)]
pub struct FinalReport {
    inner: StatsReport,
}

impl std::ops::Deref for FinalReport {
    type Target = StatsReport;
    fn deref(&self) -> &StatsReport {
        &self.inner
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencySummary {
    pub count: usize,
    pub mean_ps: f64,
    pub p50: Tick,
    pub p99: Tick,
    pub p999: Tick,
    pub max: Tick,
}

pub const RESULTS_CSV_HEADER: &str =
    "req_id,op,issue_ps,complete_ps,latency_ps,annotation,served_by";

impl FinalReport {
    pub fn latencies(&self) -> Vec<Tick> {
        self.samples.iter().map(|s| s.latency()).collect()
    }

    pub fn mean_latency_ps(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let sum: u128 = self.samples.iter().map(|s| s.latency().as_ps() as u128).sum();
        sum as f64 / self.samples.len() as f64
    }

    /// Average time per memory instruction over the whole run.
    pub fn mean_access_ps(&self) -> f64 {
        if self.memory_ops == 0 {
            return 0.0;
        }
        self.total_ticks.as_ps() as f64 / self.memory_ops as f64
    }

    pub fn summary(&self) -> Option<LatencySummary> {
        let mut lat = self.latencies();
        if lat.is_empty() {
            return None;
        }
        lat.sort_unstable();
        let at = |p: f64| percentile_sorted(&lat, p);
        Some(LatencySummary {
            count: lat.len(),
            mean_ps: self.mean_latency_ps(),
            p50: at(0.5),
            p99: at(0.99),
            p999: at(0.999),
            max: *lat.last().unwrap(),
        })
    }

    /// Bytes per second over the host-visible run.
    pub fn bandwidth_bytes_per_s(&self, bytes: u64) -> f64 {
        if self.total_ticks == Tick::ZERO {
            return 0.0;
        }
        bytes as f64 / (self.total_ticks.as_ps() as f64 * 1e-12)
    }

    /// `self` total time relative to `baseline`.
    pub fn ratio_to(&self, baseline: &FinalReport) -> f64 {
        self.total_ticks.as_ps() as f64 / baseline.total_ticks.as_ps() as f64
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{RESULTS_CSV_HEADER}")?;
        for s in &self.samples {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                s.req_id,
                s.op.as_str(),
                s.issue.as_ps(),
                s.complete.as_ps(),
                s.latency().as_ps(),
                s.annotation,
                s.served_by.as_str()
            )?;
        }
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

impl fmt::Display for FinalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "total_ticks_ps      {}", self.total_ticks.as_ps())?;
        writeln!(f, "memory_ops          {}", self.memory_ops)?;
        writeln!(f, "mean_access_ps      {:.1}", self.mean_access_ps())?;
        match self.summary() {
            Some(s) => {
                writeln!(f, "samples             {}", s.count)?;
                writeln!(f, "latency_mean_ps     {:.1}", s.mean_ps)?;
                writeln!(f, "latency_p50_ps      {}", s.p50.as_ps())?;
                writeln!(f, "latency_p99_ps      {}", s.p99.as_ps())?;
                writeln!(f, "latency_p99.9_ps    {}", s.p999.as_ps())?;
                writeln!(f, "latency_p100_ps     {}", s.max.as_ps())?;
            }
            None => writeln!(f, "samples             0")?,
        }
        writeln!(f, "storage_accesses    {}", self.storage_accesses)?;
        writeln!(f, "flash_reads         {}", self.flash_reads)?;
        writeln!(f, "flash_programs      {}", self.flash_programs)?;
        writeln!(f, "flash_erases        {}", self.flash_erases)?;
        writeln!(f, "l1_hit_ratio        {:.4}", self.l1.hit_ratio())?;
        writeln!(f, "l2_hit_ratio        {:.4}", self.l2.hit_ratio())?;
        let dev = CacheCounters {
            hits: self.device_dram_hits,
            misses: self.device_dram_misses,
        };
        writeln!(f, "device_dram_hit_ratio {:.4}", dev.hit_ratio())?;
        writeln!(f, "gc_count            {}", self.gc_events.len())
    }
}

/// Nearest-rank percentile: the element at index `ceil(p * n) - 1` of the
/// ascending sort.
pub fn percentile(samples: &[Tick], p: f64) -> Result<Tick, EngineError> {
    if samples.is_empty() {
        return Err(EngineError::EmptySamples);
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(EngineError::InvalidFraction(p));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    Ok(percentile_sorted(&sorted, p))
}

fn percentile_sorted(sorted: &[Tick], p: f64) -> Tick {
    let n = sorted.len();
    let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}
