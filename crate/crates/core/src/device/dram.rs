use serde::{Deserialize, Serialize};

use super::{DevOp, DevRequest, DevResponse, DeviceError, DeviceStats};
use crate::engine::{ServedBy, Tick, Timeline};

/// Row-miss DRAM timing with per-channel data-bus serialization. Banks and
/// ranks are accepted but conflicts between them are not modeled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DramTiming {
    pub t_rp_ns: f64,
    pub t_rcd_ns: f64,
    #[serde(default)]
    pub t_cas_ns: f64,
    #[serde(default)]
    pub t_ras_ns: f64,
    pub channels: u32,
    #[serde(default = "eight")]
    pub ranks: u32,
    #[serde(default = "eight")]
    pub banks: u32,
    /// Per-channel data bus, bytes per ns.
    pub bytes_per_ns: f64,
}

fn eight() -> u32 {
    8
}

impl DramTiming {
    /// Host memory: DDR with tRP = tRCD = tCAS = 12.5 ns.
    pub fn host_default() -> Self {
        Self {
            t_rp_ns: 12.5,
            t_rcd_ns: 12.5,
            t_cas_ns: 12.5,
            t_ras_ns: 0.0,
            channels: 2,
            ranks: 8,
            banks: 8,
            bytes_per_ns: 25.6,
        }
    }

    /// SSD-internal DRAM: tRP = tRCD = 9.1 ns, tRAS = 19 ns.
    pub fn device_default() -> Self {
        Self {
            t_rp_ns: 9.1,
            t_rcd_ns: 9.1,
            t_cas_ns: 0.0,
            t_ras_ns: 19.0,
            channels: 2,
            ranks: 8,
            banks: 8,
            bytes_per_ns: 25.6,
        }
    }

    pub fn validate(&self, field: &'static str) -> Result<(), DeviceError> {
        let times = [self.t_rp_ns, self.t_rcd_ns, self.t_cas_ns, self.t_ras_ns];
        if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(DeviceError::config(field, "timings must be non-negative"));
        }
        if self.channels == 0 || !(self.bytes_per_ns > 0.0) {
            return Err(DeviceError::config(
                field,
                "needs at least one channel and a positive bus rate",
            ));
        }
        Ok(())
    }

    pub fn access_latency(&self) -> Tick {
        Tick::from_ns_f64(self.t_rp_ns + self.t_rcd_ns + self.t_cas_ns)
    }

    pub fn burst(&self, bytes: u64) -> Tick {
        Tick::from_ns_f64(bytes as f64 / self.bytes_per_ns)
    }
}

#[derive(Debug, Clone)]
pub struct DramModel {
    timing: DramTiming,
    access: Tick,
    bus: Vec<Timeline>,
}

impl DramModel {
    pub fn new(timing: DramTiming) -> Self {
        Self {
            timing,
            access: timing.access_latency(),
            bus: vec![Timeline::new(); timing.channels as usize],
        }
    }

    pub fn timing(&self) -> &DramTiming {
        &self.timing
    }

    /// Completion of a `bytes` access issued at `at`. Channels interleave on
    /// 64 B lines.
    pub fn access(&mut self, at: Tick, address: u64, bytes: u64) -> Tick {
        let ch = ((address / 64) % self.bus.len() as u64) as usize;
        let burst = self.timing.burst(bytes);
        self.bus[ch].reserve(at + self.access, burst) + burst
    }

    pub fn forget_before(&mut self, t: Tick) {
        for b in &mut self.bus {
            b.forget_before(t);
        }
    }

    /// Unloaded latency of a `bytes` access.
    pub fn unloaded(&self, bytes: u64) -> Tick {
        self.access + self.timing.burst(bytes)
    }
}

/// DRAM-only Type 3 expander.
#[derive(Debug, Clone)]
pub struct DramEndpoint {
    capacity: u64,
    dram: DramModel,
    stats: DeviceStats,
}

impl DramEndpoint {
    pub fn new(capacity: u64, timing: DramTiming) -> Self {
        Self {
            capacity,
            dram: DramModel::new(timing),
            stats: DeviceStats::default(),
        }
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn handle(&mut self, now: Tick, req: &DevRequest) -> Result<DevResponse, DeviceError> {
        if req.local.saturating_add(64) > self.capacity {
            return Err(DeviceError::OutOfRange(req.local));
        }
        self.stats.requests += 1;
        self.stats.dram_hits += 1;
        if req.op == DevOp::Store {
            self.stats.stores += 1;
        }
        Ok(DevResponse {
            done: self.dram.access(now, req.local, 64),
            served_by: ServedBy::DeviceDram,
            value: 0,
        })
    }

    pub fn forget_before(&mut self, t: Tick) {
        self.dram.forget_before(t);
    }

    pub fn stats(&self) -> &DeviceStats {
        &self.stats
    }
}
