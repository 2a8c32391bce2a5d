//! Type 3 endpoints: the flash SSD with its internal DRAM cache, FTL and
//! garbage collector, and a DRAM-only expander.

mod cache;
mod dram;
mod ftl;
mod log;
mod ssd;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{GcEvent, ServedBy, Tick};
use crate::protocol::Annotation;

pub use cache::{DramCache, Evicted, FillOutcome, LineState};
pub use dram::{DramEndpoint, DramModel, DramTiming};
pub use ftl::{gc_select_victim, BlockMeta, Ftl};
pub use log::{EventLog, EVENT_LOG_HEADER};
pub use ssd::{FlashSsd, GcPhase};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeviceError {
    #[error("device address {0:#x} is outside the exposed capacity")]
    OutOfRange(u64),
    #[error("no block is eligible for garbage collection")]
    NoCandidate,
    #[error("flash has no free block left")]
    NoFreeBlocks,
    #[error("block {0} still holds valid pages")]
    EraseValid(u32),
    #[error("{field}: {reason}")]
    Config { field: &'static str, reason: String },
}

impl DeviceError {
    pub(crate) fn config(field: &'static str, reason: &str) -> Self {
        DeviceError::Config {
            field,
            reason: reason.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DevOp {
    Load,
    Store,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DevRequest {
    /// Device-local byte address, 64 B aligned.
    pub local: u64,
    pub op: DevOp,
    pub annotation: Annotation,
    /// Payload carried by stores.
    pub value: u64,
}

impl DevRequest {
    pub fn load(local: u64, annotation: Annotation) -> Self {
        Self {
            local,
            op: DevOp::Load,
            annotation,
            value: 0,
        }
    }

    pub fn store(local: u64, annotation: Annotation, value: u64) -> Self {
        Self {
            local,
            op: DevOp::Store,
            annotation,
            value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DevResponse {
    pub done: Tick,
    pub served_by: ServedBy,
    /// Data returned to loads.
    pub value: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DeviceStats {
    pub requests: u64,
    pub stores: u64,
    pub dram_hits: u64,
    pub dram_misses: u64,
    pub flash_reads: u64,
    pub flash_programs: u64,
    pub flash_erases: u64,
    pub pinned_demotions: u64,
    pub prefetches: u64,
    pub gc_events: Vec<GcEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlashConfig {
    pub page_bytes: u64,
    pub pages_per_block: u32,
    pub channels: u32,
    pub t_r_ns: f64,
    pub t_prog_ns: f64,
    pub t_bers_ns: f64,
    pub over_provision: f64,
    /// Flash channel bus rate, bytes per ns.
    pub channel_bytes_per_ns: f64,
}

impl Default for FlashConfig {
    fn default() -> Self {
        Self {
            page_bytes: 4096,
            pages_per_block: 256,
            channels: 8,
            t_r_ns: 3_000.0,
            t_prog_ns: 100_000.0,
            t_bers_ns: 1_000_000.0,
            over_provision: 0.07,
            channel_bytes_per_ns: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DramCacheConfig {
    /// Defaults to 1/64 of the flash capacity.
    pub capacity_bytes: Option<u64>,
    pub assoc: u32,
    pub timing: DramTiming,
}

impl Default for DramCacheConfig {
    fn default() -> Self {
        Self {
            capacity_bytes: None,
            assoc: 16,
            timing: DramTiming::device_default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GcConfig {
    pub low_watermark: f64,
    pub high_watermark: f64,
    /// Free blocks at or below which GC ignores DT windows and host writes
    /// wait for reclamation.
    pub reserve_blocks: u32,
    pub dt_window_ns: f64,
}

impl Default for GcConfig {
    fn default() -> Self {
        Self {
            low_watermark: 0.05,
            high_watermark: 0.10,
            reserve_blocks: 2,
            dt_window_ns: 10_000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreconditionConfig {
    /// Share of logical pages, counted from page zero, written once before
    /// the run.
    pub fill_fraction: f64,
    /// Then overwrite random pages of that range until the free-block
    /// fraction drops below this value.
    pub free_fraction: Option<f64>,
    /// Preload this many bytes from device address zero into the DRAM cache.
    pub warm_cache_bytes: u64,
    pub seed: u64,
}

impl Default for PreconditionConfig {
    fn default() -> Self {
        Self {
            fill_fraction: 1.0,
            free_fraction: None,
            warm_cache_bytes: 0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceConfig {
    pub capacity_bytes: u64,
    pub flash: FlashConfig,
    pub dram_cache: DramCacheConfig,
    pub gc: GcConfig,
    pub precondition: PreconditionConfig,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self {
            capacity_bytes: 1 << 30,
            flash: FlashConfig::default(),
            dram_cache: DramCacheConfig::default(),
            gc: GcConfig::default(),
            precondition: PreconditionConfig::default(),
        }
    }
}

impl DeviceConfig {
    pub fn dram_cache_bytes(&self) -> u64 {
        self.dram_cache
            .capacity_bytes
            .unwrap_or(self.capacity_bytes / 64)
    }

    /// Physical blocks needed for the exposed capacity plus over-provisioning.
    pub fn blocks(&self) -> u32 {
        let block_bytes = self.flash.page_bytes * self.flash.pages_per_block as u64;
        let raw = self.capacity_bytes as f64 / (1.0 - self.flash.over_provision);
        // One open block per channel and the GC reserve come on top.
        let blocks = (raw / block_bytes as f64).ceil() as u32
            + self.flash.channels
            + self.gc.reserve_blocks;
        blocks.max(self.flash.channels * 2)
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let f = &self.flash;
        if f.page_bytes != 4096 {
            return Err(DeviceError::config("device.flash.page_bytes", "must be 4096"));
        }
        if f.pages_per_block == 0 || f.channels == 0 {
            return Err(DeviceError::config(
                "device.flash",
                "pages_per_block and channels must be positive",
            ));
        }
        if [f.t_r_ns, f.t_prog_ns, f.t_bers_ns, f.channel_bytes_per_ns]
            .iter()
            .any(|t| !(t.is_finite() && *t > 0.0))
        {
            return Err(DeviceError::config(
                "device.flash",
                "timings and channel rate must be positive",
            ));
        }
        if !(0.0..0.5).contains(&f.over_provision) || f.over_provision == 0.0 {
            return Err(DeviceError::config(
                "device.flash.over_provision",
                "must lie in (0, 0.5)",
            ));
        }
        if self.capacity_bytes == 0 || !self.capacity_bytes.is_multiple_of(f.page_bytes) {
            return Err(DeviceError::config(
                "device.capacity_bytes",
                "must be a positive multiple of the page size",
            ));
        }
        let cache_pages = self.dram_cache_bytes() / f.page_bytes;
        if self.dram_cache.assoc == 0 || cache_pages < self.dram_cache.assoc as u64 {
            return Err(DeviceError::config(
                "device.dram_cache",
                "capacity must hold at least one full set",
            ));
        }
        self.dram_cache.timing.validate("device.dram_cache.timing")?;
        let g = &self.gc;
        if !(0.0 < g.low_watermark && g.low_watermark < g.high_watermark && g.high_watermark < 1.0)
        {
            return Err(DeviceError::config(
                "device.gc",
                "watermarks must satisfy 0 < low < high < 1",
            ));
        }
        if !(g.dt_window_ns.is_finite() && g.dt_window_ns >= 0.0) {
            return Err(DeviceError::config(
                "device.gc.dt_window_ns",
                "must be non-negative",
            ));
        }
        if !(0.0..=1.0).contains(&self.precondition.fill_fraction) {
            return Err(DeviceError::config(
                "device.precondition.fill_fraction",
                "must lie in [0, 1]",
            ));
        }
        if let Some(ff) = self.precondition.free_fraction {
            if !(0.0..1.0).contains(&ff) {
                return Err(DeviceError::config(
                    "device.precondition.free_fraction",
                    "must lie in [0, 1)",
                ));
            }
        }
        if self.precondition.warm_cache_bytes > self.capacity_bytes {
            return Err(DeviceError::config(
                "device.precondition.warm_cache_bytes",
                "exceeds the device capacity",
            ));
        }
        Ok(())
    }
}

/// Any endpoint behind a host-managed or BAR region.
#[derive(Debug, Clone)]
pub enum Endpoint {
    Ssd(Box<FlashSsd>),
    Dram(DramEndpoint),
}

impl Endpoint {
    pub fn handle(&mut self, now: Tick, req: &DevRequest) -> Result<DevResponse, DeviceError> {
        match self {
            Endpoint::Ssd(s) => s.handle(now, req),
            Endpoint::Dram(d) => d.handle(now, req),
        }
    }

    pub fn persist_flush(&mut self, now: Tick) -> Tick {
        match self {
            Endpoint::Ssd(s) => s.persist_flush(now),
            Endpoint::Dram(_) => now,
        }
    }

    /// See [`crate::engine::Timeline::forget_before`].
    pub fn forget_before(&mut self, t: Tick) {
        match self {
            Endpoint::Ssd(s) => s.forget_before(t),
            Endpoint::Dram(d) => d.forget_before(t),
        }
    }

    pub fn stats(&self) -> &DeviceStats {
        match self {
            Endpoint::Ssd(s) => s.stats(),
            Endpoint::Dram(d) => d.stats(),
        }
    }

    pub fn event_log(&self) -> Option<&EventLog> {
        match self {
            Endpoint::Ssd(s) => s.event_log(),
            Endpoint::Dram(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_covers_capacity_with_spare() {
        let c = DeviceConfig::default();
        c.validate().unwrap();
        let usable = c.blocks() as f64 * 256.0 * 4096.0 * (1.0 - 0.07);
        assert!(usable >= c.capacity_bytes as f64);
        assert_eq!(c.dram_cache_bytes(), 16 << 20);
    }

    #[test]
    fn bad_watermarks_named() {
        let mut c = DeviceConfig::default();
        c.gc.low_watermark = 0.2;
        match c.validate() {
            Err(DeviceError::Config { field, .. }) => assert_eq!(field, "device.gc"),
            other => panic!("{other:?}"),
        }
    }
}
