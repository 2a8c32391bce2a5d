//! CPU side: access records, cache hierarchy state and the host annotation
//! policies. The per-core timing model lives with the event loop in
//! [`crate::systems`].

mod cache;
mod policy;

use serde::{Deserialize, Serialize};

pub use cache::{Cache, CacheError, Outcome, Victim};
pub use policy::{BfNbPolicy, DtMode, DtPolicy, HeatTable, HeatTableError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MemOp {
    Load,
    Store,
    Compute,
}

/// One host instruction flowing through the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AccessRecord {
    pub op: MemOp,
    /// Byte address; 64-byte aligned for memory ops, zero for compute.
    pub address: u64,
    pub function_id: u32,
    pub core: u32,
}

impl AccessRecord {
    pub fn load(address: u64, function_id: u32) -> Self {
        Self {
            op: MemOp::Load,
            address,
            function_id,
            core: 0,
        }
    }

    pub fn store(address: u64, function_id: u32) -> Self {
        Self {
            op: MemOp::Store,
            address,
            function_id,
            core: 0,
        }
    }

    pub fn compute(function_id: u32) -> Self {
        Self {
            op: MemOp::Compute,
            address: 0,
            function_id,
            core: 0,
        }
    }

    pub fn is_memory(&self) -> bool {
        self.op != MemOp::Compute
    }
}

pub fn line_align(address: u64, line: u64) -> u64 {
    address & !(line - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheLevelConfig {
    pub size_bytes: u64,
    pub assoc: u32,
    pub mshrs: u32,
    pub hit_cycles: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HostConfig {
    pub cores: u32,
    pub freq_hz: u64,
    pub lsq_entries: u32,
    pub store_queue_entries: u32,
    /// Accepted for completeness; instruction fetch is not modeled.
    pub l1i: CacheLevelConfig,
    pub l1d: CacheLevelConfig,
    pub l2: CacheLevelConfig,
    pub line_bytes: u64,
    pub dt_threshold: f64,
    pub dt_target_fraction: Option<f64>,
    pub bf_function_fraction: f64,
    pub nb_function_set: Vec<u32>,
}

impl Default for HostConfig {
    fn default() -> Self {
        Self {
            cores: 4,
            freq_hz: 4_000_000_000,
            lsq_entries: 64,
            store_queue_entries: 64,
            l1i: CacheLevelConfig {
                size_bytes: 64 * 1024,
                assoc: 8,
                mshrs: 8,
                hit_cycles: 4,
            },
            l1d: CacheLevelConfig {
                size_bytes: 64 * 1024,
                assoc: 12,
                mshrs: 16,
                hit_cycles: 5,
            },
            l2: CacheLevelConfig {
                size_bytes: 2 * 1024 * 1024,
                assoc: 8,
                mshrs: 32,
                hit_cycles: 20,
            },
            line_bytes: 64,
            dt_threshold: 0.5,
            dt_target_fraction: None,
            bf_function_fraction: 0.0,
            nb_function_set: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{field}: {reason}")]
pub struct HostConfigError {
    pub field: &'static str,
    pub reason: String,
}

impl HostConfig {
    pub fn validate(&self) -> Result<(), HostConfigError> {
        let err = |field, reason: &str| {
            Err(HostConfigError {
                field,
                reason: reason.to_string(),
            })
        };
        if self.line_bytes != 64 {
            return err("host.line_bytes", "must be 64");
        }
        if self.cores == 0 {
            return err("host.cores", "must be at least 1");
        }
        if crate::engine::Clock::from_hz(self.freq_hz).is_none() {
            return err("host.freq_hz", "period must be a whole number of picoseconds");
        }
        if self.lsq_entries == 0 {
            return err("host.lsq_entries", "must be positive");
        }
        if self.store_queue_entries == 0 {
            return err("host.store_queue_entries", "must be positive");
        }
        for (field, c) in [
            ("host.l1i", &self.l1i),
            ("host.l1d", &self.l1d),
            ("host.l2", &self.l2),
        ] {
            if !c.size_bytes.is_power_of_two() {
                return err(field, "capacity must be a power of two");
            }
            let lines = c.size_bytes / self.line_bytes;
            if c.assoc == 0 || lines < c.assoc as u64 {
                return err(field, "associativity exceeds the line count");
            }
            if c.mshrs == 0 {
                return err(field, "needs at least one MSHR");
            }
        }
        if self.l2.size_bytes < self.l1d.size_bytes {
            return err("host.l2", "must be at least as large as l1d for inclusion");
        }
        if !(0.0..=1.0).contains(&self.dt_threshold) {
            return err("host.dt_threshold", "must lie in [0, 1]");
        }
        if let Some(t) = self.dt_target_fraction {
            if !(0.0..=1.0).contains(&t) {
                return err("host.dt_target_fraction", "must lie in [0, 1]");
            }
        }
        if !(0.0..=1.0).contains(&self.bf_function_fraction) {
            return err("host.bf_function_fraction", "must lie in [0, 1]");
        }
        Ok(())
    }
}
