use serde::{Deserialize, Serialize};

use super::WorkloadError;
use crate::engine::SimRng;
use crate::host::AccessRecord;

/// Power-law temporal locality with fixed-size requests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApexMapConfig {
    /// Locality in (0, 1]: 1 is uniform, small values pile up near zero.
    pub alpha: f64,
    pub footprint_bytes: u64,
    pub count: u64,
    pub request_bytes: u64,
    pub load_fraction: f64,
    pub seed: u64,
}

impl Default for ApexMapConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            // Just past the default device DRAM cache.
            footprint_bytes: (16 << 20) + (256 << 10),
            count: 2_000_000,
            request_bytes: 64,
            load_fraction: 1.0,
            seed: 1,
        }
    }
}

impl ApexMapConfig {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(WorkloadError::config("workload.apexmap.alpha", "must lie in (0, 1]"));
        }
        if self.request_bytes != 64 {
            return Err(WorkloadError::config(
                "workload.apexmap.request_bytes",
                "only 64 B requests are modeled",
            ));
        }
        if self.footprint_bytes == 0 || !self.footprint_bytes.is_multiple_of(64) {
            return Err(WorkloadError::config(
                "workload.apexmap.footprint_bytes",
                "must be a positive multiple of 64",
            ));
        }
        if !(0.0..=1.0).contains(&self.load_fraction) {
            return Err(WorkloadError::config(
                "workload.apexmap.load_fraction",
                "must lie in [0, 1]",
            ));
        }
        Ok(())
    }

    pub fn lines(&self) -> u64 {
        self.footprint_bytes / 64
    }
}

/// Line index for uniform draw `u` in [0, 1): `floor(lines * u^(1/alpha))`.
pub fn apex_index(u: f64, alpha: f64, lines: u64) -> u64 {
    let x = (lines as f64 * u.powf(1.0 / alpha)).floor() as u64;
    x.min(lines - 1)
}

/// Stream of Apex-Map accesses.
#[derive(Debug, Clone)]
pub struct ApexMap {
    cfg: ApexMapConfig,
    rng: SimRng,
    left: u64,
}

impl ApexMap {
    pub fn new(cfg: ApexMapConfig) -> Result<Self, WorkloadError> {
        cfg.validate()?;
        Ok(Self {
            rng: SimRng::new(cfg.seed).split(0),
            left: cfg.count,
            cfg,
        })
    }

    /// One access, regardless of the configured count.
    pub fn draw(&mut self) -> AccessRecord {
        let u = self.rng.next_f64();
        let address = 64 * apex_index(u, self.cfg.alpha, self.cfg.lines());
        if self.rng.chance(self.cfg.load_fraction) {
            AccessRecord::load(address, 0)
        } else {
            AccessRecord::store(address, 0)
        }
    }
}

impl Iterator for ApexMap {
    type Item = AccessRecord;

    fn next(&mut self) -> Option<AccessRecord> {
        if self.left == 0 {
            return None;
        }
        self.left -= 1;
        Some(self.draw())
    }
}
