use serde::{Deserialize, Serialize};

use super::apex::apex_index;
use super::WorkloadError;
use crate::engine::SimRng;
use crate::host::AccessRecord;

/// A read-dominated phase followed by a write-dominated one, in the spirit
/// of cactusADM's solver and checkpoint stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseConfig {
    pub footprint_bytes: u64,
    pub load_accesses: u64,
    pub store_accesses: u64,
    pub alpha: f64,
    /// Compute instructions after every memory instruction.
    pub compute_per_access: u32,
    pub seed: u64,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self {
            footprint_bytes: 256 << 20,
            load_accesses: 200_000,
            store_accesses: 200_000,
            alpha: 1.0,
            compute_per_access: 4,
            seed: 1,
        }
    }
}

impl PhaseConfig {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(WorkloadError::config("workload.phase.alpha", "must lie in (0, 1]"));
        }
        if self.footprint_bytes == 0 || !self.footprint_bytes.is_multiple_of(64) {
            return Err(WorkloadError::config(
                "workload.phase.footprint_bytes",
                "must be a positive multiple of 64",
            ));
        }
        Ok(())
    }
}

/// Records of both phases and the index where the store phase begins.
pub fn phase_gen(cfg: &PhaseConfig) -> Result<(Vec<AccessRecord>, usize), WorkloadError> {
    cfg.validate()?;
    let mut rng = SimRng::new(cfg.seed).split(2);
    let lines = cfg.footprint_bytes / 64;
    let per = 1 + cfg.compute_per_access as usize;
    let mut v = Vec::with_capacity((cfg.load_accesses + cfg.store_accesses) as usize * per);
    let mut emit = |v: &mut Vec<AccessRecord>, store: bool| {
        let addr = 64 * apex_index(rng.next_f64(), cfg.alpha, lines);
        v.push(if store {
            AccessRecord::store(addr, 1)
        } else {
            AccessRecord::load(addr, 0)
        });
        let f = store as u32;
        v.extend((0..cfg.compute_per_access).map(|_| AccessRecord::compute(f)));
    };
    for _ in 0..cfg.load_accesses {
        emit(&mut v, false);
    }
    let boundary = v.len();
    for _ in 0..cfg.store_accesses {
        emit(&mut v, true);
    }
    Ok((v, boundary))
}
