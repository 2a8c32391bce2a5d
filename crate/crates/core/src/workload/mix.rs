use rand_distr::{Distribution, Zipf};
use serde::{Deserialize, Serialize};

use super::apex::apex_index;
use super::WorkloadError;
use crate::engine::SimRng;
use crate::host::AccessRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissGroup {
    High,
    Low,
}

impl MissGroup {
    /// Locality used for the group's address stream.
    pub fn default_alpha(self) -> f64 {
        match self {
            MissGroup::High => 0.9,
            MissGroup::Low => 0.05,
        }
    }
}

/// A benchmark's instruction mix and footprint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixProfile {
    pub name: &'static str,
    pub group: MissGroup,
    pub load: f64,
    pub store: f64,
    pub footprint_gb: f64,
}

const fn p(name: &'static str, group: MissGroup, load: f64, store: f64, gb: f64) -> MixProfile {
    MixProfile {
        name,
        group,
        load,
        store,
        footprint_gb: gb,
    }
}

pub const MIX_PROFILES: [MixProfile; 18] = [
    p("gcc", MissGroup::High, 0.280, 0.140, 1.0),
    p("gobmk", MissGroup::High, 0.164, 0.138, 2.0),
    p("cactus", MissGroup::High, 0.235, 0.178, 22.7),
    p("milc", MissGroup::High, 0.212, 0.190, 34.9),
    p("bzip2", MissGroup::High, 0.217, 0.197, 96.0),
    p("lbm", MissGroup::High, 0.164, 0.385, 42.2),
    p("sjeng", MissGroup::High, 0.159, 0.385, 17.8),
    p("namd", MissGroup::High, 0.221, 0.148, 6.0),
    p("hmmer", MissGroup::Low, 0.129, 0.163, 1.1),
    p("leslie3d", MissGroup::Low, 0.145, 0.185, 12.7),
    p("quantum", MissGroup::Low, 0.212, 0.195, 6.8),
    p("aes", MissGroup::Low, 0.088, 0.146, 6.9),
    p("astar", MissGroup::Low, 0.243, 0.171, 0.3),
    p("sha512", MissGroup::Low, 0.117, 0.045, 0.3),
    p("calculix", MissGroup::Low, 0.266, 0.152, 1.0),
    p("povray", MissGroup::Low, 0.304, 0.127, 0.2),
    p("tonto", MissGroup::Low, 0.166, 0.109, 0.4),
    p("bwaves", MissGroup::Low, 0.276, 0.092, 34.3),
];

pub fn mix_profile(name: &str) -> Option<&'static MixProfile> {
    MIX_PROFILES.iter().find(|m| m.name.eq_ignore_ascii_case(name))
}

/// Bytes of simulated footprint per gigabyte of a profile's footprint.
pub const DEFAULT_BYTES_PER_GB: u64 = 1 << 20;

/// Synthetic instruction mix with per-function address ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixConfig {
    pub name: String,
    pub load_pct: f64,
    pub store_pct: f64,
    pub compute_pct: f64,
    pub footprint_bytes: u64,
    pub alpha: f64,
    pub function_zipf_s: f64,
    pub function_count: u32,
    pub count: u64,
    pub seed: u64,
}

impl Default for MixConfig {
    fn default() -> Self {
        Self::from_profile(&MIX_PROFILES[0], DEFAULT_BYTES_PER_GB)
    }
}

impl MixConfig {
    pub fn from_profile(m: &MixProfile, bytes_per_gb: u64) -> Self {
        let footprint = (m.footprint_gb * bytes_per_gb as f64 / 4096.0).ceil() as u64 * 4096;
        Self {
            name: m.name.to_string(),
            load_pct: m.load,
            store_pct: m.store,
            compute_pct: 1.0 - m.load - m.store,
            footprint_bytes: footprint,
            alpha: m.group.default_alpha(),
            function_zipf_s: 1.2,
            function_count: 64,
            count: 2_000_000,
            seed: 1,
        }
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        let fr = [self.load_pct, self.store_pct, self.compute_pct];
        if fr.iter().any(|f| !(0.0..=1.0).contains(f)) || (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(WorkloadError::config(
                "workload.mix",
                "load_pct, store_pct and compute_pct must lie in [0, 1] and sum to 1",
            ));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(WorkloadError::config("workload.mix.alpha", "must lie in (0, 1]"));
        }
        if self.function_count == 0 {
            return Err(WorkloadError::config("workload.mix.function_count", "must be positive"));
        }
        if !(self.function_zipf_s >= 0.0 && self.function_zipf_s.is_finite()) {
            return Err(WorkloadError::config(
                "workload.mix.function_zipf_s",
                "must be finite and non-negative",
            ));
        }
        if !self.footprint_bytes.is_multiple_of(64) || self.footprint_bytes / 64 < self.function_count as u64 {
            return Err(WorkloadError::config(
                "workload.mix.footprint_bytes",
                "must be a multiple of 64 with at least one line per function",
            ));
        }
        Ok(())
    }

    /// Lines owned by each function.
    pub fn slice_lines(&self) -> u64 {
        self.footprint_bytes / 64 / self.function_count as u64
    }
}

/// Draws the op class, then the issuing function, then a line in that
/// function's slice of the footprint.
#[derive(Debug, Clone)]
pub struct MixGen {
    cfg: MixConfig,
    zipf: Zipf<f64>,
    rng: SimRng,
    left: u64,
}

impl MixGen {
    pub fn new(cfg: MixConfig) -> Result<Self, WorkloadError> {
        cfg.validate()?;
        let zipf = Zipf::new(cfg.function_count as u64, cfg.function_zipf_s)
            .map_err(|e| WorkloadError::config("workload.mix.function_zipf_s", &e.to_string()))?;
        Ok(Self {
            rng: SimRng::new(cfg.seed).split(1),
            left: cfg.count,
            zipf,
            cfg,
        })
    }
}

impl Iterator for MixGen {
    type Item = AccessRecord;

    fn next(&mut self) -> Option<AccessRecord> {
        if self.left == 0 {
            return None;
        }
        self.left -= 1;
        let class = self.rng.next_f64();
        let f = self.zipf.sample(&mut self.rng) as u32 - 1;
        if class >= self.cfg.load_pct + self.cfg.store_pct {
            return Some(AccessRecord::compute(f));
        }
        let slice = self.cfg.slice_lines();
        let line = f as u64 * slice + apex_index(self.rng.next_f64(), self.cfg.alpha, slice);
        Some(if class < self.cfg.load_pct {
            AccessRecord::load(line * 64, f)
        } else {
            AccessRecord::store(line * 64, f)
        })
    }
}
