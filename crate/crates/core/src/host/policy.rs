//! Host-side annotation policies.
//!
//! Determinism is decided at run time from the load share of the issuing
//! core's in-flight memory window. Bufferability is decided per function from
//! a storage-access heat table.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::protocol::{Bufferability, Determinism};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtMode {
    /// DT iff load share > threshold.
    Threshold(f64),
    /// Threshold re-tuned after every decision so the realized DT share
    /// tracks `target`.
    Calibrated { target: f64 },
}

#[derive(Debug, Clone)]
pub struct DtPolicy {
    mode: DtMode,
    theta: f64,
    decisions: u64,
    dt: u64,
}

/// Step applied to the threshold per decision in calibrated mode.
const CALIBRATION_GAIN: f64 = 1e-3;

impl DtPolicy {
    pub fn threshold(theta: f64) -> Self {
        Self {
            mode: DtMode::Threshold(theta),
            theta,
            decisions: 0,
            dt: 0,
        }
    }

    pub fn calibrated(target: f64, initial_theta: f64) -> Self {
        Self {
            mode: DtMode::Calibrated { target },
            theta: initial_theta,
            decisions: 0,
            dt: 0,
        }
    }

    pub fn mode(&self) -> DtMode {
        self.mode
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Decide for one memory instruction given the window occupancy
    /// (including the instruction being issued).
    pub fn decide(&mut self, loads_in_window: u32, occupied: u32) -> Determinism {
        let share = if occupied == 0 {
            0.0
        } else {
            loads_in_window as f64 / occupied as f64
        };
        let dt = share > self.theta;
        self.decisions += 1;
        if dt {
            self.dt += 1;
        }
        if let DtMode::Calibrated { target } = self.mode {
            // Sigma-delta style: raise theta after DT decisions, lower it after
            // ND ones, so the long-run DT share converges to the target even
            // when the share distribution has atoms (e.g. all loads).
            let hit = if dt { 1.0 } else { 0.0 };
            self.theta = (self.theta + CALIBRATION_GAIN * (hit - target)).clamp(-0.01, 1.01);
        }
        if dt {
            Determinism::Dt
        } else {
            Determinism::Nd
        }
    }

    pub fn realized_fraction(&self) -> f64 {
        if self.decisions == 0 {
            0.0
        } else {
            self.dt as f64 / self.decisions as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HeatTableError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("i/o: {0}")]
    Io(String),
}

/// Per-function storage-access counts from a profiling pass.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HeatTable {
    counts: BTreeMap<u32, u64>,
}

pub const HEAT_CSV_HEADER: &str = "function_id,storage_accesses";

impl HeatTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, u64)>) -> Self {
        let mut t = Self::new();
        for (f, n) in pairs {
            *t.counts.entry(f).or_default() += n;
        }
        t
    }

    pub fn record(&mut self, function_id: u32) {
        *self.counts.entry(function_id).or_default() += 1;
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn get(&self, function_id: u32) -> u64 {
        self.counts.get(&function_id).copied().unwrap_or(0)
    }

    /// Functions by descending heat, ties by ascending id.
    pub fn ranked(&self) -> Vec<(u32, u64)> {
        let mut v: Vec<_> = self.counts.iter().map(|(&f, &n)| (f, n)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }

    /// The hottest `floor(fraction * n)` functions.
    pub fn top_fraction(&self, fraction: f64) -> HashSet<u32> {
        let n = self.counts.len();
        let k = ((fraction * n as f64) + 1e-9).floor() as usize;
        self.ranked().into_iter().take(k.min(n)).map(|(f, _)| f).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{HEAT_CSV_HEADER}")?;
        for (f, n) in self.ranked() {
            writeln!(w, "{f},{n}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, HeatTableError> {
        let mut t = Self::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| HeatTableError::Io(e.to_string()))?;
            let lineno = i + 1;
            let line = line.trim();
            if line.is_empty() || (lineno == 1 && line == HEAT_CSV_HEADER) {
                continue;
            }
            let parse_err = |reason: &str| HeatTableError::Parse {
                line: lineno,
                reason: reason.to_string(),
            };
            let (f, n) = line
                .split_once(',')
                .ok_or_else(|| parse_err("expected `function_id,storage_accesses`"))?;
            let f: u32 = f.trim().parse().map_err(|_| parse_err("bad function id"))?;
            let n: u64 = n.trim().parse().map_err(|_| parse_err("bad access count"))?;
            *t.counts.entry(f).or_default() += n;
        }
        Ok(t)
    }
}

/// Function-level BF/NB tagging.
#[derive(Debug, Clone, Default)]
pub struct BfNbPolicy {
    bf: HashSet<u32>,
    nb: HashSet<u32>,
}

impl BfNbPolicy {
    pub fn new(heat: &HeatTable, bf_fraction: f64, nb_functions: &[u32]) -> Self {
        Self {
            bf: heat.top_fraction(bf_fraction),
            nb: nb_functions.iter().copied().collect(),
        }
    }

    pub fn decide(&self, function_id: u32) -> Bufferability {
        if self.nb.contains(&function_id) {
            Bufferability::Nb
        } else if self.bf.contains(&function_id) {
            Bufferability::Bf
        } else {
            Bufferability::Unannotated
        }
    }

    pub fn bf_count(&self) -> usize {
        self.bf.len()
    }
}
