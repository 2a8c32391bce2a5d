//! Access-stream generators: Apex-Map locality sweeps, STREAM kernels,
//! benchmark-style instruction mixes, a two-phase load/store workload and
//! replayable traces.

mod apex;
mod mix;
mod phase;
mod stream;
mod trace;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::host::AccessRecord;

pub use apex::{apex_index, ApexMap, ApexMapConfig};
pub use mix::{mix_profile, MissGroup, MixConfig, MixGen, MixProfile, DEFAULT_BYTES_PER_GB, MIX_PROFILES};
pub use phase::{phase_gen, PhaseConfig};
pub use stream::{stream_gen, StreamConfig, StreamKernel};
pub use trace::{load_trace, read_trace, write_records, write_trace, TraceError};

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("{field}: {reason}")]
    Config { field: &'static str, reason: String },
    #[error("trace {path}: {source}")]
    Trace {
        path: PathBuf,
        #[source]
        source: TraceError,
    },
}

impl WorkloadError {
    pub(crate) fn config(field: &'static str, reason: &str) -> Self {
        WorkloadError::Config {
            field,
            reason: reason.to_string(),
        }
    }

    pub fn field(&self) -> Option<&'static str> {
        match self {
            WorkloadError::Config { field, .. } => Some(field),
            WorkloadError::Trace { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkloadKind {
    #[default]
    Apexmap,
    Mix,
    Stream,
    Phase,
    Trace,
}

/// Mix settings as written in a config: a named profile fills in whatever
/// is left unset.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixSpec {
    pub profile: Option<String>,
    pub bytes_per_gb: Option<u64>,
    pub load_pct: Option<f64>,
    pub store_pct: Option<f64>,
    pub compute_pct: Option<f64>,
    pub footprint_bytes: Option<u64>,
    pub alpha: Option<f64>,
    pub function_zipf_s: Option<f64>,
    pub function_count: Option<u32>,
    pub count: Option<u64>,
    pub seed: Option<u64>,
}

impl MixSpec {
    pub fn resolve(&self) -> Result<MixConfig, WorkloadError> {
        let bpg = self.bytes_per_gb.unwrap_or(DEFAULT_BYTES_PER_GB);
        let mut c = match &self.profile {
            Some(name) => MixConfig::from_profile(
                mix_profile(name).ok_or_else(|| {
                    WorkloadError::config("workload.mix.profile", &format!("unknown profile `{name}`"))
                })?,
                bpg,
            ),
            None => MixConfig::default(),
        };
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        take!(load_pct, store_pct, compute_pct, footprint_bytes, alpha, function_zipf_s, function_count, count, seed);
        if self.compute_pct.is_none() && (self.load_pct.is_some() || self.store_pct.is_some()) {
            c.compute_pct = 1.0 - c.load_pct - c.store_pct;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceSpec {
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadConfig {
    pub kind: WorkloadKind,
    pub apexmap: ApexMapConfig,
    pub mix: MixSpec,
    pub stream: StreamConfig,
    pub phase: PhaseConfig,
    pub trace: TraceSpec,
}

impl WorkloadConfig {
    pub fn apexmap(cfg: ApexMapConfig) -> Self {
        Self {
            kind: WorkloadKind::Apexmap,
            apexmap: cfg,
            ..Default::default()
        }
    }

    pub fn stream(cfg: StreamConfig) -> Self {
        Self {
            kind: WorkloadKind::Stream,
            stream: cfg,
            ..Default::default()
        }
    }

    pub fn phase(cfg: PhaseConfig) -> Self {
        Self {
            kind: WorkloadKind::Phase,
            phase: cfg,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        match self.kind {
            WorkloadKind::Apexmap => self.apexmap.validate(),
            WorkloadKind::Mix => self.mix.resolve().map(|_| ()),
            WorkloadKind::Stream => self.stream.validate(),
            WorkloadKind::Phase => self.phase.validate(),
            WorkloadKind::Trace if self.trace.path.as_os_str().is_empty() => {
                Err(WorkloadError::config("workload.trace.path", "is required"))
            }
            WorkloadKind::Trace => Ok(()),
        }
    }

    /// Replaces every generator seed.
    pub fn set_seed(&mut self, seed: u64) {
        self.apexmap.seed = seed;
        self.mix.seed = Some(seed);
        self.phase.seed = seed;
    }

    pub fn build(&self) -> Result<Workload, WorkloadError> {
        self.validate()?;
        Ok(match self.kind {
            WorkloadKind::Apexmap => Workload::single(
                format!("apexmap-a{}", self.apexmap.alpha),
                ApexMap::new(self.apexmap)?.collect(),
                self.apexmap.footprint_bytes,
            ),
            WorkloadKind::Mix => {
                let c = self.mix.resolve()?;
                let name = c.name.clone();
                let fp = c.footprint_bytes;
                Workload::single(name, MixGen::new(c)?.collect(), fp)
            }
            WorkloadKind::Stream => Workload {
                name: format!("stream-{:?}-t{}", self.stream.kernel, self.stream.threads).to_lowercase(),
                streams: stream_gen(&self.stream)?,
                phase_starts: Vec::new(),
                footprint_bytes: self.stream.footprint_bytes(),
            },
            WorkloadKind::Phase => {
                let (records, boundary) = phase_gen(&self.phase)?;
                let mut w = Workload::single("phase".into(), records, self.phase.footprint_bytes);
                w.phase_starts.push(boundary);
                w
            }
            WorkloadKind::Trace => {
                let p = &self.trace.path;
                let records = load_trace(p).map_err(|source| WorkloadError::Trace {
                    path: p.clone(),
                    source,
                })?;
                let fp = records
                    .iter()
                    .filter(|r| r.is_memory())
                    .map(|r| r.address + 64)
                    .max()
                    .unwrap_or(0);
                Workload::single(p.display().to_string(), records, fp)
            }
        })
    }
}

/// Materialized per-core instruction streams.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub name: String,
    pub streams: Vec<Vec<AccessRecord>>,
    /// Indices into stream 0 where each phase after the first begins.
    pub phase_starts: Vec<usize>,
    /// Bytes of address space touched, from zero.
    pub footprint_bytes: u64,
}

impl Workload {
    pub fn single(name: String, records: Vec<AccessRecord>, footprint_bytes: u64) -> Self {
        Self {
            name,
            streams: vec![records],
            phase_starts: Vec::new(),
            footprint_bytes,
        }
    }

    pub fn empty() -> Self {
        Self::single("empty".into(), Vec::new(), 0)
    }

    pub fn memory_ops(&self) -> u64 {
        self.streams
            .iter()
            .flatten()
            .filter(|r| r.is_memory())
            .count() as u64
    }

    pub fn instructions(&self) -> u64 {
        self.streams.iter().map(|s| s.len() as u64).sum()
    }
}
