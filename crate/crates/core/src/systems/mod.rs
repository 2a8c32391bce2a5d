//! The five evaluated machines: host DRAM only, a CXL DRAM expander, a flash
//! SSD behind a PCIe BAR, the same SSD on CXL.mem, and the annotated CXL
//! SSD.

mod core;
mod sim;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{DeviceConfig, DeviceError, DramTiming};
use crate::host::{HeatTableError, HostConfig, HostConfigError};
use crate::interconnect::{InterconnectError, LinkConfig, TopologySpec};
use crate::protocol::ProtocolError;
use crate::workload::WorkloadError;

pub use sim::System;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    #[default]
    Dram,
    CxlDram,
    PcieSsd,
    CxlSsd,
    CxlAssd,
}

impl SystemKind {
    pub const ALL: [SystemKind; 5] = [
        SystemKind::Dram,
        SystemKind::CxlDram,
        SystemKind::PcieSsd,
        SystemKind::CxlSsd,
        SystemKind::CxlAssd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SystemKind::Dram => "dram",
            SystemKind::CxlDram => "cxl_dram",
            SystemKind::PcieSsd => "pcie_ssd",
            SystemKind::CxlSsd => "cxl_ssd",
            SystemKind::CxlAssd => "cxl_assd",
        }
    }

    pub fn has_flash(self) -> bool {
        matches!(self, SystemKind::PcieSsd | SystemKind::CxlSsd | SystemKind::CxlAssd)
    }
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SystemKind {
    type Err = String;

    /// Accepts `cxl_ssd`, `cxl-ssd` and `CxlSsd` spellings.
    fn from_str(s: &str) -> Result<Self, String> {
        let norm: String = s
            .chars()
            .filter(|c| *c != '_' && *c != '-')
            .collect::<String>()
            .to_ascii_lowercase();
        SystemKind::ALL
            .into_iter()
            .find(|k| k.as_str().replace('_', "") == norm)
            .ok_or_else(|| format!("unknown system kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HostDramConfig {
    pub capacity_bytes: u64,
    pub timing: DramTiming,
}

impl Default for HostDramConfig {
    fn default() -> Self {
        Self {
            capacity_bytes: 4 << 30,
            timing: DramTiming::host_default(),
        }
    }
}

/// Where the annotated system gets its function heat from, and whether DT
/// tagging is on. The thresholds themselves live in the host section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotationConfig {
    pub dt: bool,
    /// Precomputed `function_id,storage_accesses` table. Without one, a
    /// profiling run of the unannotated CXL SSD on the same stream is used.
    pub heat_table: Option<PathBuf>,
}

impl Default for AnnotationConfig {
    fn default() -> Self {
        Self {
            dt: true,
            heat_table: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Leading share of memory instructions left out of latency statistics.
    pub warmup_fraction: f64,
    /// Issue a global persistent flush once the stream has drained.
    pub final_gpf: bool,
    pub event_log: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            warmup_fraction: 0.05,
            final_gpf: false,
            event_log: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub kind: SystemKind,
    pub host: HostConfig,
    pub link: LinkConfig,
    /// Defaults to one host wired straight to one expander.
    pub topology: Option<TopologySpec>,
    pub device: DeviceConfig,
    pub host_dram: HostDramConfig,
    pub annotations: AnnotationConfig,
    pub run: RunConfig,
}

impl SystemConfig {
    pub fn new(kind: SystemKind) -> Self {
        Self {
            kind,
            ..Default::default()
        }
    }

    pub fn with_kind(&self, kind: SystemKind) -> Self {
        Self {
            kind,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), SystemError> {
        self.host.validate()?;
        self.link.validate()?;
        self.device.validate()?;
        self.host_dram
            .timing
            .validate("host_dram.timing")
            .map_err(SystemError::Device)?;
        if !(0.0..1.0).contains(&self.run.warmup_fraction) {
            return Err(SystemError::config("run.warmup_fraction", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SystemError {
    #[error("{field}: {reason}")]
    Config { field: &'static str, reason: String },
    #[error(transparent)]
    Host(#[from] HostConfigError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Interconnect(#[from] InterconnectError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error("annotations.heat_table: {0}")]
    Heat(#[from] HeatTableError),
    #[error("annotations.heat_table: {0}")]
    Io(#[from] std::io::Error),
    #[error("a system runs one workload; build a fresh one for the next run")]
    AlreadyRun,
}

impl SystemError {
    pub(crate) fn config(field: &'static str, reason: &str) -> Self {
        SystemError::Config {
            field,
            reason: reason.to_string(),
        }
    }

    /// Invalid configuration rather than a failure while simulating.
    pub fn is_config(&self) -> bool {
        match self {
            SystemError::Config { .. }
            | SystemError::Host(_)
            | SystemError::Heat(_)
            | SystemError::Io(_) => true,
            SystemError::Device(DeviceError::Config { .. }) => true,
            SystemError::Workload(WorkloadError::Config { .. }) => true,
            SystemError::Workload(WorkloadError::Trace { .. }) => true,
            SystemError::Interconnect(e) => !matches!(e, InterconnectError::UnmappedAddress(_)),
            _ => false,
        }
    }
}
