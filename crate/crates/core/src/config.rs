//! Experiment files: one TOML document holding the system kind and the
//! `host`, `link`, `topology`, `device`, `host_dram`, `workload`,
//! `annotations` and `run` sections. Every field is optional; omitted ones
//! take the values of the `Default` impls.
//!
//! ```toml
//! kind = "cxl_assd"
//!
//! [host]
//! dt_target_fraction = 0.75
//!
//! [workload]
//! kind = "apexmap"
//! apexmap = { alpha = 0.5, count = 100000 }
//!
//! [run]
//! seed = 7
//! ```
//!
//! `run.seed`, when written, replaces the workload and preconditioning
//! seeds. Relative paths are taken from the directory holding the file.

use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::DeviceConfig;
use crate::host::HostConfig;
use crate::interconnect::{LinkConfig, TopologySpec};
use crate::systems::{AnnotationConfig, HostDramConfig, RunConfig, SystemConfig, SystemKind};
use crate::workload::{WorkloadConfig, WorkloadKind};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: SystemKind,
    pub host: HostConfig,
    pub link: LinkConfig,
    pub topology: Option<TopologySpec>,
    pub device: DeviceConfig,
    pub host_dram: HostDramConfig,
    pub workload: WorkloadConfig,
    pub annotations: AnnotationConfig,
    pub run: RunConfig,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
}

impl ConfigError {
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { field, .. } => Some(field),
            _ => None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        let seeded = table
            .get("run")
            .and_then(|r| r.get("seed"))
            .is_some();
        if seeded {
            cfg.set_seed(cfg.run.seed);
        }
        Ok(cfg)
    }

    /// Reads and validates `path`.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(dir) = path.parent() {
            cfg.rebase_paths(dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn rebase_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if !p.as_os_str().is_empty() && p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        fix(&mut self.workload.trace.path);
        if let Some(p) = self.annotations.heat_table.as_mut() {
            fix(p);
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Seeds the run, every workload generator and device preconditioning.
    pub fn set_seed(&mut self, seed: u64) {
        self.run.seed = seed;
        self.workload.set_seed(seed);
        self.device.precondition.seed = seed;
    }

    pub fn system(&self) -> SystemConfig {
        SystemConfig {
            kind: self.kind,
            host: self.host.clone(),
            link: self.link,
            topology: self.topology.clone(),
            device: self.device,
            host_dram: self.host_dram,
            annotations: self.annotations.clone(),
            run: self.run,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.system().validate().map_err(invalid)?;
        if let Some(t) = &self.topology {
            crate::interconnect::Topology::build(t).map_err(|e| ConfigError::Invalid {
                field: "topology".into(),
                reason: e.to_string(),
            })?;
        }
        // Trace files are read when the workload is built.
        if self.workload.kind != WorkloadKind::Trace {
            self.workload.validate().map_err(|e| invalid_workload(&e))?;
        } else if self.workload.trace.path.as_os_str().is_empty() {
            return Err(ConfigError::Invalid {
                field: "workload.trace.path".into(),
                reason: "is required".into(),
            });
        }
        Ok(())
    }
}

fn invalid(e: crate::systems::SystemError) -> ConfigError {
    let msg = e.to_string();
    match msg.split_once(": ") {
        Some((field, reason)) if !field.contains(' ') => ConfigError::Invalid {
            field: field.to_string(),
            reason: reason.to_string(),
        },
        _ => ConfigError::Invalid {
            field: "config".into(),
            reason: msg,
        },
    }
}

fn invalid_workload(e: &crate::workload::WorkloadError) -> ConfigError {
    ConfigError::Invalid {
        field: e.field().unwrap_or("workload").to_string(),
        reason: match e {
            crate::workload::WorkloadError::Config { reason, .. } => reason.clone(),
            other => other.to_string(),
        },
    }
}
