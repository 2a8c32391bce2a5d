//! Deterministic simulator of a host CPU attached to memory expanders over
//! CXL or PCIe.

pub mod config;
pub mod device;
pub mod engine;
pub mod host;
pub mod interconnect;
pub mod protocol;
pub mod systems;
pub mod workload;
