//! Host address decoding, link timing and the switch fabric.

mod address;
mod fabric;
mod topology;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Tick;

pub use address::{AddressMap, Region, RegionKind, Resolved};
pub use fabric::{gpf_broadcast, Direction, Fabric, LinkId, LinkStats};
pub use topology::{
    partition_mld, EndpointKind, EndpointSpec, Node, SwitchSpec, Topology, TopologySpec,
    VhSpec, VirtualHierarchy, MAX_MLDS, PORT_LANES,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InterconnectError {
    #[error("address {0:#x} is not covered by any region")]
    UnmappedAddress(u64),
    #[error("regions {0} and {1} overlap")]
    OverlappingRegions(usize, usize),
    #[error("region {region} is {size} bytes but its target exposes {expected}")]
    RegionSizeMismatch { region: usize, size: u64, expected: u64 },
    #[error("endpoint `{endpoint}` asks for {requested} logical devices (allowed 1..=16)")]
    TooManyMlds { endpoint: String, requested: u32 },
    #[error("endpoint `{endpoint}`: {reason}")]
    InvalidEndpoint { endpoint: String, reason: String },
    #[error("switch `{switch}` needs {needed} lanes for its ports but has {available}")]
    PortBudgetExceeded { switch: String, needed: u32, available: u32 },
    #[error("partition {mld} of endpoint `{endpoint}` is bound by more than one hierarchy")]
    PartitionConflict { endpoint: String, mld: u32 },
    #[error("virtual hierarchy {vh}: {reason}")]
    InvalidPath { vh: usize, reason: String },
    #[error("fabric links form a cycle through `{0}`")]
    Cycle(String),
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("duplicate element name `{0}`")]
    DuplicateName(String),
    #[error("host {host} has no hierarchy bound to endpoint {endpoint} partition {mld}")]
    NoVhBinding { host: usize, endpoint: usize, mld: u32 },
    #[error("link: {0}")]
    InvalidLink(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    pub lanes: u32,
    pub gt_per_lane: f64,
    pub per_hop_latency_ns: f64,
    pub header_bytes: u32,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            lanes: 4,
            gt_per_lane: 64.0,
            per_hop_latency_ns: 25.0,
            header_bytes: 16,
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<(), InterconnectError> {
        if self.lanes != 4 && self.lanes != 8 {
            return Err(InterconnectError::InvalidLink(format!(
                "lanes must be 4 or 8, got {}",
                self.lanes
            )));
        }
        if !(self.gt_per_lane > 0.0) || !self.gt_per_lane.is_finite() {
            return Err(InterconnectError::InvalidLink(
                "gt_per_lane must be positive".into(),
            ));
        }
        if !(self.per_hop_latency_ns >= 0.0) || !self.per_hop_latency_ns.is_finite() {
            return Err(InterconnectError::InvalidLink(
                "per_hop_latency_ns must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// GT/s per lane carries one bit per transfer; no encoding overhead.
    pub fn bytes_per_ns(&self) -> f64 {
        self.lanes as f64 * self.gt_per_lane / 8.0
    }

    pub fn hop_latency(&self) -> Tick {
        Tick::from_ns_f64(self.per_hop_latency_ns)
    }

    /// Time one link is occupied by a transfer of `payload_bytes`.
    pub fn serialization(&self, payload_bytes: u32) -> Tick {
        Tick::from_ns_f64((self.header_bytes + payload_bytes) as f64 / self.bytes_per_ns())
    }

    /// Unloaded latency across `hops` links.
    pub fn transfer_latency(&self, payload_bytes: u32, hops: u32) -> Tick {
        debug_assert!(hops >= 1);
        Tick(self.hop_latency().as_ps() * hops as u64) + self.serialization(payload_bytes)
    }
}
