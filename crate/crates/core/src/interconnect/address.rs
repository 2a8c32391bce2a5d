use serde::{Deserialize, Serialize};

use super::InterconnectError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionKind {
    HostDram,
    HdmCacheable,
    BarNonCacheable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub base: u64,
    pub size: u64,
    pub kind: RegionKind,
    pub endpoint: usize,
    pub mld_index: Option<u32>,
    /// Start of this region inside the endpoint's local address space.
    pub device_offset: u64,
}

impl Region {
    pub fn end(&self) -> u64 {
        self.base + self.size
    }

    pub fn contains(&self, addr: u64) -> bool {
        addr >= self.base && addr < self.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolved {
    pub region: usize,
    pub endpoint: usize,
    pub local: u64,
    pub cacheable: bool,
    pub kind: RegionKind,
    pub mld_index: Option<u32>,
}

/// One host's view of physical memory.
#[derive(Debug, Clone, Default)]
pub struct AddressMap {
    // Sorted by base.
    regions: Vec<Region>,
}

impl AddressMap {
    pub fn new(regions: Vec<Region>) -> Result<Self, InterconnectError> {
        let mut idx: Vec<usize> = (0..regions.len()).collect();
        idx.sort_by_key(|&i| regions[i].base);
        for w in idx.windows(2) {
            let (a, b) = (&regions[w[0]], &regions[w[1]]);
            if a.end() > b.base {
                return Err(InterconnectError::OverlappingRegions(w[0], w[1]));
            }
        }
        for (i, r) in regions.iter().enumerate() {
            if r.size == 0 {
                return Err(InterconnectError::RegionSizeMismatch {
                    region: i,
                    size: 0,
                    expected: 1,
                });
            }
        }
        let regions = idx.into_iter().map(|i| regions[i]).collect();
        Ok(Self { regions })
    }

    /// Checks each region's size against what its endpoint (or partition)
    /// exposes.
    pub fn check_sizes(
        &self,
        exposed: impl Fn(&Region) -> Option<u64>,
    ) -> Result<(), InterconnectError> {
        for (i, r) in self.regions.iter().enumerate() {
            if let Some(expected) = exposed(r) {
                if expected != r.size {
                    return Err(InterconnectError::RegionSizeMismatch {
                        region: i,
                        size: r.size,
                        expected,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn resolve(&self, addr: u64) -> Result<Resolved, InterconnectError> {
        let i = self.regions.partition_point(|r| r.base <= addr);
        if i == 0 {
            return Err(InterconnectError::UnmappedAddress(addr));
        }
        let r = &self.regions[i - 1];
        if !r.contains(addr) {
            return Err(InterconnectError::UnmappedAddress(addr));
        }
        Ok(Resolved {
            region: i - 1,
            endpoint: r.endpoint,
            local: addr - r.base + r.device_offset,
            cacheable: matches!(r.kind, RegionKind::HdmCacheable | RegionKind::HostDram),
            kind: r.kind,
            mld_index: r.mld_index,
        })
    }
}
