use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{AddressMap, InterconnectError, Region, RegionKind};

/// Logical devices one endpoint can be split into.
pub const MAX_MLDS: u32 = 16;
/// Lanes consumed by one switch port.
pub const PORT_LANES: u32 = 16;
const PAGE: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Node {
    Host(usize),
    Switch(usize),
    Endpoint(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointKind {
    FlashSsd,
    DramEp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchSpec {
    pub name: String,
    pub usps: u32,
    pub dsps: u32,
    pub lanes_total: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointSpec {
    pub name: String,
    pub kind: EndpointKind,
    pub capacity_bytes: u64,
    #[serde(default = "one")]
    pub mld_count: u32,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VhSpec {
    pub host: String,
    /// Switches between host and endpoint, host side first.
    #[serde(default)]
    pub path: Vec<String>,
    pub endpoint: String,
    #[serde(default)]
    pub mld_index: u32,
}

/// Named, unvalidated fabric description as it appears in configuration.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub hosts: Vec<String>,
    #[serde(default)]
    pub switches: Vec<SwitchSpec>,
    pub endpoints: Vec<EndpointSpec>,
    pub edges: Vec<[String; 2]>,
    pub vhs: Vec<VhSpec>,
}

impl TopologySpec {
    /// One host wired straight to one endpoint.
    pub fn direct(kind: EndpointKind, capacity_bytes: u64) -> Self {
        Self {
            hosts: vec!["host0".into()],
            switches: vec![],
            endpoints: vec![EndpointSpec {
                name: "ep0".into(),
                kind,
                capacity_bytes,
                mld_count: 1,
            }],
            edges: vec![["host0".into(), "ep0".into()]],
            vhs: vec![VhSpec {
                host: "host0".into(),
                path: vec![],
                endpoint: "ep0".into(),
                mld_index: 0,
            }],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VirtualHierarchy {
    pub host: usize,
    /// Full path, host first and endpoint last.
    pub hops: Vec<Node>,
    pub endpoint: usize,
    pub mld_index: u32,
}

impl VirtualHierarchy {
    pub fn link_count(&self) -> u32 {
        (self.hops.len() - 1) as u32
    }
}

/// A validated, immutable fabric.
#[derive(Debug, Clone)]
pub struct Topology {
    pub hosts: Vec<String>,
    pub switches: Vec<SwitchSpec>,
    pub endpoints: Vec<EndpointSpec>,
    pub edges: Vec<(Node, Node)>,
    pub vhs: Vec<VirtualHierarchy>,
    partitions: Vec<Vec<(u64, u64)>>,
}

/// Splits `capacity` into `k` page-aligned pieces as `(offset, size)`; the
/// last piece takes the remainder.
pub fn partition_mld(capacity: u64, k: u32) -> Result<Vec<(u64, u64)>, InterconnectError> {
    if k == 0 || k > MAX_MLDS {
        return Err(InterconnectError::TooManyMlds {
            endpoint: String::new(),
            requested: k,
        });
    }
    let each = capacity / k as u64 / PAGE * PAGE;
    let mut out = Vec::with_capacity(k as usize);
    for i in 0..k as u64 {
        let off = i * each;
        let size = if i + 1 == k as u64 { capacity - off } else { each };
        out.push((off, size));
    }
    Ok(out)
}

struct Names(HashMap<String, Node>);

impl Names {
    fn get(&self, name: &str) -> Result<Node, InterconnectError> {
        self.0
            .get(name)
            .copied()
            .ok_or_else(|| InterconnectError::UnknownElement(name.to_string()))
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

impl Topology {
    pub fn build(spec: &TopologySpec) -> Result<Self, InterconnectError> {
        let mut names = HashMap::new();
        let all = spec
            .hosts
            .iter()
            .enumerate()
            .map(|(i, n)| (n, Node::Host(i)))
            .chain(spec.switches.iter().enumerate().map(|(i, s)| (&s.name, Node::Switch(i))))
            .chain(spec.endpoints.iter().enumerate().map(|(i, e)| (&e.name, Node::Endpoint(i))));
        for (name, node) in all {
            if names.insert(name.clone(), node).is_some() {
                return Err(InterconnectError::DuplicateName(name.clone()));
            }
        }
        let names = Names(names);

        let mut partitions = Vec::new();
        for ep in &spec.endpoints {
            if ep.mld_count == 0 || ep.mld_count > MAX_MLDS {
                return Err(InterconnectError::TooManyMlds {
                    endpoint: ep.name.clone(),
                    requested: ep.mld_count,
                });
            }
            if ep.capacity_bytes < PAGE * ep.mld_count as u64 {
                return Err(InterconnectError::InvalidEndpoint {
                    endpoint: ep.name.clone(),
                    reason: "needs at least one page per partition".into(),
                });
            }
            partitions.push(partition_mld(ep.capacity_bytes, ep.mld_count)?);
        }

        let mut edges = Vec::new();
        let mut degree = vec![0u32; spec.switches.len()];
        for [a, b] in &spec.edges {
            let (na, nb) = (names.get(a)?, names.get(b)?);
            for n in [na, nb] {
                if let Node::Switch(s) = n {
                    degree[s] += 1;
                }
            }
            edges.push((na, nb));
        }
        for (i, sw) in spec.switches.iter().enumerate() {
            let ports = (sw.usps + sw.dsps).max(degree[i]);
            let needed = ports * PORT_LANES;
            if needed > sw.lanes_total {
                return Err(InterconnectError::PortBudgetExceeded {
                    switch: sw.name.clone(),
                    needed,
                    available: sw.lanes_total,
                });
            }
        }

        // The fabric graph must be a forest.
        let index = |n: Node| match n {
            Node::Host(i) => i,
            Node::Switch(i) => spec.hosts.len() + i,
            Node::Endpoint(i) => spec.hosts.len() + spec.switches.len() + i,
        };
        let mut parent: Vec<usize> =
            (0..spec.hosts.len() + spec.switches.len() + spec.endpoints.len()).collect();
        for (k, &(a, b)) in edges.iter().enumerate() {
            let (ra, rb) = (find(&mut parent, index(a)), find(&mut parent, index(b)));
            if ra == rb {
                return Err(InterconnectError::Cycle(spec.edges[k][1].clone()));
            }
            parent[ra] = rb;
        }
        let edge_set: HashSet<(Node, Node)> =
            edges.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect();

        let mut vhs = Vec::new();
        let mut claimed = HashSet::new();
        for (i, v) in spec.vhs.iter().enumerate() {
            let bad = |reason: String| InterconnectError::InvalidPath { vh: i, reason };
            let host = match names.get(&v.host)? {
                Node::Host(h) => h,
                _ => return Err(bad(format!("`{}` is not a host", v.host))),
            };
            let endpoint = match names.get(&v.endpoint)? {
                Node::Endpoint(e) => e,
                _ => return Err(bad(format!("`{}` is not an endpoint", v.endpoint))),
            };
            let mut hops = vec![Node::Host(host)];
            for s in &v.path {
                match names.get(s)? {
                    n @ Node::Switch(_) => hops.push(n),
                    _ => return Err(bad(format!("`{s}` is not a switch"))),
                }
            }
            hops.push(Node::Endpoint(endpoint));
            let distinct: HashSet<_> = hops.iter().collect();
            if distinct.len() != hops.len() {
                return Err(bad("path revisits a node".into()));
            }
            for w in hops.windows(2) {
                if !edge_set.contains(&(w[0], w[1])) {
                    return Err(bad(format!("no link between {:?} and {:?}", w[0], w[1])));
                }
            }
            if v.mld_index >= spec.endpoints[endpoint].mld_count {
                return Err(bad(format!(
                    "partition {} does not exist on `{}`",
                    v.mld_index, v.endpoint
                )));
            }
            if !claimed.insert((endpoint, v.mld_index)) {
                return Err(InterconnectError::PartitionConflict {
                    endpoint: v.endpoint.clone(),
                    mld: v.mld_index,
                });
            }
            vhs.push(VirtualHierarchy {
                host,
                hops,
                endpoint,
                mld_index: v.mld_index,
            });
        }

        Ok(Self {
            hosts: spec.hosts.clone(),
            switches: spec.switches.clone(),
            endpoints: spec.endpoints.clone(),
            edges,
            vhs,
            partitions,
        })
    }

    pub fn partitions(&self, endpoint: usize) -> &[(u64, u64)] {
        &self.partitions[endpoint]
    }

    pub fn partition(&self, endpoint: usize, mld: u32) -> (u64, u64) {
        self.partitions[endpoint][mld as usize]
    }

    pub fn find_vh(
        &self,
        host: usize,
        endpoint: usize,
        mld: u32,
    ) -> Result<usize, InterconnectError> {
        self.vhs
            .iter()
            .position(|v| v.host == host && v.endpoint == endpoint && v.mld_index == mld)
            .ok_or(InterconnectError::NoVhBinding {
                host,
                endpoint,
                mld,
            })
    }

    /// `host`'s address map: local DRAM at zero, then one cacheable region
    /// per bound partition starting at `hdm_base`.
    pub fn address_map(
        &self,
        host: usize,
        host_dram_bytes: u64,
        hdm_base: u64,
    ) -> Result<AddressMap, InterconnectError> {
        let mut regions = Vec::new();
        if host_dram_bytes > 0 {
            regions.push(Region {
                base: 0,
                size: host_dram_bytes,
                kind: RegionKind::HostDram,
                endpoint: usize::MAX,
                mld_index: None,
                device_offset: 0,
            });
        }
        let mut base = hdm_base.max(host_dram_bytes);
        for v in self.vhs.iter().filter(|v| v.host == host) {
            let (off, size) = self.partition(v.endpoint, v.mld_index);
            base = base.div_ceil(PAGE) * PAGE;
            regions.push(Region {
                base,
                size,
                kind: RegionKind::HdmCacheable,
                endpoint: v.endpoint,
                mld_index: Some(v.mld_index),
                device_offset: off,
            });
            base += size;
        }
        let map = AddressMap::new(regions)?;
        map.check_sizes(|r| match r.kind {
            RegionKind::HdmCacheable => {
                Some(self.partition(r.endpoint, r.mld_index.unwrap_or(0)).1)
            }
            _ => None,
        })?;
        Ok(map)
    }
}
