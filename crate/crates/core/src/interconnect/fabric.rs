use std::collections::HashMap;

use super::{InterconnectError, LinkConfig, Node, Topology, VirtualHierarchy};
use crate::engine::{Tick, Timeline};
use crate::protocol::{gpf_request, Flit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Host toward endpoint.
    M2S,
    /// Endpoint toward host.
    S2M,
}

/// One direction of one physical link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinkId {
    pub from: Node,
    pub to: Node,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinkStats {
    pub transfers: u64,
    pub bytes_in: u64,
    pub bytes_out: u64,
    pub busy: Tick,
}

#[derive(Debug, Clone)]
struct LinkState {
    line: Timeline,
    stats: LinkStats,
}

/// Runtime link occupancy. Each directed link carries one transfer at a time;
/// a transfer takes the first idle slot after it is ready. Transfers cut through switches, so serialization is paid
/// once per path when nothing queues.
#[derive(Debug, Clone)]
pub struct Fabric {
    cfg: LinkConfig,
    links: HashMap<LinkId, LinkState>,
}

impl Fabric {
    pub fn new(cfg: LinkConfig) -> Self {
        Self {
            cfg,
            links: HashMap::new(),
        }
    }

    pub fn config(&self) -> &LinkConfig {
        &self.cfg
    }

    /// Sends `payload_bytes` (plus header) along `hops` starting at `now`;
    /// returns the tick the last byte reaches the far end.
    pub fn send(&mut self, hops: &[Node], dir: Direction, payload_bytes: u32, now: Tick) -> Tick {
        let ser = self.cfg.serialization(payload_bytes);
        let hop = self.cfg.hop_latency();
        let wire = (self.cfg.header_bytes + payload_bytes) as u64;
        let mut head = now;
        let n = hops.len();
        for i in 0..n - 1 {
            let id = match dir {
                Direction::M2S => LinkId {
                    from: hops[i],
                    to: hops[i + 1],
                },
                Direction::S2M => LinkId {
                    from: hops[n - 1 - i],
                    to: hops[n - 2 - i],
                },
            };
            let st = self.links.entry(id).or_insert_with(|| LinkState {
                line: Timeline::new(),
                stats: LinkStats::default(),
            });
            let start = st.line.reserve(head, ser);
            st.stats.transfers += 1;
            st.stats.bytes_in += wire;
            st.stats.bytes_out += wire;
            st.stats.busy += ser;
            head = start + hop;
        }
        head + ser
    }

    /// Routes `flit` over `vh`, which must be bound to `endpoint`.
    pub fn route_flit(
        &mut self,
        flit: &Flit,
        vh: &VirtualHierarchy,
        endpoint: usize,
        mld: u32,
        now: Tick,
    ) -> Result<Tick, InterconnectError> {
        if vh.endpoint != endpoint || vh.mld_index != mld {
            return Err(InterconnectError::NoVhBinding {
                host: vh.host,
                endpoint,
                mld,
            });
        }
        let dir = if flit.class().is_m2s() {
            Direction::M2S
        } else {
            Direction::S2M
        };
        Ok(self.send(&vh.hops, dir, flit.payload_bytes(), now))
    }

    /// No transfer will be sent before `t` from now on.
    pub fn forget_before(&mut self, t: Tick) {
        for st in self.links.values_mut() {
            st.line.forget_before(t);
        }
    }

    pub fn link_stats(&self) -> impl Iterator<Item = (LinkId, LinkStats)> + '_ {
        self.links.iter().map(|(k, v)| (*k, v.stats))
    }
}

/// Sends GPF down each hierarchy in `vhs`. `flush(endpoint, mld, arrival)`
/// runs the endpoint's flush and returns when it finished. Completes when
/// the last acknowledgement is back at its host.
pub fn gpf_broadcast<F>(
    fabric: &mut Fabric,
    topo: &Topology,
    vhs: &[usize],
    now: Tick,
    mut flush: F,
) -> Tick
where
    F: FnMut(usize, u32, Tick) -> Tick,
{
    let mut done = now;
    for (i, &v) in vhs.iter().enumerate() {
        let vh = &topo.vhs[v];
        let req = gpf_request(i as u16);
        let arrive = fabric.send(&vh.hops, Direction::M2S, req.payload_bytes(), now);
        let flushed = flush(vh.endpoint, vh.mld_index, arrive);
        let ack = req.response();
        let back = fabric.send(&vh.hops, Direction::S2M, ack.payload_bytes(), flushed);
        done = done.max(back);
    }
    done
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interconnect::{EndpointKind, TopologySpec};
    use crate::protocol::{FlitClass, Opcode};

    fn direct() -> Topology {
        Topology::build(&TopologySpec::direct(EndpointKind::FlashSsd, 1 << 30)).unwrap()
    }

    fn rd(tag: u16) -> Flit {
        Flit::new(FlitClass::M2SReq, Opcode::MemRd, 0x40, tag, 0).unwrap()
    }

    fn wr_data(tag: u16) -> Flit {
        Flit::new(FlitClass::M2SRwD, Opcode::MemWr, 0x40, tag, 0).unwrap()
    }

    #[test]
    fn direct_vh_one_hop() {
        let t = direct();
        let mut f = Fabric::new(LinkConfig::default());
        let at = f.route_flit(&wr_data(0), &t.vhs[0], 0, 0, Tick::ZERO).unwrap();
        assert_eq!(at, LinkConfig::default().transfer_latency(64, 1));
    }

    #[test]
    fn same_tick_flits_serialize() {
        let t = direct();
        let mut f = Fabric::new(LinkConfig::default());
        let a = f.route_flit(&wr_data(0), &t.vhs[0], 0, 0, Tick::ZERO).unwrap();
        let b = f.route_flit(&wr_data(1), &t.vhs[0], 0, 0, Tick::ZERO).unwrap();
        assert!(b >= a + Tick::ps(2_500));
    }

    #[test]
    fn directions_do_not_contend() {
        let t = direct();
        let mut f = Fabric::new(LinkConfig::default());
        let a = f.route_flit(&rd(0), &t.vhs[0], 0, 0, Tick::ZERO).unwrap();
        let resp = rd(0).response();
        let b = f.route_flit(&resp, &t.vhs[0], 0, 0, Tick::ZERO).unwrap();
        assert_eq!(a, LinkConfig::default().transfer_latency(0, 1));
        assert_eq!(b, LinkConfig::default().transfer_latency(64, 1));
    }

    #[test]
    fn wrong_endpoint_has_no_binding() {
        let t = direct();
        let mut f = Fabric::new(LinkConfig::default());
        assert!(matches!(
            f.route_flit(&rd(0), &t.vhs[0], 1, 0, Tick::ZERO),
            Err(InterconnectError::NoVhBinding { endpoint: 1, .. })
        ));
    }

    #[test]
    fn link_bytes_conserved_and_utilization_bounded() {
        let t = direct();
        let mut f = Fabric::new(LinkConfig::default());
        let mut last = Tick::ZERO;
        for i in 0..100u16 {
            last = f
                .route_flit(&wr_data(i), &t.vhs[0], 0, 0, Tick::ns(i as u64))
                .unwrap();
        }
        for (_, s) in f.link_stats() {
            assert_eq!(s.bytes_in, s.bytes_out);
            assert!(s.busy <= last);
        }
    }

    #[test]
    fn empty_gpf_costs_round_trip() {
        let t = direct();
        let mut f = Fabric::new(LinkConfig::default());
        let done = gpf_broadcast(&mut f, &t, &[0], Tick::ZERO, |_, _, at| at);
        assert_eq!(done, Tick(2 * LinkConfig::default().transfer_latency(0, 1).as_ps()));
    }
}
