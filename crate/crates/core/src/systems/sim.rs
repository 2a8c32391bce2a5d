use std::fs::File;
use std::io::BufReader;

use super::core::Core;
use super::{SystemConfig, SystemError, SystemKind};
use crate::device::{DevOp, DevRequest, DramEndpoint, DramModel, Endpoint, EventLog, FlashSsd};
use crate::engine::{
    Clock, EventQueue, FinalReport, LatencySample, SampleOp, ServedBy, StatsReport, Tick,
};
use crate::host::{AccessRecord, BfNbPolicy, DtPolicy, HeatTable, MemOp};
use crate::interconnect::{
    gpf_broadcast, AddressMap, EndpointKind, Fabric, Region, RegionKind, Resolved, Topology,
    TopologySpec,
};
use crate::protocol::{build_request, Annotation, Bufferability, Determinism};
use crate::workload::Workload;

struct Expander {
    topo: Topology,
    vh: usize,
    endpoint: Endpoint,
}

/// A built machine, ready to run one workload.
pub struct System {
    cfg: SystemConfig,
    clock: Clock,
    map: AddressMap,
    /// Host physical address of workload byte zero.
    base: u64,
    window_bytes: u64,
    fabric: Fabric,
    host_dram: DramModel,
    expander: Option<Expander>,
    heat: Option<HeatTable>,
    dt: Option<DtPolicy>,
    bfnb: Option<BfNbPolicy>,
    /// Storage accesses attributed to the function that caused them.
    counted: HeatTable,
    stats: StatsReport,
    max_done: Tick,
    tag: u16,
    next_req: u64,
    ran: bool,
}

impl System {
    pub fn new(cfg: SystemConfig) -> Result<Self, SystemError> {
        cfg.validate()?;
        let clock = Clock::from_hz(cfg.host.freq_hz)
            .ok_or_else(|| SystemError::config("host.freq_hz", "period must be whole picoseconds"))?;
        let dram_bytes = cfg.host_dram.capacity_bytes;
        let (map, base, window_bytes, expander) = if cfg.kind == SystemKind::Dram {
            let map = AddressMap::new(vec![Region {
                base: 0,
                size: dram_bytes,
                kind: RegionKind::HostDram,
                endpoint: usize::MAX,
                mld_index: None,
                device_offset: 0,
            }])?;
            (map, 0, dram_bytes, None)
        } else {
            Self::wire_expander(&cfg)?
        };
        Ok(Self {
            clock,
            map,
            base,
            window_bytes,
            fabric: Fabric::new(cfg.link),
            host_dram: DramModel::new(cfg.host_dram.timing),
            expander,
            heat: None,
            dt: None,
            bfnb: None,
            counted: HeatTable::new(),
            stats: StatsReport::default(),
            max_done: Tick::ZERO,
            tag: 0,
            next_req: 0,
            ran: false,
            cfg,
        })
    }

    fn wire_expander(
        cfg: &SystemConfig,
    ) -> Result<(AddressMap, u64, u64, Option<Expander>), SystemError> {
        let want = if cfg.kind == SystemKind::CxlDram {
            EndpointKind::DramEp
        } else {
            EndpointKind::FlashSsd
        };
        let spec = cfg
            .topology
            .clone()
            .unwrap_or_else(|| TopologySpec::direct(want, cfg.device.capacity_bytes));
        let topo = Topology::build(&spec)?;
        let vh = topo
            .vhs
            .iter()
            .position(|v| v.host == 0)
            .ok_or_else(|| SystemError::config("topology.vhs", "the first host has no hierarchy"))?;
        let ep = topo.vhs[vh].endpoint;
        let ep_spec = &topo.endpoints[ep];
        if ep_spec.kind != want {
            return Err(SystemError::config(
                "topology.endpoints",
                &format!("{} needs a {:?} endpoint, found {:?}", cfg.kind, want, ep_spec.kind),
            ));
        }
        if ep_spec.capacity_bytes != cfg.device.capacity_bytes {
            return Err(SystemError::config(
                "topology.endpoints",
                "endpoint capacity must equal device.capacity_bytes",
            ));
        }
        let dram_bytes = cfg.host_dram.capacity_bytes;
        let mut map = topo.address_map(0, dram_bytes, dram_bytes)?;
        if cfg.kind == SystemKind::PcieSsd {
            let regions = map
                .regions()
                .iter()
                .map(|r| match r.kind {
                    RegionKind::HdmCacheable => Region {
                        kind: RegionKind::BarNonCacheable,
                        ..*r
                    },
                    _ => *r,
                })
                .collect();
            map = AddressMap::new(regions)?;
        }
        let mld = topo.vhs[vh].mld_index;
        let region = *map
            .regions()
            .iter()
            .find(|r| r.endpoint == ep && r.mld_index == Some(mld))
            .expect("address map covers every bound partition");
        let endpoint = match want {
            EndpointKind::DramEp => Endpoint::Dram(DramEndpoint::new(
                cfg.device.capacity_bytes,
                cfg.device.dram_cache.timing,
            )),
            EndpointKind::FlashSsd => {
                let mut s = FlashSsd::new(cfg.device)?;
                if cfg.run.event_log {
                    s.enable_event_log();
                }
                Endpoint::Ssd(Box::new(s))
            }
        };
        Ok((
            map,
            region.base,
            region.size,
            Some(Expander { topo, vh, endpoint }),
        ))
    }

    /// Supplies the function heat used for BF selection instead of a
    /// profiling run.
    pub fn with_heat(mut self, heat: HeatTable) -> Self {
        self.heat = Some(heat);
        self
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn kind(&self) -> SystemKind {
        self.cfg.kind
    }

    pub fn address_map(&self) -> &AddressMap {
        &self.map
    }

    /// Host physical address where the workload's address zero lives.
    pub fn workload_base(&self) -> u64 {
        self.base
    }

    pub fn endpoint(&self) -> Option<&Endpoint> {
        self.expander.as_ref().map(|e| &e.endpoint)
    }

    pub fn event_log(&self) -> Option<&EventLog> {
        self.endpoint().and_then(|e| e.event_log())
    }

    /// Storage accesses per function in the last run.
    pub fn storage_heat(&self) -> &HeatTable {
        &self.counted
    }

    pub fn heat(&self) -> Option<&HeatTable> {
        self.heat.as_ref()
    }

    pub fn realized_dt_fraction(&self) -> Option<f64> {
        self.dt.as_ref().map(|p| p.realized_fraction())
    }

    fn setup_annotations(&mut self, w: &Workload) -> Result<(), SystemError> {
        if self.cfg.kind != SystemKind::CxlAssd {
            return Ok(());
        }
        let h = &self.cfg.host;
        if self.cfg.annotations.dt {
            self.dt = Some(match h.dt_target_fraction {
                Some(target) => DtPolicy::calibrated(target, h.dt_threshold),
                None => DtPolicy::threshold(h.dt_threshold),
            });
        }
        let frac = h.bf_function_fraction;
        let nb = h.nb_function_set.clone();
        if frac > 0.0 || !nb.is_empty() {
            let heat = if frac == 0.0 {
                HeatTable::new()
            } else if let Some(heat) = &self.heat {
                heat.clone()
            } else if let Some(path) = &self.cfg.annotations.heat_table {
                HeatTable::read_csv(BufReader::new(File::open(path)?))?
            } else {
                let mut probe = System::new(self.cfg.with_kind(SystemKind::CxlSsd))?;
                probe.run(w)?;
                probe.counted
            };
            self.bfnb = Some(BfNbPolicy::new(&heat, frac, &nb));
            self.heat = Some(heat);
        }
        Ok(())
    }

    /// Drives every stream to completion.
    pub fn run(&mut self, w: &Workload) -> Result<FinalReport, SystemError> {
        if self.ran {
            return Err(SystemError::AlreadyRun);
        }
        self.ran = true;
        log::info!("{}: {} on {} stream(s)", self.cfg.kind, w.name, w.streams.len());
        if w.streams.len() > self.cfg.host.cores as usize {
            return Err(SystemError::config(
                "host.cores",
                &format!("workload has {} streams", w.streams.len()),
            ));
        }
        if w.footprint_bytes > self.window_bytes {
            return Err(SystemError::config(
                "workload",
                &format!(
                    "footprint of {} bytes exceeds the {}-byte memory window",
                    w.footprint_bytes, self.window_bytes
                ),
            ));
        }
        self.setup_annotations(w)?;
        let memory_ops = w.memory_ops();
        let warmup = (memory_ops as f64 * self.cfg.run.warmup_fraction).floor() as u64;
        let mut cores: Vec<Core> = w.streams.iter().map(|_| Core::new(&self.cfg.host)).collect();
        let mut queue = EventQueue::new();
        for c in 0..cores.len() {
            queue.schedule(Tick::ZERO, c).expect("queue starts at zero");
        }
        while let Some((now, c)) = queue.pop(None) {
            if let Some(next) = self.step(&mut cores[c], &w.streams[c], now, warmup)? {
                queue.schedule(next, c).expect("cores only move forward");
            }
            // Every later request is issued at or after `now`.
            self.fabric.forget_before(now);
            self.host_dram.forget_before(now);
            if let Some(x) = self.expander.as_mut() {
                x.endpoint.forget_before(now);
            }
        }
        let mut total = cores
            .iter()
            .map(|c| c.last_retire)
            .fold(self.max_done, Tick::max);
        if self.cfg.run.final_gpf {
            if let Some(x) = self.expander.as_mut() {
                let ep = &mut x.endpoint;
                total = total.max(gpf_broadcast(&mut self.fabric, &x.topo, &[x.vh], total, |_, _, at| {
                    ep.persist_flush(at)
                }));
            }
        }
        let s = &mut self.stats;
        s.total_ticks = total;
        s.memory_ops = memory_ops;
        s.issued = self.next_req;
        s.completed = self.next_req;
        s.in_flight = 0;
        s.device_requests = s.storage_accesses;
        if let Some(x) = &self.expander {
            let d = x.endpoint.stats();
            s.flash_reads = d.flash_reads;
            s.flash_programs = d.flash_programs;
            s.flash_erases = d.flash_erases;
            s.device_dram_hits = d.dram_hits;
            s.device_dram_misses = d.dram_misses;
            s.pinned_demotions = d.pinned_demotions;
            s.gc_events = d.gc_events.clone();
        }
        log::debug!(
            "{}: {} ps, {} storage accesses, {} GC cycles",
            self.cfg.kind,
            s.total_ticks.as_ps(),
            s.storage_accesses,
            s.gc_events.len()
        );
        Ok(std::mem::take(&mut self.stats).finalize())
    }

    /// Runs `core` from `now` up to its next memory instruction that cannot
    /// issue yet. Returns when to resume, or `None` once the stream is done.
    fn step(
        &mut self,
        core: &mut Core,
        stream: &[AccessRecord],
        now: Tick,
        warmup: u64,
    ) -> Result<Option<Tick>, SystemError> {
        let cycle = self.clock.period();
        let window = self.cfg.host.lsq_entries as usize;
        let sq_cap = self.cfg.host.store_queue_entries;
        loop {
            let Some(rec) = stream.get(core.pos) else {
                return Ok(None);
            };
            let t = core.window_slot(core.t, window);
            if rec.op == MemOp::Compute {
                core.retire_at(t + cycle);
                core.t = t + cycle;
                core.pos += 1;
                continue;
            }
            core.t = t;
            if t > now {
                return Ok(Some(t));
            }
            let addr = self.base + rec.address;
            let r = self.map.resolve(addr)?;
            if !r.cacheable {
                if core.uncached_busy > t {
                    core.t = core.uncached_busy;
                    return Ok(Some(core.t));
                }
            } else {
                if rec.op == MemOp::Store {
                    let (_, queued) = core.lsq_occupancy(t);
                    if queued >= sq_cap {
                        core.t = core.stores.peek().expect("store queue is full").0;
                        return Ok(Some(core.t));
                    }
                }
                core.retire_fills(t);
                if let Some(free) = core.mshr_stall(addr) {
                    core.t = free;
                    return Ok(Some(free));
                }
            }
            let ann = self.annotate(core, rec, t);
            let (done, served_by) = if r.cacheable {
                self.cached_access(core, rec, addr, ann, t)?
            } else {
                let op = if rec.op == MemOp::Load {
                    DevOp::Load
                } else {
                    DevOp::Store
                };
                self.device_access(&r, op, rec.function_id, ann, t)?
            };
            match (rec.op, r.cacheable) {
                (MemOp::Store, true) => {
                    core.stores.push(std::cmp::Reverse(done));
                    core.retire_at(t + cycle);
                }
                (MemOp::Load, _) => {
                    core.loads.push(std::cmp::Reverse(done));
                    core.retire_at(done);
                }
                _ => core.retire_at(done),
            }
            if !r.cacheable {
                core.uncached_busy = done;
            }
            self.max_done = self.max_done.max(done);
            let req_id = self.next_req;
            self.next_req += 1;
            if ann.is_dt() {
                self.stats.dt_requests += 1;
            }
            if ann != Annotation::NONE {
                self.stats.annotated_requests += 1;
            }
            if req_id >= warmup {
                self.stats.samples.push(LatencySample {
                    req_id,
                    op: if rec.op == MemOp::Load {
                        SampleOp::Load
                    } else {
                        SampleOp::Store
                    },
                    issue: t,
                    complete: done,
                    annotation: ann,
                    served_by,
                });
            }
            core.t = t + cycle;
            core.pos += 1;
        }
    }

    fn annotate(&mut self, core: &mut Core, rec: &AccessRecord, t: Tick) -> Annotation {
        let det = match self.dt.as_mut() {
            Some(p) => {
                let (loads, stores) = core.lsq_occupancy(t);
                let me = (rec.op == MemOp::Load) as u32;
                p.decide(loads + me, loads + stores + 1)
            }
            None => Determinism::Unannotated,
        };
        let buf = self
            .bfnb
            .as_ref()
            .map_or(Bufferability::Unannotated, |p| p.decide(rec.function_id));
        Annotation::new(det, buf)
    }

    fn cached_access(
        &mut self,
        core: &mut Core,
        rec: &AccessRecord,
        line: u64,
        ann: Annotation,
        t: Tick,
    ) -> Result<(Tick, ServedBy), SystemError> {
        let l1_lat = self.clock.cycles(core.l1.hit_latency() as u64);
        let l2_lat = self.clock.cycles(core.l2.hit_latency() as u64);
        let outcome = core
            .l1
            .access(line, rec.op, rec.function_id)
            .expect("MSHR availability checked before issue");
        use crate::host::Outcome;
        let victim = match outcome {
            Outcome::Hit => {
                self.stats.l1.hits += 1;
                return Ok((t + l1_lat, ServedBy::CpuL1));
            }
            Outcome::Merged => {
                self.stats.l1.misses += 1;
                let (fill, from) = core.l1_fills.get(line).unwrap_or((t, ServedBy::CpuL1));
                return Ok((fill.max(t + l1_lat), from));
            }
            Outcome::Miss { victim } => {
                self.stats.l1.misses += 1;
                victim
            }
        };
        let t2 = t + l1_lat;
        if let Some(v) = victim.filter(|v| v.dirty) {
            if !core.l2.write_back_into(v.address, v.owner) {
                self.write_line(v.address, v.owner, t2)?;
            }
        }
        let (fill, from) = match core
            .l2
            .access(line, MemOp::Load, rec.function_id)
            .expect("MSHR availability checked before issue")
        {
            Outcome::Hit => {
                self.stats.l2.hits += 1;
                (t2 + l2_lat, ServedBy::CpuL2)
            }
            Outcome::Merged => {
                self.stats.l2.misses += 1;
                core.l2_fills.get(line).unwrap_or((t2 + l2_lat, ServedBy::CpuL2))
            }
            Outcome::Miss { victim } => {
                self.stats.l2.misses += 1;
                let tm = t2 + l2_lat;
                if let Some(v) = victim {
                    // Inclusion: the L1 copy goes too, and its data wins.
                    let (mut dirty, mut owner) = (v.dirty, v.owner);
                    if let Some(u) = core.l1.invalidate(v.address) {
                        if u.dirty {
                            dirty = true;
                            owner = u.owner;
                        }
                    }
                    if dirty {
                        self.write_line(v.address, owner, tm)?;
                    }
                }
                let got = self.read_line(line, rec.function_id, ann, tm)?;
                core.l2_fills.insert(line, got.0, got.1);
                got
            }
        };
        core.l1_fills.insert(line, fill, from);
        Ok((fill, from))
    }

    fn read_line(
        &mut self,
        line: u64,
        function_id: u32,
        ann: Annotation,
        at: Tick,
    ) -> Result<(Tick, ServedBy), SystemError> {
        let r = self.map.resolve(line)?;
        if r.kind == RegionKind::HostDram {
            return Ok((self.host_dram.access(at, line, 64), ServedBy::HostDram));
        }
        self.device_access(&r, DevOp::Load, function_id, ann, at)
    }

    /// Dirty-line write-back; the host does not wait for it.
    fn write_line(&mut self, line: u64, owner: u32, at: Tick) -> Result<(), SystemError> {
        let r = self.map.resolve(line)?;
        let done = if r.kind == RegionKind::HostDram {
            self.host_dram.access(at, line, 64)
        } else {
            let buf = self
                .bfnb
                .as_ref()
                .map_or(Bufferability::Unannotated, |p| p.decide(owner));
            let ann = Annotation::new(Determinism::Unannotated, buf);
            self.device_access(&r, DevOp::Store, owner, ann, at)?.0
        };
        self.max_done = self.max_done.max(done);
        Ok(())
    }

    /// One request across the fabric to the expander and its response back.
    fn device_access(
        &mut self,
        r: &Resolved,
        op: DevOp,
        function_id: u32,
        ann: Annotation,
        at: Tick,
    ) -> Result<(Tick, ServedBy), SystemError> {
        let x = self.expander.as_mut().expect("device region implies an expander");
        let vh = &x.topo.vhs[x.vh];
        let mld = r.mld_index.unwrap_or(0);
        let rec = match op {
            DevOp::Load => AccessRecord::load(r.local, function_id),
            DevOp::Store => AccessRecord::store(r.local, function_id),
        };
        let req = build_request(&rec, ann, self.tag)?;
        self.tag = self.tag.wrapping_add(1);
        let mut arrive = at;
        for f in req.flits() {
            arrive = arrive.max(self.fabric.route_flit(&f, vh, r.endpoint, mld, at)?);
        }
        // The device sees only what survived the wire encoding.
        let seen = req.req.annotation()?;
        let resp = match (&mut x.endpoint, r.kind) {
            (Endpoint::Ssd(s), RegionKind::BarNonCacheable) => {
                s.serve_bar_request(arrive, r.local, op, r.local)?
            }
            (ep, _) => {
                let dreq = DevRequest {
                    local: r.local,
                    op,
                    annotation: seen,
                    value: r.local,
                };
                ep.handle(arrive, &dreq)?
            }
        };
        let back = self
            .fabric
            .route_flit(&req.req.response(), vh, r.endpoint, mld, resp.done)?;
        self.stats.storage_accesses += 1;
        self.counted.record(function_id);
        Ok((back, resp.served_by))
    }
}
