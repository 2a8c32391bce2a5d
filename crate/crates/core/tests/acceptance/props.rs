//! Exact property suites.

use std::collections::HashSet;

use cxlmemsim::device::{
    gc_select_victim, DevRequest, DeviceConfig, DramCache, DramCacheConfig, FlashSsd, Ftl,
    PreconditionConfig,
};
use cxlmemsim::engine::{SimRng, Tick};
use cxlmemsim::host::{Cache, CacheLevelConfig, HostConfig, MemOp, Outcome, Victim};
use cxlmemsim::interconnect::{
    partition_mld, EndpointKind, EndpointSpec, InterconnectError, SwitchSpec, Topology,
    TopologySpec, VhSpec,
};
use cxlmemsim::protocol::{decode_annotation, encode_annotation, Annotation, Bufferability, Determinism};
use cxlmemsim::systems::{System, SystemConfig, SystemKind};
use cxlmemsim::workload::{ApexMap, ApexMapConfig, MixSpec, WorkloadConfig, WorkloadKind};

use crate::Verdict;

const MIB: u64 = 1 << 20;

/// Returns the first failure message of a scripted check.
fn check(id: &'static str, ok_detail: &str, body: impl FnOnce() -> Result<(), String>) -> Vec<Verdict> {
    vec![match body() {
        Ok(()) => Verdict::new(id, true, ok_detail),
        Err(e) => Verdict::new(id, false, e),
    }]
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

pub fn p1_codec() -> Vec<Verdict> {
    check("P1", "9 states round-trip, 1024 field values decode without panic", || {
        let states: Vec<Annotation> = Annotation::all().collect();
        ensure!(states.len() == 9, "{} states", states.len());
        let codes: HashSet<u16> = states.iter().map(|a| encode_annotation(*a)).collect();
        ensure!(codes.len() == 9, "codes collide");
        for a in states {
            ensure!(decode_annotation(encode_annotation(a)) == Ok(a), "{a:?} does not round-trip");
        }
        let mut ok = 0;
        for field in 0..1024u16 {
            let r = std::panic::catch_unwind(|| decode_annotation(field));
            match r {
                Err(_) => return Err(format!("decode panicked on {field:#x}")),
                Ok(Ok(a)) => {
                    ensure!(encode_annotation(a) == field, "{field:#x} decodes to a different code");
                    ok += 1;
                }
                Ok(Err(_)) => {}
            }
        }
        ensure!(ok == 9, "{ok} valid field values");
        Ok(())
    })
}

/// Brute-force LRU over explicit per-set recency lists, most recent first.
struct RefLru {
    sets: u64,
    assoc: usize,
    lists: Vec<Vec<(u64, bool)>>,
}

impl RefLru {
    fn new(sets: u64, assoc: usize) -> Self {
        Self {
            sets,
            assoc,
            lists: vec![Vec::new(); sets as usize],
        }
    }

    /// Hit, or the evicted (key, dirty).
    fn access(&mut self, key: u64, dirty: bool) -> Result<(), Option<(u64, bool)>> {
        let l = &mut self.lists[(key % self.sets) as usize];
        if let Some(pos) = l.iter().position(|e| e.0 == key) {
            let (k, d) = l.remove(pos);
            l.insert(0, (k, d || dirty));
            return Ok(());
        }
        let victim = (l.len() == self.assoc).then(|| l.pop().unwrap());
        l.insert(0, (key, dirty));
        Err(victim)
    }
}

fn host_trial(cfg: &CacheLevelConfig, seed: u64) -> Result<(), String> {
    let mut c: Cache = Cache::new(cfg, 64);
    let mut r = RefLru::new(c.sets() as u64, c.assoc());
    let span = 2 * c.sets() as u64 * c.assoc() as u64;
    let mut rng = SimRng::new(seed);
    for step in 0..10_000 {
        let line = rng.below(span);
        let store = rng.chance(0.3);
        let op = if store { MemOp::Store } else { MemOp::Load };
        let got = c.access(line * 64, op, 0).map_err(|e| e.to_string())?;
        c.complete(line * 64);
        let want = match r.access(line, store) {
            Ok(()) => Outcome::Hit,
            Err(v) => Outcome::Miss {
                victim: v.map(|(l, dirty)| Victim {
                    address: l * 64,
                    dirty,
                    owner: 0,
                }),
            },
        };
        ensure!(got == want, "seed {seed} step {step}: {got:?} != {want:?}");
    }
    Ok(())
}

fn device_trial(pages: u64, assoc: usize, seed: u64) -> Result<(), String> {
    let mut c = DramCache::new(pages, assoc);
    let mut r = RefLru::new(c.sets(), c.assoc());
    let span = 2 * c.capacity_pages();
    let mut rng = SimRng::new(seed);
    for step in 0..10_000 {
        let page = rng.below(span);
        let store = rng.chance(0.3);
        let got = match c.touch(page) {
            Some(_) => {
                if store {
                    c.set_dirty(page, true);
                }
                Ok(())
            }
            None => Err(c.fill(page, Tick::ZERO, store, false).victim.map(|v| (v.page, v.dirty))),
        };
        let want = r.access(page, store);
        ensure!(got == want, "seed {seed} step {step}: {got:?} != {want:?}");
    }
    Ok(())
}

pub fn p2_cache_oracle() -> Vec<Verdict> {
    check("P2", "L1, L2 and device DRAM cache match reference LRU on 100 x 10k traces", || {
        let h = HostConfig::default();
        let d = DeviceConfig::default();
        let pages = d.dram_cache_bytes() / 4096;
        for seed in 0..100 {
            host_trial(&h.l1d, seed).map_err(|e| format!("L1 {e}"))?;
            host_trial(&h.l2, seed).map_err(|e| format!("L2 {e}"))?;
            device_trial(pages, d.dram_cache.assoc as usize, seed).map_err(|e| format!("device {e}"))?;
        }
        Ok(())
    })
}

fn small_ssd() -> FlashSsd {
    FlashSsd::new(DeviceConfig {
        capacity_bytes: 64 * MIB,
        ..Default::default()
    })
    .unwrap()
}

pub fn p3_durability() -> Vec<Verdict> {
    check("P3", "NB survives crash, BF lost without GPF, GPF loses nothing", || {
        let nb = Annotation::new(Determinism::Unannotated, Bufferability::Nb);
        let bf = Annotation::new(Determinism::Unannotated, Bufferability::Bf);
        let load = |s: &mut FlashSsd, at: Tick, a: u64| {
            s.handle(at, &DevRequest::load(a, Annotation::NONE)).map(|r| r.value).map_err(|e| e.to_string())
        };

        let mut s = small_ssd();
        s.handle(Tick::ZERO, &DevRequest::store(0x40, nb, 11)).map_err(|e| e.to_string())?;
        s.crash_drop_volatile();
        ensure!(load(&mut s, Tick::ms(1), 0x40)? == 11, "NB store lost in crash");

        let mut s = small_ssd();
        s.handle(Tick::ZERO, &DevRequest::store(0x40, bf, 12)).map_err(|e| e.to_string())?;
        ensure!(load(&mut s, Tick::ns(100), 0x40)? == 12, "BF store not readable before crash");
        s.crash_drop_volatile();
        ensure!(load(&mut s, Tick::ms(1), 0x40)? == 0, "BF store survived a crash without GPF");

        let mut s = small_ssd();
        for i in 0..32u64 {
            s.handle(Tick::ZERO, &DevRequest::store(i * 4096 + 64, bf, 100 + i))
                .map_err(|e| e.to_string())?;
        }
        let done = s.persist_flush(Tick::ns(10));
        s.crash_drop_volatile();
        for i in 0..32u64 {
            ensure!(load(&mut s, done, i * 4096 + 64)? == 100 + i, "page {i} lost after GPF");
        }
        Ok(())
    })
}

pub fn p4_ftl_gc() -> Vec<Verdict> {
    check("P4", "l2p bijective after 100k writes with forced GC; victim = argmin on 1000 states", || {
        let mut rng = SimRng::new(5);
        let logical = 3_000u64;
        let mut f = Ftl::new(64, 64, 8, logical);
        let mut written = HashSet::new();
        for _ in 0..100_000 {
            while f.free_blocks() <= 2 {
                let v = f.victim().map_err(|e| e.to_string())?;
                let mut from = 0;
                while let Some((i, lpn)) = f.next_valid(v, from) {
                    f.write(lpn).map_err(|e| e.to_string())?;
                    from = i + 1;
                }
                f.erase(v).map_err(|e| e.to_string())?;
            }
            let lpn = rng.below(logical);
            f.write(lpn).map_err(|e| e.to_string())?;
            written.insert(lpn);
        }
        f.check()?;
        let mut seen = HashSet::new();
        for lpn in 0..logical {
            match f.lookup(lpn) {
                Some(ppn) => ensure!(seen.insert(ppn), "ppn {ppn} mapped twice"),
                None => ensure!(!written.contains(&lpn), "lpn {lpn} lost"),
            }
        }
        let valid_total: u64 = (0..f.block_count()).map(|b| f.block(b).valid as u64).sum();
        ensure!(valid_total == seen.len() as u64, "valid counts {valid_total} != mapped {}", seen.len());

        let mut rng = SimRng::new(17);
        for _ in 0..1_000 {
            let n = 1 + rng.below(300) as usize;
            let valid: Vec<u32> = (0..n).map(|_| rng.below(257) as u32).collect();
            let eligible: Vec<bool> = (0..n).map(|_| rng.below(4) != 0).collect();
            let best = (0..n)
                .filter(|&i| eligible[i])
                .min_by_key(|&i| (valid[i], i))
                .map(|i| i as u32);
            ensure!(gc_select_victim(&valid, &eligible).ok() == best, "victim differs from argmin");
        }
        Ok(())
    })
}

pub fn p5_determinism() -> Vec<Verdict> {
    check("P5", "results.csv byte-identical across reruns for all five kinds", || {
        let w = WorkloadConfig {
            kind: WorkloadKind::Mix,
            mix: MixSpec {
                profile: Some("milc".into()),
                count: Some(200_000),
                ..Default::default()
            },
            ..Default::default()
        };
        for k in SystemKind::ALL {
            let csv = || {
                let stream = w.build().unwrap();
                System::new(SystemConfig::new(k)).unwrap().run(&stream).unwrap().csv_string()
            };
            ensure!(csv() == csv(), "{k} differs between runs");
        }
        Ok(())
    })
}

/// KS distance against P(addr < x) = (x / M)^alpha, both sides of each step.
fn ks_distance(mut addrs: Vec<u64>, footprint: u64, alpha: f64) -> f64 {
    addrs.sort_unstable();
    let n = addrs.len() as f64;
    let cdf = |x: u64| (x as f64 / footprint as f64).powf(alpha);
    let mut worst: f64 = 0.0;
    let mut i = 0;
    while i < addrs.len() {
        let x = addrs[i];
        let j = i + addrs[i..].partition_point(|&a| a == x);
        worst = worst.max((i as f64 / n - cdf(x)).abs());
        worst = worst.max((j as f64 / n - cdf(x + 64)).abs());
        i = j;
    }
    worst
}

pub fn p6_apex_distribution() -> Vec<Verdict> {
    let mut worst = (0.0, 0.0);
    for alpha in [0.001, 0.01, 0.1, 0.5, 1.0] {
        let cfg = ApexMapConfig {
            alpha,
            footprint_bytes: 64 * MIB,
            count: 1_000_000,
            seed: 11,
            ..Default::default()
        };
        let addrs: Vec<u64> = ApexMap::new(cfg).unwrap().map(|r| r.address).collect();
        let d = ks_distance(addrs, cfg.footprint_bytes, alpha);
        if d > worst.1 {
            worst = (alpha, d);
        }
    }
    vec![Verdict::new(
        "P6",
        worst.1 < 0.01,
        format!("max KS {:.4} at a={} over 5 alphas, 1M samples (< 0.01)", worst.1, worst.0),
    )]
}

fn two_host_spec(capacity: u64) -> TopologySpec {
    TopologySpec {
        hosts: vec!["a".into(), "b".into()],
        switches: vec![SwitchSpec {
            name: "sw".into(),
            usps: 2,
            dsps: 2,
            lanes_total: 64,
        }],
        endpoints: vec![EndpointSpec {
            name: "ssd".into(),
            kind: EndpointKind::FlashSsd,
            capacity_bytes: capacity,
            mld_count: 2,
        }],
        edges: vec![
            ["a".into(), "sw".into()],
            ["b".into(), "sw".into()],
            ["sw".into(), "ssd".into()],
        ],
        vhs: (0..2)
            .map(|i| VhSpec {
                host: ["a", "b"][i].into(),
                path: vec!["sw".into()],
                endpoint: "ssd".into(),
                mld_index: i as u32,
            })
            .collect(),
    }
}

pub fn p7_isolation() -> Vec<Verdict> {
    check("P7", "2 hosts, 1 switch, 2 MLDs: isolated, capacities sum, k=17 and port budget rejected", || {
        let cap = 64 * MIB;
        let t = Topology::build(&two_host_spec(cap)).map_err(|e| e.to_string())?;
        let sum: u64 = t.partitions(0).iter().map(|p| p.1).sum();
        ensure!(sum == cap, "partitions sum to {sum}");

        let mut dev = small_ssd();
        let maps = [t.address_map(0, 0, 0), t.address_map(1, 0, 0)];
        let [ma, mb] = maps.map(|m| m.unwrap());
        let (ra, rb) = (ma.regions()[0], mb.regions()[0]);
        let mut now = Tick::ZERO;
        for off in (0..ra.size.min(rb.size)).step_by(997 * 64).take(64) {
            let la = ma.resolve(ra.base + off).map_err(|e| e.to_string())?.local;
            let lb = mb.resolve(rb.base + off).map_err(|e| e.to_string())?.local;
            ensure!(la != lb, "offset {off} aliases");
            let nb = Annotation::new(Determinism::Unannotated, Bufferability::Nb);
            now = dev.handle(now, &DevRequest::store(la, nb, off + 1)).map_err(|e| e.to_string())?.done;
            let seen = dev.handle(now, &DevRequest::load(lb, Annotation::NONE)).map_err(|e| e.to_string())?;
            ensure!(seen.value == 0, "host b sees host a's write at offset {off}");
            let own = dev.handle(seen.done, &DevRequest::load(la, Annotation::NONE)).map_err(|e| e.to_string())?;
            ensure!(own.value == off + 1, "host a lost its write at offset {off}");
            now = own.done;
        }
        ensure!(t.find_vh(0, 0, 1).is_err(), "host a bound to b's partition");

        ensure!(
            matches!(partition_mld(cap, 17), Err(InterconnectError::TooManyMlds { .. })),
            "k=17 accepted"
        );
        let mut s = two_host_spec(cap);
        s.endpoints[0].mld_count = 17;
        ensure!(
            matches!(Topology::build(&s), Err(InterconnectError::TooManyMlds { .. })),
            "topology with 17 MLDs accepted"
        );
        let mut s = two_host_spec(cap);
        s.switches[0].usps = 2;
        s.switches[0].dsps = 3;
        ensure!(
            matches!(Topology::build(&s), Err(InterconnectError::PortBudgetExceeded { .. })),
            "80 lanes of ports on a 64-lane switch accepted"
        );
        Ok(())
    })
}

pub fn p8_dt_suppression() -> Vec<Verdict> {
    check("P8", "no all-DT request overlaps a logged GC program or erase while GC is pending", || {
        let mut s = FlashSsd::new(DeviceConfig {
            capacity_bytes: 256 * MIB,
            dram_cache: DramCacheConfig {
                capacity_bytes: Some(MIB),
                ..Default::default()
            },
            precondition: PreconditionConfig {
                fill_fraction: 0.8,
                free_fraction: Some(0.045),
                ..Default::default()
            },
            ..Default::default()
        })
        .map_err(|e| e.to_string())?;
        s.enable_event_log();
        let low = DeviceConfig::default().gc.low_watermark;
        ensure!(s.ftl().free_fraction() < low, "device not under the GC watermark");

        let dt = Annotation::new(Determinism::Dt, Bufferability::Unannotated);
        let mut rng = SimRng::new(8);
        let mut spans = Vec::new();
        let mut t = Tick::ZERO;
        for _ in 0..20_000 {
            let a = rng.below(256 * MIB / 64) * 64;
            let r = s.handle(t, &DevRequest::load(a, dt)).map_err(|e| e.to_string())?;
            spans.push((t, r.done));
            t += Tick::us(1);
        }
        // DT traffic stops; the pending GC should now run.
        s.handle(t + Tick::ms(5), &DevRequest::load(0, Annotation::NONE))
            .map_err(|e| e.to_string())?;
        s.handle(t + Tick::ms(50), &DevRequest::load(0, Annotation::NONE))
            .map_err(|e| e.to_string())?;

        let log = s.event_log().unwrap();
        ensure!(log.rows().iter().any(|r| r.event == "dt_defer"), "GC never deferred");
        let gc_ops: Vec<(Tick, Tick)> = log
            .rows()
            .iter()
            .filter(|r| r.event == "gc_migrate" || r.event == "gc_erase")
            .map(|r| {
                let end = r
                    .detail
                    .split(';')
                    .find_map(|kv| kv.strip_prefix("end_ps="))
                    .and_then(|v| v.parse().ok())
                    .map(Tick);
                (r.tick, end.unwrap_or(r.tick))
            })
            .collect();
        ensure!(!gc_ops.is_empty(), "GC was never pending");
        for &(issue, done) in &spans {
            for &(gs, ge) in &gc_ops {
                ensure!(
                    !(gs < done && issue < ge),
                    "request [{}, {}] overlaps GC op [{}, {}] ps",
                    issue.as_ps(),
                    done.as_ps(),
                    gs.as_ps(),
                    ge.as_ps()
                );
            }
        }
        Ok(())
    })
}
