use cxlmemsim::host::{AccessRecord, MemOp};
use cxlmemsim::workload::{
    read_trace, stream_gen, write_records, ApexMap, ApexMapConfig, MixConfig, MixGen, StreamConfig,
    StreamKernel,
};
use proptest::prelude::*;

/// KS distance between the address sample and P(addr < x) = (x / M)^alpha,
/// evaluated on both sides of every step of the empirical CDF.
fn ks_distance(mut addrs: Vec<u64>, footprint: u64, alpha: f64) -> f64 {
    addrs.sort_unstable();
    let n = addrs.len() as f64;
    let cdf = |x: u64| (x as f64 / footprint as f64).powf(alpha);
    let mut worst: f64 = 0.0;
    let mut i = 0;
    while i < addrs.len() {
        let x = addrs[i];
        let mut j = i;
        while j < addrs.len() && addrs[j] == x {
            j += 1;
        }
        // Just below x, and at x (which covers up to the next line).
        worst = worst.max((i as f64 / n - cdf(x)).abs());
        worst = worst.max((j as f64 / n - cdf(x + 64)).abs());
        i = j;
    }
    worst
}

#[test]
fn apex_ks_under_one_percent() {
    for alpha in [0.001, 0.01, 0.1, 0.5, 1.0] {
        let cfg = ApexMapConfig {
            alpha,
            footprint_bytes: 64 << 20,
            count: 1_000_000,
            seed: 11,
            ..Default::default()
        };
        let addrs: Vec<u64> = ApexMap::new(cfg).unwrap().map(|r| r.address).collect();
        let d = ks_distance(addrs, cfg.footprint_bytes, alpha);
        assert!(d < 0.01, "alpha {alpha}: KS {d}");
    }
}

#[test]
fn mix_fractions_converge() {
    let cfg = MixConfig {
        load_pct: 0.28,
        store_pct: 0.14,
        compute_pct: 0.58,
        count: 1_000_000,
        ..Default::default()
    };
    let mut n = [0u64; 3];
    for r in MixGen::new(cfg).unwrap() {
        n[r.op as usize] += 1;
    }
    let f = |k: usize| n[k] as f64 / 1e6;
    assert!((f(0) - 0.28).abs() < 0.01, "{n:?}");
    assert!((f(1) - 0.14).abs() < 0.01, "{n:?}");
    assert!((f(2) - 0.58).abs() < 0.01, "{n:?}");
}

#[test]
fn zipf_top_eight_functions_dominate() {
    let cfg = MixConfig {
        function_zipf_s: 1.2,
        function_count: 64,
        count: 1_000_000,
        ..Default::default()
    };
    let mut per = vec![0u64; 64];
    let mut total = 0u64;
    for r in MixGen::new(cfg).unwrap().filter(|r| r.is_memory()) {
        per[r.function_id as usize] += 1;
        total += 1;
    }
    per.sort_unstable_by(|a, b| b.cmp(a));
    let top: u64 = per[..8].iter().sum();
    assert!(top as f64 / total as f64 >= 0.5);
}

#[test]
fn stream_arrays_disjoint() {
    for kernel in [StreamKernel::Copy, StreamKernel::Scale, StreamKernel::Add, StreamKernel::Triad] {
        let cfg = StreamConfig {
            kernel,
            elements: 4096,
            threads: 8,
        };
        let size = cfg.elements * 64;
        let streams = stream_gen(&cfg).unwrap();
        let mut touched = [std::collections::HashSet::new(), Default::default(), Default::default()];
        for r in streams.iter().flatten() {
            touched[(r.address / size) as usize].insert(r.address % size);
            assert!(r.address < 3 * size);
        }
        // Every array is indexed by element, never by another array's range.
        for t in &touched {
            assert!(t.is_empty() || t.len() == cfg.elements as usize);
        }
    }
}

fn record() -> impl Strategy<Value = AccessRecord> {
    (0u8..3, 0u64..(1 << 40), any::<u32>()).prop_map(|(op, line, f)| match op {
        0 => AccessRecord::load(line * 64, f),
        1 => AccessRecord::store(line * 64, f),
        _ => AccessRecord::compute(f),
    })
}

proptest! {
    #[test]
    fn trace_round_trip(records in prop::collection::vec(record(), 0..300)) {
        let mut buf = Vec::new();
        write_records(&mut buf, &records).unwrap();
        prop_assert_eq!(read_trace(buf.as_slice()).unwrap(), records);
    }
}

#[test]
fn trace_round_trip_ten_thousand() {
    let cfg = MixConfig {
        count: 10_000,
        ..Default::default()
    };
    let records: Vec<AccessRecord> = MixGen::new(cfg).unwrap().collect();
    let dir = std::env::temp_dir().join(format!("cxlmemsim-trace-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("t.trace");
    cxlmemsim::workload::write_trace(&path, &records).unwrap();
    let back = cxlmemsim::workload::load_trace(&path).unwrap();
    std::fs::remove_dir_all(&dir).unwrap();
    assert_eq!(back, records);
    assert!(back.iter().any(|r| r.op == MemOp::Compute));
}
