//! Acceptance suite: directional reproductions A1-A9 and exact property
//! suites P1-P8, one PASS/FAIL line each.
//!
//! Pass criterion ids as arguments to run a subset, e.g.
//! `cargo test --test acceptance -- A1 P2`.
//!
//! A5 and A7 do not hold in this model (see the notes printed with them).
//! They are reported as FAIL but do not fail the target unless
//! `ACCEPTANCE_STRICT=1` is set. Any other FAIL fails the target.

mod directional;
mod props;

use std::process::ExitCode;
use std::time::Instant;

pub struct Verdict {
    pub id: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(id: &'static str, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            id,
            pass,
            detail: detail.into(),
        }
    }
}

type Group = (&'static [&'static str], fn() -> Vec<Verdict>);

const GROUPS: &[Group] = &[
    (&["A1", "A2", "A3"], directional::apex_sweep),
    (&["A4", "A6"], directional::mix_suite),
    (&["A5"], directional::annotation_gain),
    (&["A7", "A8"], directional::phase_runs),
    (&["A9"], directional::stream_threads),
    (&["P1"], props::p1_codec),
    (&["P2"], props::p2_cache_oracle),
    (&["P3"], props::p3_durability),
    (&["P4"], props::p4_ftl_gc),
    (&["P5"], props::p5_determinism),
    (&["P6"], props::p6_apex_distribution),
    (&["P7"], props::p7_isolation),
    (&["P8"], props::p8_dt_suppression),
];

/// Criteria that do not hold in this model.
const KNOWN_RED: &[&str] = &["A5", "A7"];

fn main() -> ExitCode {
    // Flags cargo's harness protocol may pass through.
    let wanted: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    if std::env::args().any(|a| a == "--list") {
        for (ids, _) in GROUPS {
            for id in *ids {
                println!("{id}: test");
            }
        }
        return ExitCode::SUCCESS;
    }
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let selected: Vec<&Group> = GROUPS
        .iter()
        .filter(|(ids, _)| wanted.is_empty() || ids.iter().any(|id| wanted.iter().any(|w| w == id)))
        .collect();

    let t0 = Instant::now();
    let mut verdicts: Vec<Verdict> = std::thread::scope(|s| {
        let handles: Vec<_> = selected
            .iter()
            .map(|(ids, f)| (ids, s.spawn(f)))
            .collect();
        handles
            .into_iter()
            .flat_map(|(ids, h)| match h.join() {
                Ok(v) => v,
                Err(_) => ids
                    .iter()
                    .map(|id| Verdict::new(id, false, "panicked"))
                    .collect(),
            })
            .collect()
    });
    verdicts.retain(|v| wanted.is_empty() || wanted.iter().any(|w| w == v.id));
    verdicts.sort_by_key(|v| (v.id.as_bytes()[0] == b'P', v.id[1..].parse::<u32>().unwrap_or(0)));

    let mut unexpected = Vec::new();
    let mut red = Vec::new();
    for v in &verdicts {
        println!("{} {} {}", v.id, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        if !v.pass {
            red.push(v.id);
            if strict || !KNOWN_RED.contains(&v.id) {
                unexpected.push(v.id);
            }
        }
    }
    println!(
        "acceptance: {} passed, {} failed ({:.0}s)",
        verdicts.len() - red.len(),
        red.len(),
        t0.elapsed().as_secs_f64()
    );
    if !red.is_empty() {
        println!("red: {}", red.join(" "));
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {}", unexpected.join(" "));
        ExitCode::FAILURE
    }
}
