use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL_APEX: &str = r#"
kind = "cxl_ssd"

[device]
capacity_bytes = 67108864

[workload]
kind = "apexmap"
apexmap = { alpha = 0.5, count = 20000, footprint_bytes = 4194304 }
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cxlmemsim"))
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("exp.toml");
    fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_both_files() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), SMALL_APEX);
    let out = d.path().join("o");
    let o = run(&["run", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.starts_with("req_id,op,issue_ps,complete_ps,latency_ps,annotation,served_by\n"));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    for key in ["latency_mean_ps", "latency_p50_ps", "latency_p99_ps", "latency_p99.9_ps", "latency_p100_ps", "storage_accesses", "l1_hit_ratio", "gc_count"] {
        assert!(summary.contains(key), "{key} missing from summary");
    }
}

#[test]
fn zero_alpha_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), &SMALL_APEX.replace("alpha = 0.5", "alpha = 0.0"));
    let o = run(&["run", "--config", s(&cfg), "--out", s(&d.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("apexmap.alpha"), "{}", stderr(&o));
}

#[test]
fn unparsable_config_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "[host\ncores = 2");
    assert_eq!(run(&["validate", "--config", s(&cfg)]).status.code(), Some(1));
    let missing = d.path().join("nope.toml");
    assert_eq!(run(&["validate", "--config", s(&missing)]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn validate_accepts_good_config() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), SMALL_APEX);
    let o = run(&["validate", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn missing_trace_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "[workload]\nkind = \"trace\"\ntrace = { path = \"absent.trace\" }\n");
    let o = run(&["run", "--config", s(&cfg), "--out", s(&d.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn footprint_past_device_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), &SMALL_APEX.replace("footprint_bytes = 4194304", "footprint_bytes = 134217728"));
    let o = run(&["run", "--config", s(&cfg), "--out", s(&d.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), SMALL_APEX);
    // A regular file where the output directory should go.
    let blocker = d.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = run(&["run", "--config", s(&cfg), "--out", s(&blocker.join("o"))]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn rerun_is_byte_identical_and_needs_force() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), SMALL_APEX);
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    for out in [&a, &b] {
        let o = run(&["run", "--config", s(&cfg), "--out", s(out), "--seed", "42"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    assert_eq!(fs::read(a.join("results.csv")).unwrap(), fs::read(b.join("results.csv")).unwrap());

    let again = run(&["run", "--config", s(&cfg), "--out", s(&a)]);
    assert_eq!(again.status.code(), Some(1));
    assert!(stderr(&again).contains("--force"));
    let forced = run(&["run", "--config", s(&cfg), "--out", s(&a), "--seed", "7", "--force"]);
    assert_eq!(forced.status.code(), Some(0));
    assert_ne!(fs::read(a.join("results.csv")).unwrap(), fs::read(b.join("results.csv")).unwrap());
}

#[test]
fn event_log_written_on_request() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), SMALL_APEX);
    let out = d.path().join("o");
    let o = run(&["run", "--config", s(&cfg), "--out", s(&out), "--event-log"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let ev = fs::read_to_string(out.join("events.csv")).unwrap();
    assert!(ev.starts_with("tick_ps,event,detail\n"));
}

fn sweep_rows(out: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(out.join("sweep.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn alpha_sweep_latency_rises_with_alpha() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), SMALL_APEX);
    let out = d.path().join("o");
    let o = run(&["sweep", "--config", s(&cfg), "--out", s(&out), "--axis", "alpha", "--values", "0.001,0.5,1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let head = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(head.starts_with("axis,value,mean_latency_ps,p999_latency_ps,storage_accesses,total_ticks_ps\n"));
    let rows = sweep_rows(&out);
    assert_eq!(rows.len(), 3);
    let means: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(means.windows(2).all(|w| w[0] <= w[1]), "{means:?}");
    for v in ["0.001", "0.5", "1"] {
        assert!(out.join(format!("results_alpha_{v}.csv")).exists());
    }
}

#[test]
fn dt_sweep_has_five_points() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), &SMALL_APEX.replace("cxl_ssd", "cxl_assd"));
    let out = d.path().join("o");
    let o = run(&["sweep", "--config", s(&cfg), "--out", s(&out), "--axis", "dt-fraction", "--values", "0,0.25,0.5,0.75,1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = sweep_rows(&out);
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r[0] == "dt_fraction"));
}

#[test]
fn threads_sweep_needs_stream() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), &SMALL_APEX.replace("cxl_ssd", "dram"));
    let o = run(&["sweep", "--config", s(&cfg), "--out", s(&d.path().join("o")), "--axis", "threads", "--values", "1,2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("STREAM"), "{}", stderr(&o));
}

#[test]
fn threads_sweep_on_stream() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(
        d.path(),
        "kind = \"cxl_dram\"\n[workload]\nkind = \"stream\"\nstream = { kernel = \"triad\", elements = 4096 }\n",
    );
    let out = d.path().join("o");
    let o = run(&["sweep", "--config", s(&cfg), "--out", s(&out), "--axis", "threads", "--values", "1,2,4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = sweep_rows(&out);
    let t: Vec<u64> = rows.iter().map(|r| r[5].parse().unwrap()).collect();
    assert!(t[2] < t[0], "{t:?}");
}

#[test]
fn bf_sweep_rejected_off_assd() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), SMALL_APEX);
    let o = run(&["sweep", "--config", s(&cfg), "--out", s(&d.path().join("o")), "--axis", "bf-fraction", "--values", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
}

fn compare_rows(out: &Path) -> Vec<(String, u64, f64)> {
    let text = fs::read_to_string(out.join("compare.csv")).unwrap();
    assert!(text.starts_with("kind,total_ticks_ps,ratio_to_baseline\n"));
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn compare_dram_and_pcie() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), SMALL_APEX);
    let out = d.path().join("o");
    let o = run(&["compare", "--config", s(&cfg), "--out", s(&out), "--kinds", "dram,pcie_ssd", "--baseline", "dram"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = compare_rows(&out);
    assert_eq!(rows[0].0, "dram");
    assert_eq!(rows[0].2, 1.0);
    assert_eq!(rows[1].0, "pcie_ssd");
    assert!(rows[1].2 > 1.0);
}

#[test]
fn compare_annotated_on_gc_heavy_mix() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(
        d.path(),
        r#"
[host]
bf_function_fraction = 0.25

[device.precondition]
fill_fraction = 0.8
free_fraction = 0.045
warm_cache_bytes = 16777216

[workload]
kind = "mix"
mix = { profile = "lbm", count = 300000 }
"#,
    );
    let out = d.path().join("o");
    let o = run(&["compare", "--config", s(&cfg), "--out", s(&out), "--kinds", "cxl_ssd,cxl_assd", "--baseline", "cxl_ssd"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = compare_rows(&out);
    assert!(rows[1].2 < 1.0, "{rows:?}");
}

#[test]
fn compare_baseline_must_be_listed() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), SMALL_APEX);
    let out = s(&d.path().join("o")).to_string();
    let o = run(&["compare", "--config", s(&cfg), "--out", &out, "--kinds", "dram,pcie_ssd", "--baseline", "cxl_ssd"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["compare", "--config", s(&cfg), "--out", &out, "--kinds", "dram", "--baseline", "dram"]);
    assert_eq!(o.status.code(), Some(1));
}
