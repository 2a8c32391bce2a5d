use std::fmt::Write as _;
use std::path::Path;

use cxlmemsim::config::ExperimentConfig;
use cxlmemsim::engine::FinalReport;
use cxlmemsim::systems::{System, SystemKind};
use cxlmemsim::workload::{Workload, WorkloadKind};

use crate::output::OutDir;
use crate::{Axis, CliError, Common};

pub const SWEEP_CSV_HEADER: &str =
    "axis,value,mean_latency_ps,p999_latency_ps,storage_accesses,total_ticks_ps";
pub const COMPARE_CSV_HEADER: &str = "kind,total_ticks_ps,ratio_to_baseline";

fn load(c: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        cfg.set_seed(seed);
    }
    if c.event_log {
        cfg.run.event_log = true;
    }
    Ok(cfg)
}

fn build_workload(cfg: &ExperimentConfig) -> Result<Workload, CliError> {
    cfg.workload.build().map_err(|e| CliError::Config(e.to_string()))
}

struct Outcome {
    report: FinalReport,
    events: Option<Vec<u8>>,
}

fn simulate(cfg: &ExperimentConfig, w: &Workload) -> Result<Outcome, CliError> {
    let mut sys = System::new(cfg.system())?;
    let report = sys.run(w)?;
    let events = sys.event_log().map(|log| {
        let mut buf = Vec::new();
        log.write_csv(&mut buf).expect("in-memory write");
        buf
    });
    Ok(Outcome { report, events })
}

fn summary(cfg: &ExperimentConfig, w: &Workload, r: &FinalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "system              {}", cfg.kind);
    let _ = writeln!(s, "workload            {}", w.name);
    let _ = writeln!(s, "seed                {}", cfg.run.seed);
    let _ = write!(s, "{r}");
    s
}

/// Runs `jobs` on up to all available cores, keeping their order.
fn parallel<T: Send>(jobs: Vec<Box<dyn FnOnce() -> T + Send + '_>>) -> Vec<T> {
    let n = std::thread::available_parallelism().map_or(1, |n| n.get()).max(1);
    let mut out = Vec::with_capacity(jobs.len());
    let mut jobs = jobs.into_iter().peekable();
    while jobs.peek().is_some() {
        let batch: Vec<_> = jobs.by_ref().take(n).collect();
        std::thread::scope(|s| {
            let handles: Vec<_> = batch.into_iter().map(|j| s.spawn(j)).collect();
            out.extend(handles.into_iter().map(|h| h.join().expect("simulation thread panicked")));
        });
    }
    out
}

pub fn run(c: &Common) -> Result<(), CliError> {
    let cfg = load(c)?;
    let mut names = vec!["results.csv".to_string(), "summary.txt".to_string()];
    if cfg.run.event_log {
        names.push("events.csv".into());
    }
    let out = OutDir::claim(&c.out, c.force, &names)?;
    let w = build_workload(&cfg)?;
    let o = simulate(&cfg, &w)?;
    out.write("results.csv", o.report.csv_string().as_bytes())?;
    out.write("summary.txt", summary(&cfg, &w, &o.report).as_bytes())?;
    if let Some(ev) = o.events {
        out.write("events.csv", &ev)?;
    }
    log::info!("wrote {}", c.out.display());
    Ok(())
}

fn apply_axis(cfg: &mut ExperimentConfig, axis: Axis, v: f64) -> Result<(), CliError> {
    match axis {
        Axis::Alpha => match cfg.workload.kind {
            WorkloadKind::Apexmap => cfg.workload.apexmap.alpha = v,
            WorkloadKind::Mix => cfg.workload.mix.alpha = Some(v),
            WorkloadKind::Phase => cfg.workload.phase.alpha = v,
            _ => {
                return Err(CliError::Config(
                    "sweep axis alpha applies to apexmap, mix and phase workloads".into(),
                ))
            }
        },
        Axis::DtFraction | Axis::BfFraction => {
            if cfg.kind != SystemKind::CxlAssd {
                return Err(CliError::Config(format!(
                    "sweep axis {} needs kind = \"cxl_assd\", not {}",
                    axis.name(),
                    cfg.kind
                )));
            }
            if axis == Axis::DtFraction {
                cfg.host.dt_target_fraction = Some(v);
            } else {
                cfg.host.bf_function_fraction = v;
            }
        }
        Axis::Threads => {
            if cfg.workload.kind != WorkloadKind::Stream {
                return Err(CliError::Config(
                    "sweep axis threads applies to STREAM workloads only (workload.kind = \"stream\")"
                        .into(),
                ));
            }
            if v < 1.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
                return Err(CliError::Config(format!("threads value {v} is not a positive integer")));
            }
            cfg.workload.stream.threads = v as u32;
        }
    }
    cfg.validate()?;
    Ok(())
}

pub fn sweep(c: &Common, axis: Axis, values: &[f64]) -> Result<(), CliError> {
    let base = load(c)?;
    let mut points = Vec::new();
    for &v in values {
        let mut cfg = base.clone();
        apply_axis(&mut cfg, axis, v)?;
        points.push((v, cfg));
    }
    let stem = |v: f64| format!("{}_{v}", axis.name());
    let mut names = vec!["sweep.csv".to_string()];
    for (v, _) in &points {
        names.push(format!("results_{}.csv", stem(*v)));
        if base.run.event_log {
            names.push(format!("events_{}.csv", stem(*v)));
        }
    }
    let out = OutDir::claim(&c.out, c.force, &names)?;

    let jobs: Vec<Box<dyn FnOnce() -> Result<Outcome, CliError> + Send>> = points
        .iter()
        .map(|(_, cfg)| {
            let cfg = cfg.clone();
            Box::new(move || simulate(&cfg, &build_workload(&cfg)?)) as Box<dyn FnOnce() -> _ + Send>
        })
        .collect();
    let outcomes = parallel(jobs);

    let mut csv = format!("{SWEEP_CSV_HEADER}\n");
    for ((v, _), o) in points.iter().zip(outcomes) {
        let o = o?;
        let r = &o.report;
        out.write(&format!("results_{}.csv", stem(*v)), r.csv_string().as_bytes())?;
        if let Some(ev) = o.events {
            out.write(&format!("events_{}.csv", stem(*v)), &ev)?;
        }
        let p999 = r.summary().map_or(0, |s| s.p999.as_ps());
        let _ = writeln!(
            csv,
            "{},{v},{:.3},{p999},{},{}",
            axis.name(),
            r.mean_latency_ps(),
            r.storage_accesses,
            r.total_ticks.as_ps()
        );
    }
    out.write("sweep.csv", csv.as_bytes())
}

pub fn compare(c: &Common, kinds: &[SystemKind], baseline: SystemKind) -> Result<(), CliError> {
    let mut uniq = kinds.to_vec();
    uniq.sort();
    uniq.dedup();
    if uniq.len() != kinds.len() {
        return Err(CliError::Config("--kinds lists a kind twice".into()));
    }
    if kinds.len() < 2 {
        return Err(CliError::Config("--kinds needs at least two system kinds".into()));
    }
    if !kinds.contains(&baseline) {
        return Err(CliError::Config(format!("baseline {baseline} is not among --kinds")));
    }
    let base = load(c)?;
    let mut names = vec!["compare.csv".to_string()];
    names.extend(kinds.iter().map(|k| format!("results_{k}.csv")));
    let out = OutDir::claim(&c.out, c.force, &names)?;

    let w = build_workload(&base)?;
    let cfgs: Vec<ExperimentConfig> = kinds
        .iter()
        .map(|&k| ExperimentConfig {
            kind: k,
            ..base.clone()
        })
        .collect();
    let jobs: Vec<Box<dyn FnOnce() -> Result<Outcome, CliError> + Send + '_>> = cfgs
        .iter()
        .map(|cfg| Box::new(|| simulate(cfg, &w)) as Box<dyn FnOnce() -> _ + Send + '_>)
        .collect();
    let reports = parallel(jobs)
        .into_iter()
        .map(|o| o.map(|o| o.report))
        .collect::<Result<Vec<_>, _>>()?;

    let b = &reports[kinds.iter().position(|&k| k == baseline).expect("checked")];
    let mut csv = format!("{COMPARE_CSV_HEADER}\n");
    for (k, r) in kinds.iter().zip(&reports) {
        out.write(&format!("results_{k}.csv"), r.csv_string().as_bytes())?;
        let _ = writeln!(csv, "{k},{},{:.6}", r.total_ticks.as_ps(), r.ratio_to(b));
    }
    out.write("compare.csv", csv.as_bytes())
}

pub fn validate(path: &Path) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(path)?;
    System::new(cfg.system())?;
    println!("{}: ok ({} system, {:?} workload)", path.display(), cfg.kind, cfg.workload.kind);
    Ok(())
}
