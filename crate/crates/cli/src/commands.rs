use crate::{BoundsArgs, BuildArgs, CliError, GenArgs, GenKind, SimArgs};
use anyhow::{bail, Context};
use dagsched_core::baselines::SchedulerKind;
use dagsched_core::bounds::{gap, new_lb};
use dagsched_core::construct::{build_schedule, ConstructConfig, PreferredSchedule};
use dagsched_core::dag::validate;
use dagsched_core::gen::{self, random_dag, random_workload, RandomDagParams, WorkloadParams};
use dagsched_core::json::{load_json, to_json_string, JsonError};
use dagsched_core::schedule::PLACEMENT_SCHEMA_VERSION;
use dagsched_core::sim::{percentile, simulate, LaunchRecord, RunMetrics, SimConfig, TaskRun};
use dagsched_core::{ClusterSpec, JobDag, Placement};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

fn load_valid(
    path: &Path,
    machines: usize,
    overbook: bool,
) -> anyhow::Result<(JobDag, ClusterSpec, Option<f64>)> {
    let loaded = match load_json(path) {
        Ok(l) => l,
        Err(e @ JsonError::Io { .. }) => return Err(e.into()),
        Err(e) => {
            return Err(CliError::InvalidDag {
                path: path.display().to_string(),
                report: e.to_string(),
            }
            .into())
        }
    };
    let cluster = ClusterSpec::new(machines, loaded.dag.dims()).with_overbooking(overbook);
    let report = validate(&loaded.dag, &cluster);
    if !report.is_ok() {
        return Err(CliError::InvalidDag {
            path: path.display().to_string(),
            report: report.to_string(),
        }
        .into());
    }
    Ok((loaded.dag, cluster, loaded.runtime))
}

#[derive(Serialize)]
struct PlacementFile<'a> {
    schema_version: u32,
    job: &'a str,
    length: f64,
    placements: &'a [Placement],
}

/// Summary text, placement JSON and the schedule itself.
pub fn build_report(args: &BuildArgs) -> anyhow::Result<(String, String, PreferredSchedule)> {
    let (dag, cluster, _) = load_valid(&args.file, args.machines, !args.no_overbook)?;
    let mut config = ConstructConfig {
        delta: args.delta,
        ..ConstructConfig::default()
    };
    if args.overbook_sweep {
        config = config.with_overbook_sweep();
    }
    let schedule = build_schedule(&dag, &cluster, &config)?;
    let lb = new_lb(&dag, &cluster).new_lb;
    let mut text = String::new();
    writeln!(text, "schedule_length\t{}", schedule.length)?;
    writeln!(text, "new_lb\t{lb}")?;
    writeln!(text, "ratio\t{}", schedule.length / lb)?;
    if args.dump_division {
        for part in &schedule.parts {
            writeln!(text, "{}", serde_json::to_string(part)?)?;
        }
    }
    let json = serde_json::to_string_pretty(&PlacementFile {
        schema_version: PLACEMENT_SCHEMA_VERSION,
        job: &dag.id,
        length: schedule.length,
        placements: &schedule.placements,
    })?;
    Ok((text, json, schedule))
}

pub(crate) fn build(args: &BuildArgs) -> anyhow::Result<()> {
    let (text, json, _) = build_report(args)?;
    let out = args.out.clone().unwrap_or_else(|| {
        let stem = args.file.file_stem().unwrap_or_default().to_string_lossy();
        args.file.with_file_name(format!("{stem}.placements.json"))
    });
    fs::write(&out, json).with_context(|| format!("writing {}", out.display()))?;
    let mut stdout = std::io::stdout().lock();
    write!(stdout, "{text}")?;
    writeln!(stdout, "placements\t{}", out.display())?;
    Ok(())
}

/// One CSV line: a job, or the run summary (`kind = "run"`) after the
/// run's jobs.
#[derive(Serialize, Default)]
struct SimRow<'a> {
    kind: &'a str,
    scheduler: &'a str,
    seed: u64,
    job: Option<&'a str>,
    group: Option<u32>,
    arrival: Option<f64>,
    completion: Option<f64>,
    jct: Option<f64>,
    makespan: Option<f64>,
    median_jct: Option<f64>,
    jain_10: Option<f64>,
    jain_60: Option<f64>,
    jain_240: Option<f64>,
}

pub struct SimReport {
    /// Runs sorted by (scheduler name, seed).
    pub runs: Vec<RunMetrics>,
    pub csv: Vec<u8>,
    pub summary: String,
}

fn workload_params(args: &SimArgs) -> WorkloadParams {
    let base = RandomDagParams::default();
    WorkloadParams {
        jobs: args.jobs,
        arrival_mean: args.arrival_mean,
        groups: args.groups.max(1),
        dag: RandomDagParams {
            min_stages: base.min_stages.min(args.max_stages),
            max_stages: args.max_stages,
            min_tasks: base.min_tasks.min(args.max_tasks),
            max_tasks: args.max_tasks,
            locality: args.locality,
            ..base
        },
    }
}

fn sim_config(args: &SimArgs, scheduler: SchedulerKind, seed: u64) -> SimConfig {
    SimConfig {
        kappa: args.kappa,
        fairness: args.fairness.into(),
        srpt_factor: args.srpt_factor,
        eta_window: args.eta_window,
        heartbeat: args.heartbeat,
        duration_noise: args.noise,
        ready_threshold: args.ready_threshold,
        baseline_overbooking: args.baseline_overbook,
        ..SimConfig::new(scheduler, seed)
    }
}

/// Run every (scheduler, seed) pair and render the CSV rows (with header)
/// and the summary text.
pub fn sim_report(args: &SimArgs, header: bool) -> anyhow::Result<SimReport> {
    if args.scheduler.is_empty() || args.seed.is_empty() {
        bail!("need at least one scheduler and one seed");
    }
    let mut cluster = ClusterSpec::new(args.machines, dagsched_core::resource::DEFAULT_DIMS)
        .with_overbooking(!args.no_overbook);
    cluster.remote_penalty = args.rp;
    let params = workload_params(args);
    let workloads: BTreeMap<u64, Vec<JobDag>> = args
        .seed
        .iter()
        .map(|&s| (s, random_workload(&params, s)))
        .collect();
    let combos: Vec<(SchedulerKind, u64)> = args
        .scheduler
        .iter()
        .flat_map(|k| args.seed.iter().map(move |s| (*k, *s)))
        .collect();
    let mut runs = combos
        .par_iter()
        .map(|&(kind, seed)| simulate(&workloads[&seed], &cluster, &sim_config(args, kind, seed)))
        .collect::<Result<Vec<_>, _>>()?;
    runs.sort_by(|a, b| a.scheduler.cmp(&b.scheduler).then(a.seed.cmp(&b.seed)));

    let mut w = csv::WriterBuilder::new()
        .has_headers(header)
        .from_writer(Vec::new());
    for r in &runs {
        for j in &r.jobs {
            w.serialize(SimRow {
                kind: "job",
                scheduler: &r.scheduler,
                seed: r.seed,
                job: Some(&j.id),
                group: Some(j.group),
                arrival: Some(j.arrival),
                completion: Some(j.completion),
                jct: Some(j.jct),
                ..SimRow::default()
            })?;
        }
        let jain = |w: f64| r.jain.iter().find(|j| j.window == w).map(|j| j.index);
        w.serialize(SimRow {
            kind: "run",
            scheduler: &r.scheduler,
            seed: r.seed,
            makespan: Some(r.makespan),
            median_jct: Some(r.median_jct()),
            jain_10: jain(10.0),
            jain_60: jain(60.0),
            jain_240: jain(240.0),
            ..SimRow::default()
        })?;
    }
    let csv = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
    let summary = summarize(&runs, args.scheduler[0].name());
    Ok(SimReport { runs, csv, summary })
}

fn summarize(runs: &[RunMetrics], reference: &str) -> String {
    let mut s = String::new();
    let _ = write!(s, "scheduler\tseed\tmakespan\tmedian_jct");
    if let Some(r) = runs.first() {
        for j in &r.jain {
            let _ = write!(s, "\tjain@{}", j.window);
        }
    }
    s.push('\n');
    for r in runs {
        let _ = write!(
            s,
            "{}\t{}\t{:.3}\t{:.3}",
            r.scheduler,
            r.seed,
            r.makespan,
            r.median_jct()
        );
        for j in &r.jain {
            let _ = write!(s, "\t{:.3}", j.index);
        }
        s.push('\n');
    }
    let names: Vec<&str> = {
        let mut v: Vec<&str> = runs.iter().map(|r| r.scheduler.as_str()).collect();
        v.dedup();
        v
    };
    if names.len() < 2 {
        return s;
    }
    let _ = writeln!(
        s,
        "\njct improvement of {reference} over\tp25\tp50\tp75\tp90"
    );
    for other in names.iter().filter(|n| **n != reference) {
        let mut gains = Vec::new();
        for base in runs.iter().filter(|r| r.scheduler == *other) {
            let Some(ours) = runs
                .iter()
                .find(|r| r.scheduler == reference && r.seed == base.seed)
            else {
                continue;
            };
            gains.extend(
                base.jobs
                    .iter()
                    .zip(&ours.jobs)
                    .filter(|(b, _)| b.jct > 0.0)
                    .map(|(b, o)| (b.jct - o.jct) / b.jct),
            );
        }
        gains.sort_by(f64::total_cmp);
        let _ = write!(s, "{other}");
        for p in [25.0, 50.0, 75.0, 90.0] {
            let _ = write!(s, "\t{:.1}%", 100.0 * percentile(&gains, p));
        }
        s.push('\n');
    }
    s
}

pub(crate) fn sim(args: &SimArgs) -> anyhow::Result<()> {
    match &args.out {
        Some(path) => {
            let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
            let report = sim_report(args, fresh)?;
            let mut f = fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .with_context(|| format!("opening {}", path.display()))?;
            f.write_all(&report.csv)?;
            std::io::stdout().write_all(report.summary.as_bytes())?;
            write_trace(args, &report)?;
        }
        None => {
            let report = sim_report(args, true)?;
            std::io::stdout().write_all(&report.csv)?;
            eprint!("{}", report.summary);
            write_trace(args, &report)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct Trace<'a> {
    scheduler: &'a str,
    seed: u64,
    launches: &'a [LaunchRecord],
    runs: &'a [TaskRun],
}

fn write_trace(args: &SimArgs, report: &SimReport) -> anyhow::Result<()> {
    let Some(path) = &args.trace else {
        return Ok(());
    };
    let traces: Vec<Trace> = report
        .runs
        .iter()
        .map(|r| Trace {
            scheduler: &r.scheduler,
            seed: r.seed,
            launches: &r.launches,
            runs: &r.runs,
        })
        .collect();
    fs::write(path, serde_json::to_string(&traces)?)
        .with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct BoundRow {
    file: String,
    job: String,
    stages: usize,
    tasks: usize,
    cp_len: f64,
    t_work: f64,
    mod_cp: f64,
    new_lb: f64,
    runtime: Option<f64>,
    gap_cp_len: Option<f64>,
    gap_t_work: Option<f64>,
    gap_new_lb: Option<f64>,
}

/// Bound rows for every `.json` file in `dir`, by file name. Unreadable
/// files are reported in the returned list and skipped.
pub fn bounds_csv(dir: &Path, machines: usize) -> anyhow::Result<(Vec<u8>, Vec<String>)> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let rows: Vec<Result<BoundRow, String>> = files
        .par_iter()
        .map(|path| {
            let (dag, cluster, runtime) =
                load_valid(path, machines, true).map_err(|e| format!("{e:#}"))?;
            let b = new_lb(&dag, &cluster);
            Ok(BoundRow {
                file: path
                    .file_name()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned(),
                job: dag.id.clone(),
                stages: dag.stage_count(),
                tasks: dag.task_count(),
                cp_len: b.cp_len,
                t_work: b.t_work,
                mod_cp: b.mod_cp,
                new_lb: b.new_lb,
                runtime,
                gap_cp_len: runtime.map(|r| gap(r, b.cp_len)),
                gap_t_work: runtime.map(|r| gap(r, b.t_work)),
                gap_new_lb: runtime.map(|r| gap(r, b.new_lb)),
            })
        })
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    // Written explicitly so an empty corpus still gets a header.
    w.write_record([
        "file",
        "job",
        "stages",
        "tasks",
        "cp_len",
        "t_work",
        "mod_cp",
        "new_lb",
        "runtime",
        "gap_cp_len",
        "gap_t_work",
        "gap_new_lb",
    ])?;
    let mut w = {
        let inner = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
        csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(inner)
    };
    let mut errors = Vec::new();
    for row in rows {
        match row {
            Ok(r) => w.serialize(r)?,
            Err(e) => errors.push(e),
        }
    }
    Ok((w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?, errors))
}

pub(crate) fn bounds(args: &BoundsArgs) -> anyhow::Result<()> {
    let (csv, errors) = bounds_csv(&args.dir, args.machines)?;
    for e in &errors {
        eprintln!("skipped: {e}");
    }
    match &args.out {
        Some(p) => fs::write(p, &csv).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(&csv)?,
    }
    if !errors.is_empty() {
        return Err(CliError::PartialCorpus(errors.len()).into());
    }
    Ok(())
}

fn generate(args: &GenArgs, seed: u64) -> anyhow::Result<JobDag> {
    Ok(match args.kind {
        GenKind::TwoChain => gen::two_chain_example(args.eps),
        GenKind::BoundExample => gen::bound_example(args.eps),
        GenKind::CpAdv => gen::cp_adversarial(args.n, args.eps)?,
        GenKind::PackerAdv => gen::packer_adversarial(args.d, args.eps)?,
        GenKind::Blind => gen::structure_blind(args.d, args.k)?,
        GenKind::Random => {
            random_dag(&RandomDagParams::default(), seed).with_id(format!("random{seed}"))
        }
    })
}

pub(crate) fn gen(args: &GenArgs) -> anyhow::Result<()> {
    if args.count > 1 {
        let Some(dir) = &args.out else {
            bail!("--count above 1 needs --out DIR");
        };
        fs::create_dir_all(dir)?;
        for i in 0..args.count as u64 {
            let seed = args.seed + i;
            let dag = generate(args, seed)?;
            fs::write(
                dir.join(format!("{}.json", dag.id)),
                to_json_string(&dag, None),
            )?;
        }
        return Ok(());
    }
    let text = to_json_string(&generate(args, args.seed)?, None);
    match &args.out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => writeln!(std::io::stdout(), "{text}")?,
    }
    Ok(())
}
