//! Deterministic event-driven cluster simulator.
//!
//! Jobs arrive over time; whenever tasks finish or jobs arrive, machines
//! with room are matched against runnable tasks by the selected scheduler.
//! Fungible dimensions may be overbooked, in which case every task using
//! an overloaded dimension slows down and its completion is re-keyed.

pub mod fairness;
pub mod metrics;
pub mod scores;

pub use fairness::{jain_index, Deficits, Fairness};
pub use metrics::{percentile, JobResult, LaunchRecord, RunMetrics, TaskRun};

use crate::baselines::{coffman_graham_labels, strip_levels, FitMode, SchedulerKind};
use crate::cluster::ClusterSpec;
use crate::construct::{build_schedule, ConstructConfig, ConstructError};
use crate::dag::{validate, JobDag, StageId, TaskId};
use crate::resource::{ResourceVector, TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use scores::{earliest_fit_time, forecast, hard_fits, o_score_given, p_score, rate_for, Occupant};
use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("simulation passed the time limit {0}")]
    Timeout(f64),
    #[error("job {job} is invalid: {report}")]
    Invalid { job: String, report: String },
    #[error(transparent)]
    Construct(#[from] ConstructError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub scheduler: SchedulerKind,
    pub seed: u64,
    /// Unfairness tolerance; the gate opens at `kappa * machines`.
    pub kappa: f64,
    pub fairness: Fairness,
    /// Multiplier in the remaining-work weight; 0 disables the bias.
    pub srpt_factor: f64,
    /// Launches between recomputations of the remaining-work weight.
    pub eta_window: usize,
    /// Fraction of parents that must finish before a task may run.
    pub ready_threshold: f64,
    /// Match only on periodic ticks of this length instead of on events.
    pub heartbeat: Option<f64>,
    /// Relative spread of actual durations around the profiled ones.
    pub duration_noise: f64,
    /// Let baseline schedulers overbook fungible dimensions too.
    pub baseline_overbooking: bool,
    pub max_time: f64,
    pub jain_windows: Vec<f64>,
    pub construct: ConstructConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            scheduler: SchedulerKind::Graphene,
            seed: 0,
            kappa: 0.1,
            fairness: Fairness::Slot,
            srpt_factor: 0.2,
            eta_window: 50,
            ready_threshold: 1.0,
            heartbeat: None,
            duration_noise: 0.0,
            baseline_overbooking: false,
            max_time: 1e9,
            jain_windows: vec![10.0, 60.0, 240.0],
            construct: ConstructConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn new(scheduler: SchedulerKind, seed: u64) -> Self {
        Self {
            scheduler,
            seed,
            ..Self::default()
        }
    }
}

/// Per-job priority scores from the offline constructor.
pub fn preferred_priorities(
    workload: &[JobDag],
    cluster: &ClusterSpec,
    config: &ConstructConfig,
) -> Result<Vec<Vec<f64>>, ConstructError> {
    workload
        .par_iter()
        .map(|dag| build_schedule(dag, cluster, config).map(|s| s.pri_score))
        .collect()
}

/// Run the workload; for the graphene scheduler priorities are built first.
pub fn simulate(
    workload: &[JobDag],
    cluster: &ClusterSpec,
    config: &SimConfig,
) -> Result<RunMetrics, SimError> {
    let pri = if config.scheduler == SchedulerKind::Graphene {
        Some(preferred_priorities(workload, cluster, &config.construct)?)
    } else {
        None
    };
    simulate_with(workload, cluster, config, pri)
}

/// Run the workload with given per-job priorities (all 1 when `None`).
pub fn simulate_with(
    workload: &[JobDag],
    cluster: &ClusterSpec,
    config: &SimConfig,
    priorities: Option<Vec<Vec<f64>>>,
) -> Result<RunMetrics, SimError> {
    for dag in workload {
        let report = validate(dag, cluster);
        if !report.is_ok() {
            return Err(SimError::Invalid {
                job: dag.id.clone(),
                report: report.to_string(),
            });
        }
    }
    let mut engine = Engine::new(workload, cluster, config, priorities);
    engine.run()?;
    Ok(engine.finish())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum TaskState {
    Blocked,
    Ready,
    Running,
    Done,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum EventKind {
    Arrival(usize),
    Finish { run: usize, version: u64 },
    Tick,
}

#[derive(Clone, Copy, Debug)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct JobRun<'a> {
    dag: &'a JobDag,
    arrived: bool,
    done: bool,
    state: Vec<TaskState>,
    parents_done: Vec<usize>,
    need: Vec<usize>,
    ready: BTreeSet<TaskId>,
    pending: usize,
    pending_work: f64,
    left: usize,
    completion: f64,
    pri: Vec<f64>,
    actual: Vec<f64>,
    cp: Vec<f64>,
    depth: Vec<usize>,
    cg: Vec<usize>,
    level: Vec<usize>,
    level_left: Vec<usize>,
}

impl JobRun<'_> {
    fn current_level(&self) -> usize {
        self.level_left
            .iter()
            .position(|n| *n > 0)
            .unwrap_or(usize::MAX)
    }
}

struct Run {
    job: usize,
    task: TaskId,
    machine: usize,
    demand: ResourceVector,
    /// Seconds of work left at full rate.
    remaining: f64,
    /// Profiled over actual duration, to turn remaining work into the
    /// scheduler's estimate.
    estimate_ratio: f64,
    rate: f64,
    since: f64,
    start: f64,
    version: u64,
}

#[derive(Default)]
struct MachineRun {
    runs: Vec<usize>,
    used: ResourceVector,
}

struct Engine<'a> {
    cluster: &'a ClusterSpec,
    cfg: &'a SimConfig,
    jobs: Vec<JobRun<'a>>,
    machines: Vec<MachineRun>,
    runs: Vec<Option<Run>>,
    heap: BinaryHeap<Reverse<Event>>,
    seq: u64,
    now: f64,
    deficits: Deficits,
    live_per_group: BTreeMap<u32, usize>,
    eta: f64,
    eta_score_sum: f64,
    eta_launches: usize,
    rng: ChaCha8Rng,
    unfinished: usize,
    launches: Vec<LaunchRecord>,
    finished_runs: Vec<TaskRun>,
    /// Per-machine forecasts for the current matching pass.
    forecast_cache: Vec<Option<(Vec<Occupant>, Vec<f64>)>>,
}

impl<'a> Engine<'a> {
    fn new(
        workload: &'a [JobDag],
        cluster: &'a ClusterSpec,
        cfg: &'a SimConfig,
        priorities: Option<Vec<Vec<f64>>>,
    ) -> Self {
        let kind = cfg.scheduler;
        let mut pri = priorities.map(|p| p.into_iter());
        let jobs = workload
            .iter()
            .enumerate()
            .map(|(j, dag)| {
                let n = dag.task_count();
                let need: Vec<usize> = dag
                    .task_ids()
                    .map(|t| {
                        let p = dag.parents(t).len();
                        ((p as f64 * cfg.ready_threshold).ceil() as usize).min(p)
                    })
                    .collect();
                let mut noise = ChaCha8Rng::seed_from_u64(
                    cfg.seed ^ (j as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
                );
                let actual = dag
                    .tasks()
                    .iter()
                    .map(|t| {
                        if cfg.duration_noise > 0.0 {
                            let k = 1.0 + cfg.duration_noise * noise.random_range(-1.0..=1.0);
                            (t.duration * k).max(1e-6)
                        } else {
                            t.duration
                        }
                    })
                    .collect();
                let level = if kind == SchedulerKind::StripPart {
                    strip_levels(dag)
                } else {
                    vec![0; n]
                };
                let mut level_left = vec![0; level.iter().copied().max().map_or(0, |m| m + 1)];
                for &l in &level {
                    level_left[l] += 1;
                }
                JobRun {
                    dag,
                    arrived: false,
                    done: false,
                    state: vec![TaskState::Blocked; n],
                    parents_done: vec![0; n],
                    need,
                    ready: BTreeSet::new(),
                    pending: n,
                    pending_work: dag.tasks().iter().map(|t| t.duration * t.demand.l1()).sum(),
                    left: n,
                    completion: dag.arrival,
                    pri: pri
                        .as_mut()
                        .and_then(|p| p.next())
                        .unwrap_or_else(|| vec![1.0; n]),
                    actual,
                    cp: if matches!(kind, SchedulerKind::Cp | SchedulerKind::CpBackfill) {
                        dag.bottom_levels()
                    } else {
                        Vec::new()
                    },
                    depth: if kind == SchedulerKind::Bfs {
                        let d = dag.stage_depths();
                        dag.tasks().iter().map(|t| d[t.stage.0]).collect()
                    } else {
                        Vec::new()
                    },
                    cg: if kind == SchedulerKind::CoffmanGraham {
                        coffman_graham_labels(dag)
                    } else {
                        Vec::new()
                    },
                    level,
                    level_left,
                }
            })
            .collect();
        let dims = cluster.dims();
        Self {
            cluster,
            cfg,
            jobs,
            machines: (0..cluster.machines)
                .map(|_| MachineRun {
                    runs: Vec::new(),
                    used: ResourceVector::zeros(dims),
                })
                .collect(),
            runs: Vec::new(),
            heap: BinaryHeap::new(),
            seq: 0,
            now: 0.0,
            deficits: Deficits::default(),
            live_per_group: BTreeMap::new(),
            eta: 0.0,
            eta_score_sum: 0.0,
            eta_launches: 0,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            unfinished: workload.len(),
            launches: Vec::new(),
            finished_runs: Vec::new(),
            forecast_cache: vec![None; cluster.machines],
        }
    }

    fn push(&mut self, time: f64, kind: EventKind) {
        self.seq += 1;
        self.heap.push(Reverse(Event {
            time,
            seq: self.seq,
            kind,
        }));
    }

    fn run(&mut self) -> Result<(), SimError> {
        for j in 0..self.jobs.len() {
            let t = self.jobs[j].dag.arrival;
            self.push(t, EventKind::Arrival(j));
        }
        if let Some(h) = self.cfg.heartbeat {
            let first = self
                .jobs
                .iter()
                .map(|j| j.dag.arrival)
                .fold(f64::INFINITY, f64::min);
            if first.is_finite() {
                self.push(first, EventKind::Tick);
            }
            debug_assert!(h > 0.0);
        }
        while let Some(Reverse(ev)) = self.heap.pop() {
            if ev.time > self.cfg.max_time {
                return Err(SimError::Timeout(self.cfg.max_time));
            }
            self.now = ev.time;
            let mut tick = self.handle(ev);
            while let Some(Reverse(next)) = self.heap.peek() {
                if next.time > self.now + 1e-12 {
                    break;
                }
                let next = self.heap.pop().expect("peeked").0;
                tick |= self.handle(next);
            }
            match self.cfg.heartbeat {
                None => self.schedule(),
                Some(h) if tick => {
                    self.schedule();
                    if self.unfinished > 0 {
                        self.push(self.now + h, EventKind::Tick);
                    }
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// Returns true for a heartbeat tick.
    fn handle(&mut self, ev: Event) -> bool {
        match ev.kind {
            EventKind::Arrival(j) => {
                self.arrive(j);
                false
            }
            EventKind::Finish { run, version } => {
                if self.runs[run]
                    .as_ref()
                    .is_some_and(|r| r.version == version)
                {
                    self.complete(run);
                }
                false
            }
            EventKind::Tick => true,
        }
    }

    fn arrive(&mut self, j: usize) {
        let group = self.jobs[j].dag.group;
        let job = &mut self.jobs[j];
        job.arrived = true;
        if job.left == 0 {
            job.done = true;
            job.completion = self.now;
            self.unfinished -= 1;
            return;
        }
        for t in 0..job.state.len() {
            if job.need[t] == 0 {
                job.state[t] = TaskState::Ready;
                job.ready.insert(TaskId(t));
            }
        }
        let live = self.live_per_group.entry(group).or_insert(0);
        *live += 1;
        if *live == 1 {
            self.deficits.activate(group);
        }
    }

    fn advance(&mut self, m: usize) {
        let now = self.now;
        for &r in &self.machines[m].runs {
            let run = self.runs[r].as_mut().expect("live run");
            run.remaining = (run.remaining - run.rate * (now - run.since)).max(0.0);
            run.since = now;
        }
    }

    /// Recompute progress rates on `m` and re-key its completion events.
    fn rekey(&mut self, m: usize) {
        let load = self.machines[m].used.clone();
        let ids = self.machines[m].runs.clone();
        for r in ids {
            let (time, version) = {
                let run = self.runs[r].as_mut().expect("live run");
                run.rate = rate_for(
                    &run.demand,
                    &load,
                    &self.cluster.capacity,
                    &self.cluster.overbooking,
                );
                run.version += 1;
                (self.now + run.remaining / run.rate, run.version)
            };
            self.push(time, EventKind::Finish { run: r, version });
        }
    }

    fn complete(&mut self, r: usize) {
        let m = self.runs[r].as_ref().expect("live run").machine;
        self.advance(m);
        let run = self.runs[r].take().expect("live run");
        let machine = &mut self.machines[m];
        machine.runs.retain(|x| *x != r);
        machine.used.sub_assign(&run.demand);
        for v in 0..machine.used.dims() {
            if machine.used.get(v).abs() < TOL {
                machine.used.set(v, 0.0);
            }
        }
        let job = &mut self.jobs[run.job];
        let group = job.dag.group;
        self.finished_runs.push(TaskRun {
            job: run.job,
            group,
            task: run.task,
            machine: m,
            start: run.start,
            end: self.now,
            weight: run.demand.max_entry(),
        });
        job.state[run.task.0] = TaskState::Done;
        job.left -= 1;
        let lvl = job.level[run.task.0];
        job.level_left[lvl] -= 1;
        for &c in job.dag.children(run.task) {
            job.parents_done[c.0] += 1;
            if job.state[c.0] == TaskState::Blocked && job.parents_done[c.0] >= job.need[c.0] {
                job.state[c.0] = TaskState::Ready;
                job.ready.insert(c);
            }
        }
        if job.left == 0 {
            job.done = true;
            job.completion = self.now;
            self.unfinished -= 1;
            let live = self.live_per_group.get_mut(&group).expect("live group");
            *live -= 1;
            if *live == 0 {
                self.live_per_group.remove(&group);
                self.deficits.deactivate(group);
            }
        }
        self.rekey(m);
    }

    fn avail(&self, m: usize) -> ResourceVector {
        self.cluster
            .capacity
            .minus(&self.machines[m].used)
            .clamp_nonneg()
    }

    fn fits_on(&self, m: usize, demand: &ResourceVector, mode: FitMode) -> bool {
        mode.fits(demand, &self.avail(m))
    }

    fn penalty(&self, j: usize, t: TaskId, m: usize) -> f64 {
        let spec = self.jobs[j].dag.task(t);
        if spec.locality_sensitive && (j + t.0) % self.cluster.machines != m {
            self.cluster.remote_penalty
        } else {
            1.0
        }
    }

    fn leader(&self) -> Option<(u32, f64)> {
        let eligible: BTreeSet<u32> = self
            .jobs
            .iter()
            .filter(|j| j.arrived && !j.done && !j.ready.is_empty())
            .map(|j| j.dag.group)
            .collect();
        self.deficits.max_among(eligible.into_iter())
    }

    fn launch(&mut self, j: usize, t: TaskId, m: usize, fits: bool, score: f64) {
        let (leader, leader_deficit) = match self.leader() {
            Some((g, d)) => (Some(g), d),
            None => (None, 0.0),
        };
        let max_deficit = self
            .deficits
            .groups()
            .map(|(_, d)| d)
            .fold(f64::NEG_INFINITY, f64::max);
        self.advance(m);
        let job = &mut self.jobs[j];
        let spec = job.dag.task(t);
        let group = job.dag.group;
        job.state[t.0] = TaskState::Running;
        job.ready.remove(&t);
        job.pending -= 1;
        job.pending_work = (job.pending_work - spec.duration * spec.demand.l1()).max(0.0);
        let demand = spec.demand.clone();
        let actual = job.actual[t.0];
        self.runs.push(Some(Run {
            job: j,
            task: t,
            machine: m,
            demand: demand.clone(),
            remaining: actual,
            estimate_ratio: spec.duration / actual,
            rate: 1.0,
            since: self.now,
            start: self.now,
            version: 0,
        }));
        let r = self.runs.len() - 1;
        self.machines[m].runs.push(r);
        self.machines[m].used.add_assign(&demand);
        self.forecast_cache[m] = None;
        self.rekey(m);
        self.deficits
            .record(group, self.cfg.fairness.weight(&demand));
        self.launches.push(LaunchRecord {
            time: self.now,
            job: j,
            group,
            task: t,
            machine: m,
            fits,
            leader,
            leader_deficit,
            max_deficit: if max_deficit.is_finite() {
                max_deficit
            } else {
                0.0
            },
        });
        if fits {
            self.eta_score_sum += score;
        }
        self.eta_launches += 1;
        if self.eta_launches >= self.cfg.eta_window.max(1) {
            let waiting: Vec<f64> = self
                .jobs
                .iter()
                .filter(|j| j.arrived && !j.done && j.pending > 0)
                .map(|j| j.pending_work)
                .collect();
            let avg_work = waiting.iter().sum::<f64>() / waiting.len().max(1) as f64;
            let avg_score = self.eta_score_sum / self.eta_launches as f64;
            self.eta = if avg_work > 0.0 {
                self.cfg.srpt_factor * avg_score / avg_work
            } else {
                0.0
            };
            self.eta_score_sum = 0.0;
            self.eta_launches = 0;
        }
    }

    fn schedule(&mut self) {
        self.forecast_cache.iter_mut().for_each(|f| *f = None);
        match self.cfg.scheduler {
            SchedulerKind::Graphene => {
                for m in 0..self.machines.len() {
                    self.match_machine(m);
                }
            }
            SchedulerKind::Cp => self.list_dispatch(true),
            SchedulerKind::CpBackfill | SchedulerKind::Bfs | SchedulerKind::CoffmanGraham => {
                self.list_dispatch(false)
            }
            SchedulerKind::Tetris | SchedulerKind::StripPart => self.packer_dispatch(FitMode::All),
            SchedulerKind::TetrisCpuMem => self.packer_dispatch(FitMode::CpuMem),
            SchedulerKind::Random => self.random_dispatch(),
        }
        if self.cfg.scheduler != SchedulerKind::Graphene && self.cfg.baseline_overbooking {
            self.baseline_overbook();
        }
    }

    fn live_jobs(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.jobs.len()).filter(|j| {
            let job = &self.jobs[*j];
            job.arrived && !job.done && !job.ready.is_empty()
        })
    }

    /// Runnable tasks in the current baseline's priority order.
    fn ordered_ready(&self) -> Vec<(usize, TaskId)> {
        let mut out: Vec<(usize, TaskId)> = Vec::new();
        for j in self.live_jobs() {
            let job = &self.jobs[j];
            let level = job.current_level();
            out.extend(
                job.ready
                    .iter()
                    .filter(|t| {
                        self.cfg.scheduler != SchedulerKind::StripPart || job.level[t.0] == level
                    })
                    .map(|t| (j, *t)),
            );
        }
        match self.cfg.scheduler {
            SchedulerKind::Cp | SchedulerKind::CpBackfill => out.sort_by(|a, b| {
                let (ca, cb) = (self.jobs[a.0].cp[a.1 .0], self.jobs[b.0].cp[b.1 .0]);
                cb.total_cmp(&ca).then(a.cmp(b))
            }),
            SchedulerKind::Bfs => out.sort_by_key(|&(j, t)| {
                let job = &self.jobs[j];
                (j, job.depth[t.0], job.dag.task(t).stage, t)
            }),
            SchedulerKind::CoffmanGraham => {
                out.sort_by_key(|&(j, t)| (j, Reverse(self.jobs[j].cg[t.0]), t))
            }
            _ => {}
        }
        out
    }

    fn first_fit(&self, demand: &ResourceVector, mode: FitMode) -> Option<usize> {
        (0..self.machines.len()).find(|m| self.fits_on(*m, demand, mode))
    }

    fn list_dispatch(&mut self, strict: bool) {
        for (j, t) in self.ordered_ready() {
            let demand = self.jobs[j].dag.task(t).demand.clone();
            match self.first_fit(&demand, FitMode::All) {
                Some(m) => self.launch(j, t, m, true, 0.0),
                None if strict => break,
                None => {}
            }
        }
    }

    fn packer_dispatch(&mut self, mode: FitMode) {
        loop {
            let mut best: Option<(f64, usize, TaskId, usize)> = None;
            let avail: Vec<ResourceVector> =
                (0..self.machines.len()).map(|m| self.avail(m)).collect();
            for (j, t) in self.ordered_ready() {
                let demand = &self.jobs[j].dag.task(t).demand;
                for (m, a) in avail.iter().enumerate() {
                    if !mode.fits(demand, a) {
                        continue;
                    }
                    let score = demand.dot(a);
                    if best.is_none_or(|b| score > b.0 + TOL) {
                        best = Some((score, j, t, m));
                    }
                }
            }
            let Some((score, j, t, m)) = best else { break };
            self.launch(j, t, m, true, score);
        }
    }

    fn random_dispatch(&mut self) {
        loop {
            let fitting: Vec<(usize, TaskId, usize)> = self
                .ordered_ready()
                .into_iter()
                .filter_map(|(j, t)| {
                    self.first_fit(&self.jobs[j].dag.task(t).demand, FitMode::All)
                        .map(|m| (j, t, m))
                })
                .collect();
            if fitting.is_empty() {
                break;
            }
            let (j, t, m) = fitting[self.rng.random_range(0..fitting.len())];
            self.launch(j, t, m, true, 0.0);
        }
    }

    fn occupants(&self, m: usize) -> Vec<Occupant> {
        self.machines[m]
            .runs
            .iter()
            .map(|r| {
                let run = self.runs[*r].as_ref().expect("live run");
                let elapsed = self.now - run.since;
                Occupant {
                    work: (run.remaining - run.rate * elapsed).max(0.0) * run.estimate_ratio,
                    demand: run.demand.clone(),
                }
            })
            .collect()
    }

    fn machine_forecast(&self, m: usize) -> (Vec<Occupant>, Vec<f64>) {
        let occ = self.occupants(m);
        let fin = forecast(
            self.now,
            &occ,
            &self.cluster.capacity,
            &self.cluster.overbooking,
        );
        (occ, fin)
    }

    /// Fill in forecasts dropped by launches since the last call.
    fn refresh_forecasts(&mut self) {
        for m in 0..self.machines.len() {
            if self.forecast_cache[m].is_none() {
                self.forecast_cache[m] = Some(self.machine_forecast(m));
            }
        }
    }

    /// Earliest time `demand` fits without overbooking on any machine.
    /// Needs fresh forecasts.
    fn next_opportunity(&self, demand: &ResourceVector) -> f64 {
        self.forecast_cache
            .iter()
            .map(|f| {
                let (occ, fin) = f.as_ref().expect("forecasts refreshed");
                earliest_fit_time(self.now, occ, fin, demand, &self.cluster.capacity)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Overbooking score of `(j, t)` on `m`. Needs fresh forecasts.
    fn overbook_score(&self, j: usize, t: TaskId, m: usize) -> f64 {
        let spec = self.jobs[j].dag.task(t);
        let (occ, fin) = self.forecast_cache[m]
            .as_ref()
            .expect("forecasts refreshed");
        if !hard_fits(
            &spec.demand,
            occ,
            &self.cluster.capacity,
            &self.cluster.overbooking,
        ) {
            return 0.0;
        }
        let next = self.next_opportunity(&spec.demand);
        o_score_given(
            self.now,
            spec.duration,
            &spec.demand,
            occ,
            fin,
            next,
            &self.cluster.capacity,
            &self.cluster.overbooking,
        )
    }

    fn baseline_overbook(&mut self) {
        if !self.cluster.overbooking.enabled {
            return;
        }
        for m in 0..self.machines.len() {
            loop {
                self.refresh_forecasts();
                let pick = self
                    .ordered_ready()
                    .into_iter()
                    .find(|&(j, t)| self.overbook_score(j, t, m) > 0.0);
                match pick {
                    Some((j, t)) => self.launch(j, t, m, false, 0.0),
                    None => break,
                }
            }
        }
    }

    /// Launch as many tasks on machine `m` as the matcher allows.
    fn match_machine(&mut self, m: usize) {
        let gate = self.cfg.kappa * self.cluster.machines as f64;
        loop {
            let restrict = match self.leader() {
                Some((g, d)) if d >= gate => Some(g),
                _ => None,
            };
            let avail = self.avail(m);
            let mut best: Option<(f64, usize, TaskId, f64)> = None;
            for j in self.live_jobs() {
                let job = &self.jobs[j];
                if restrict.is_some_and(|g| g != job.dag.group) {
                    continue;
                }
                let bias = self.eta * job.pending_work;
                for &t in &job.ready {
                    let spec = job.dag.task(t);
                    if !spec.demand.fits_within(&avail) {
                        continue;
                    }
                    let p = p_score(&spec.demand, &avail, self.penalty(j, t, m));
                    let value = job.pri[t.0] * p - bias;
                    if best.is_none_or(|b| value > b.0 + 1e-12) {
                        best = Some((value, j, t, p));
                    }
                }
            }
            if let Some((_, j, t, p)) = best {
                self.launch(j, t, m, true, p);
                continue;
            }
            if !self.cluster.overbooking.enabled {
                break;
            }
            self.refresh_forecasts();
            let mut best: Option<(f64, usize, TaskId)> = None;
            for j in self.live_jobs() {
                let job = &self.jobs[j];
                if restrict.is_some_and(|g| g != job.dag.group) {
                    continue;
                }
                // Tasks of a stage score alike; only the highest priority one matters.
                let mut per_stage: BTreeMap<StageId, TaskId> = BTreeMap::new();
                for &t in &job.ready {
                    let stage = job.dag.task(t).stage;
                    let keep = per_stage
                        .get(&stage)
                        .is_some_and(|k| job.pri[k.0] >= job.pri[t.0]);
                    if !keep {
                        per_stage.insert(stage, t);
                    }
                }
                for t in per_stage.into_values() {
                    let o = self.overbook_score(j, t, m);
                    if o <= 0.0 {
                        continue;
                    }
                    let value = job.pri[t.0] * o - self.eta * job.pending_work;
                    if best.is_none_or(|b| value > b.0 + 1e-12) {
                        best = Some((value, j, t));
                    }
                }
            }
            match best {
                Some((_, j, t)) => self.launch(j, t, m, false, 0.0),
                None => break,
            }
        }
    }

    fn finish(self) -> RunMetrics {
        let jobs: Vec<JobResult> = self
            .jobs
            .iter()
            .map(|j| JobResult {
                id: j.dag.id.clone(),
                group: j.dag.group,
                arrival: j.dag.arrival,
                completion: j.completion,
                jct: j.completion - j.dag.arrival,
            })
            .collect();
        let makespan = jobs.iter().map(|j| j.completion).fold(0.0, f64::max);
        let jain = self
            .cfg
            .jain_windows
            .iter()
            .map(|&w| metrics::JainWindow {
                window: w,
                index: metrics::windowed_jain(&jobs, &self.finished_runs, w, makespan),
            })
            .collect();
        RunMetrics {
            scheduler: self.cfg.scheduler.name().to_string(),
            seed: self.cfg.seed,
            jobs,
            makespan,
            jain,
            launches: self.launches,
            runs: self.finished_runs,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::DagBuilder;

    fn overbook_case(machines: usize, enabled: bool) -> RunMetrics {
        let mut b = DagBuilder::new("ob");
        b.uniform_stage("x", 2, 1.0, [0.1, 0.1, 0.6, 0.0]);
        let dag = b.build();
        let cluster = ClusterSpec::new(machines, 4).with_overbooking(enabled);
        simulate_with(
            &[dag],
            &cluster,
            &SimConfig::new(SchedulerKind::Graphene, 0),
            None,
        )
        .unwrap()
    }

    #[test]
    fn overbooking_pays_off_on_one_machine() {
        let on = overbook_case(1, true);
        assert!((on.makespan - 1.2).abs() < 1e-9, "{}", on.makespan);
        let off = overbook_case(1, false);
        assert!((off.makespan - 2.0).abs() < 1e-9);
    }

    #[test]
    fn overbooking_declined_with_idle_machine() {
        let two = overbook_case(2, true);
        assert!((two.makespan - 1.0).abs() < 1e-9);
        assert!(two.launches.iter().all(|l| l.fits));
    }

    #[test]
    fn same_seed_same_metrics() {
        let jobs = crate::gen::random_workload(&crate::gen::WorkloadParams::default(), 3);
        let c = ClusterSpec::new(3, 4);
        let cfg = SimConfig::new(SchedulerKind::Random, 9);
        assert_eq!(
            simulate(&jobs, &c, &cfg).unwrap(),
            simulate(&jobs, &c, &cfg).unwrap()
        );
    }

    #[test]
    fn chain_runs_in_order() {
        let mut b = DagBuilder::new("c");
        let a = b.uniform_stage("a", 1, 1.0, [0.5]);
        let z = b.uniform_stage("b", 1, 2.0, [0.5]);
        b.a2a(a, z);
        let c = ClusterSpec::new(1, 1);
        for kind in SchedulerKind::ALL {
            let m = simulate(&[b.clone().build()], &c, &SimConfig::new(kind, 1)).unwrap();
            assert!((m.makespan - 3.0).abs() < 1e-9, "{kind}");
        }
    }

    fn two_group_jobs() -> Vec<JobDag> {
        (0..2u32)
            .map(|g| {
                let mut b = DagBuilder::new(format!("g{g}")).group(g);
                b.uniform_stage("w", 20, 1.0, [0.1, 0.1]);
                b.build()
            })
            .collect()
    }

    #[test]
    fn zero_kappa_always_serves_the_leader() {
        let cfg = SimConfig {
            kappa: 0.0,
            ..SimConfig::new(SchedulerKind::Graphene, 0)
        };
        let m = simulate(&two_group_jobs(), &ClusterSpec::new(1, 2), &cfg).unwrap();
        assert_eq!(m.launches.len(), 40);
        assert!(m.launches.iter().all(|l| l.leader == Some(l.group)));
    }

    #[test]
    fn gate_forces_the_starved_group() {
        // With a loose gate one group may run ahead, but never by more than
        // the gate allows.
        let cfg = SimConfig {
            kappa: 0.5,
            ..SimConfig::new(SchedulerKind::Graphene, 0)
        };
        let m = simulate(&two_group_jobs(), &ClusterSpec::new(4, 2), &cfg).unwrap();
        for l in m.launches.iter().filter(|l| l.leader != Some(l.group)) {
            assert!(l.leader_deficit < 2.0);
        }
    }
}
