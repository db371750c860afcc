//! Reference schedulers and helpers shared with the constructor.
//!
//! The online dispatch rules themselves live in the simulator; this module
//! holds the registry, the orderings that need whole-DAG preprocessing, the
//! standalone greedy packer and the malleable-rate optimum for edge-less
//! instances.

use crate::cluster::ClusterSpec;
use crate::dag::{JobDag, TaskId, TaskSpec};
use crate::resource::{ResourceVector, TOL};
use crate::schedule::Placement;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Which dimensions a packer checks before launching a task.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FitMode {
    /// Only cores and memory; the rest may overflow and slow tasks down.
    CpuMem,
    All,
}

impl FitMode {
    pub fn fits(self, demand: &ResourceVector, avail: &ResourceVector) -> bool {
        let dims = match self {
            FitMode::CpuMem => demand.dims().min(2),
            FitMode::All => demand.dims(),
        };
        (0..dims).all(|d| demand.get(d) <= avail.get(d) + TOL)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchedulerKind {
    Graphene,
    Cp,
    CpBackfill,
    Tetris,
    TetrisCpuMem,
    Bfs,
    Random,
    CoffmanGraham,
    StripPart,
}

#[derive(Debug, Error, PartialEq)]
#[error("unknown scheduler `{0}` (known: {known})", known = SchedulerKind::NAMES.join(", "))]
pub struct UnknownScheduler(pub String);

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 9] = [
        SchedulerKind::Graphene,
        SchedulerKind::Cp,
        SchedulerKind::CpBackfill,
        SchedulerKind::Tetris,
        SchedulerKind::TetrisCpuMem,
        SchedulerKind::Bfs,
        SchedulerKind::Random,
        SchedulerKind::CoffmanGraham,
        SchedulerKind::StripPart,
    ];

    pub const NAMES: [&'static str; 9] = [
        "graphene",
        "cp",
        "cp-backfill",
        "tetris",
        "tetris-cpumem",
        "bfs",
        "random",
        "cg",
        "strippart",
    ];

    pub fn name(self) -> &'static str {
        Self::NAMES[self as usize]
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchedulerKind {
    type Err = UnknownScheduler;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::NAMES
            .iter()
            .position(|n| *n == s)
            .map(|i| Self::ALL[i])
            .ok_or_else(|| UnknownScheduler(s.to_string()))
    }
}

/// Coffman-Graham labels: larger label means schedule earlier. Labels are
/// assigned from the sinks upward, each time picking the task whose sorted
/// (descending) successor labels are lexicographically smallest.
pub fn coffman_graham_labels(dag: &JobDag) -> Vec<usize> {
    let n = dag.task_count();
    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut unlabeled_children: Vec<usize> =
        dag.task_ids().map(|t| dag.children(t).len()).collect();
    let mut ready: BTreeSet<TaskId> = dag
        .task_ids()
        .filter(|t| unlabeled_children[t.0] == 0)
        .collect();
    for next in 1..=n {
        let key = |t: TaskId| {
            let mut ls: Vec<usize> = dag
                .children(t)
                .iter()
                .map(|c| label[c.0].expect("child labeled"))
                .collect();
            ls.sort_unstable_by(|a, b| b.cmp(a));
            ls
        };
        let pick = *ready
            .iter()
            .min_by(|a, b| key(**a).cmp(&key(**b)).then(a.cmp(b)))
            .expect("acyclic dag always has a labelable task");
        ready.remove(&pick);
        label[pick.0] = Some(next);
        for &p in dag.parents(pick) {
            unlabeled_children[p.0] -= 1;
            if unlabeled_children[p.0] == 0 {
                ready.insert(p);
            }
        }
    }
    label
        .into_iter()
        .map(|l| l.expect("every task labeled"))
        .collect()
}

/// Level of each task for strip partitioning: stage depth from the roots.
pub fn strip_levels(dag: &JobDag) -> Vec<usize> {
    let depth = dag.stage_depths();
    dag.tasks().iter().map(|t| depth[t.stage.0]).collect()
}

/// Greedy dot-product packing of independent tasks onto the cluster: at each
/// instant repeatedly launch the (task, machine) pair with the largest
/// `demand · available` among those that fit, ties by task then machine.
pub fn pack_independent(
    tasks: &[&TaskSpec],
    cluster: &ClusterSpec,
    mode: FitMode,
) -> Vec<Placement> {
    let mut avail = vec![cluster.capacity.clone(); cluster.machines];
    let mut pending: Vec<&TaskSpec> = tasks.to_vec();
    pending.sort_by_key(|t| t.id);
    let mut running: Vec<Placement> = Vec::new();
    let mut out = Vec::with_capacity(tasks.len());
    let mut now = 0.0;
    while !pending.is_empty() {
        loop {
            let mut best: Option<(f64, usize, usize)> = None;
            for (i, t) in pending.iter().enumerate() {
                for (m, a) in avail.iter().enumerate() {
                    if !mode.fits(&t.demand, a) {
                        continue;
                    }
                    let score = t.demand.dot(a);
                    if best.is_none_or(|(s, _, _)| score > s + TOL) {
                        best = Some((score, i, m));
                    }
                }
            }
            let Some((_, i, m)) = best else { break };
            let t = pending.remove(i);
            avail[m].sub_assign(&t.demand);
            let p = Placement {
                task: t.id,
                machine: m,
                begin: now,
                end: now + t.duration,
            };
            running.push(p);
            out.push(p);
        }
        if pending.is_empty() {
            break;
        }
        let Some(next) = running.iter().map(|p| p.end).reduce(f64::min) else {
            // Nothing running and nothing fits: only possible for oversize tasks.
            break;
        };
        now = next;
        running.retain(|p| {
            if p.end <= now + TOL {
                let t = tasks.iter().find(|t| t.id == p.task).expect("own task");
                avail[p.machine].add_assign(&t.demand);
                false
            } else {
                true
            }
        });
    }
    out
}

#[derive(Debug, Error, PartialEq)]
pub enum MalleableError {
    #[error("trivial instance: longest task {longest} exceeds the work bound {bound}")]
    Trivial { longest: f64, bound: f64 },
    #[error("demand {value} in dimension {dim} exceeds 1")]
    Oversize { dim: usize, value: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct MalleableSchedule {
    /// Fraction of its full demand each task runs at.
    pub rates: Vec<f64>,
    pub makespan: f64,
}

impl MalleableSchedule {
    /// Summed allocation per dimension while all tasks run.
    pub fn allocation(&self, jobs: &[(f64, ResourceVector)]) -> ResourceVector {
        let dims = jobs.first().map_or(0, |j| j.1.dims());
        let mut total = ResourceVector::zeros(dims);
        for (rate, (_, demand)) in self.rates.iter().zip(jobs) {
            total.add_assign(&demand.scaled(*rate));
        }
        total
    }
}

/// Optimal makespan for edge-less malleable tasks given as (length, demand):
/// every task runs at rate `length / P` where `P` is the heaviest
/// dimension's total work, so all of them finish together at `P`.
pub fn greedy_malleable_opt(
    jobs: &[(f64, ResourceVector)],
) -> Result<MalleableSchedule, MalleableError> {
    let dims = jobs.first().map_or(0, |j| j.1.dims());
    for (_, demand) in jobs {
        if let Some((dim, value)) = demand.iter().enumerate().find(|(_, v)| *v > 1.0 + TOL) {
            return Err(MalleableError::Oversize { dim, value });
        }
    }
    let bound = (0..dims)
        .map(|d| jobs.iter().map(|(p, a)| p * a.get(d)).sum::<f64>())
        .fold(0.0, f64::max);
    let longest = jobs.iter().map(|j| j.0).fold(0.0, f64::max);
    if longest > bound + TOL {
        return Err(MalleableError::Trivial { longest, bound });
    }
    Ok(MalleableSchedule {
        rates: jobs.iter().map(|(p, _)| p / bound).collect(),
        makespan: bound,
    })
}

/// Per-stage cache of greedy packing makespans, keyed by the stage's task
/// durations and demands.
#[derive(Default)]
pub struct PackCache {
    seen: HashMap<Vec<u64>, f64>,
}

impl PackCache {
    pub fn makespan(&mut self, tasks: &[&TaskSpec], cluster: &ClusterSpec) -> f64 {
        let key: Vec<u64> = tasks
            .iter()
            .flat_map(|t| {
                std::iter::once(t.duration.to_bits()).chain(t.demand.iter().map(f64::to_bits))
            })
            .collect();
        *self.seen.entry(key).or_insert_with(|| {
            crate::schedule::span(&pack_independent(tasks, cluster, FitMode::All))
        })
    }
}
