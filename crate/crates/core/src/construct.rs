//! Offline construction of a preferred schedule for one job.
//!
//! Tasks that are long or belong to hard-to-pack stages are placed first
//! onto an empty [`VirtualSpace`]; the remaining tasks are then placed
//! around them, parents backwards and children forwards, in whichever of
//! four orders yields the most compact result.

use crate::baselines::PackCache;
use crate::cluster::ClusterSpec;
use crate::dag::{JobDag, StageId, TaskId};
use crate::resource::ResourceVector;
use crate::schedule::Placement;
use crate::space::{SpaceError, VirtualSpace};
use rayon::prelude::*;
use serde::Serialize;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConstructError {
    #[error("dead end: task {0} cannot be placed in this direction")]
    DeadEnd(TaskId),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("delta must lie in (0, 1], got {0}")]
    BadDelta(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstructConfig {
    /// Threshold grid step for both the length and fragmentation scores.
    pub delta: f64,
    /// Construction-time ceilings applied to fungible dimensions.
    pub ceilings: Vec<f64>,
}

impl Default for ConstructConfig {
    fn default() -> Self {
        Self {
            delta: 0.1,
            ceilings: vec![1.0],
        }
    }
}

impl ConstructConfig {
    pub fn with_overbook_sweep(mut self) -> Self {
        self.ceilings = vec![1.0, 1.05, 1.1];
        self
    }
}

/// A split of one part's tasks into troublesome tasks, their ancestors,
/// their descendants and everything else.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Division {
    pub troublesome: BTreeSet<TaskId>,
    pub parents: BTreeSet<TaskId>,
    pub children: BTreeSet<TaskId>,
    pub others: BTreeSet<TaskId>,
    pub long_threshold: f64,
    pub frag_threshold: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SubsetOrder {
    /// Others, then parents backwards, then children forwards.
    Opc,
    Ocp,
    Cop,
    Poc,
}

impl SubsetOrder {
    pub const ALL: [SubsetOrder; 4] = [
        SubsetOrder::Opc,
        SubsetOrder::Ocp,
        SubsetOrder::Cop,
        SubsetOrder::Poc,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Direction {
    Forward,
    Backward,
}

/// Task duration over the longest duration among `tasks`.
pub fn long_scores(dag: &JobDag, tasks: &BTreeSet<TaskId>) -> BTreeMap<TaskId, f64> {
    let longest = tasks
        .iter()
        .map(|t| dag.task(*t).duration)
        .fold(0.0, f64::max);
    tasks
        .iter()
        .map(|&t| (t, dag.task(t).duration / longest))
        .collect()
}

/// Work of one stage relative to the cluster over the time a greedy packer
/// needs to run the stage alone.
pub fn frag_score(dag: &JobDag, stage: StageId, cluster: &ClusterSpec) -> f64 {
    frag_score_cached(dag, stage, cluster, &mut PackCache::default())
}

fn frag_score_cached(
    dag: &JobDag,
    stage: StageId,
    cluster: &ClusterSpec,
    cache: &mut PackCache,
) -> f64 {
    let tasks: Vec<_> = dag
        .stage(stage)
        .tasks
        .iter()
        .map(|t| dag.task(*t))
        .collect();
    let work = crate::bounds::work_of(tasks.iter().copied(), cluster);
    let exec = cache.makespan(&tasks, cluster);
    if exec <= 0.0 {
        return 1.0;
    }
    work / exec
}

/// Unique divisions from the `(l, f)` threshold grid, in grid order.
pub fn candidate_divisions(
    dag: &JobDag,
    part: &BTreeSet<StageId>,
    cluster: &ClusterSpec,
    delta: f64,
) -> Result<Vec<Division>, ConstructError> {
    let mut cache = PackCache::default();
    candidate_divisions_cached(dag, part, cluster, delta, &mut cache)
}

fn candidate_divisions_cached(
    dag: &JobDag,
    part: &BTreeSet<StageId>,
    cluster: &ClusterSpec,
    delta: f64,
    cache: &mut PackCache,
) -> Result<Vec<Division>, ConstructError> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(ConstructError::BadDelta(delta));
    }
    let tasks = dag.tasks_of(part);
    let long = long_scores(dag, &tasks);
    let frag: BTreeMap<StageId, f64> = part
        .iter()
        .map(|&s| (s, frag_score_cached(dag, s, cluster, cache)))
        .collect();
    let steps = (1.0 / delta).round().max(1.0) as usize;
    let grid = |k: usize| if k == steps { 1.0 } else { k as f64 * delta };
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for li in 1..=steps {
        let l = grid(li);
        for fi in 1..=steps {
            let f = grid(fi);
            let picked: BTreeSet<TaskId> = tasks
                .iter()
                .copied()
                .filter(|t| long[t] >= l - 1e-9 || frag[&dag.task(*t).stage] <= f + 1e-9)
                .collect();
            let troublesome = dag.closure(&picked);
            if !seen.insert(troublesome.clone()) {
                continue;
            }
            out.push(divide(dag, &tasks, troublesome, l, f));
        }
    }
    Ok(out)
}

fn divide(
    dag: &JobDag,
    universe: &BTreeSet<TaskId>,
    troublesome: BTreeSet<TaskId>,
    l: f64,
    f: f64,
) -> Division {
    let up = dag.task_ancestors(troublesome.iter().copied());
    let down = dag.task_descendants(troublesome.iter().copied());
    let keep = |set: BTreeSet<TaskId>| -> BTreeSet<TaskId> {
        set.into_iter()
            .filter(|t| universe.contains(t) && !troublesome.contains(t))
            .collect()
    };
    let parents = keep(up);
    let children = keep(down);
    let others = universe
        .iter()
        .copied()
        .filter(|t| !troublesome.contains(t) && !parents.contains(t) && !children.contains(t))
        .collect();
    Division {
        troublesome,
        parents,
        children,
        others,
        long_threshold: l,
        frag_threshold: f,
    }
}

#[derive(PartialEq)]
struct ByLength(f64, TaskId);

impl Eq for ByLength {}

impl Ord for ByLength {
    // Longest first, then lowest id.
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .total_cmp(&other.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for ByLength {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

type Neighbours = fn(&JobDag, TaskId) -> &[TaskId];

fn place_directed(
    dag: &JobDag,
    tasks: &BTreeSet<TaskId>,
    space: &VirtualSpace,
    dir: Direction,
) -> Result<VirtualSpace, ConstructError> {
    let mut space = space.clone();
    let (before, after): (Neighbours, Neighbours) = match dir {
        Direction::Forward => (JobDag::parents, JobDag::children),
        Direction::Backward => (JobDag::children, JobDag::parents),
    };
    let mut waiting: BTreeMap<TaskId, usize> = tasks
        .iter()
        .map(|&t| {
            (
                t,
                before(dag, t).iter().filter(|p| tasks.contains(p)).count(),
            )
        })
        .collect();
    let mut ready: BinaryHeap<ByLength> = waiting
        .iter()
        .filter(|(_, n)| **n == 0)
        .map(|(&t, _)| ByLength(dag.task(t).duration, t))
        .collect();
    let mut placed = 0;
    while let Some(ByLength(_, t)) = ready.pop() {
        if after(dag, t).iter().any(|c| space.is_placed(*c)) {
            return Err(ConstructError::DeadEnd(t));
        }
        let spec = dag.task(t);
        let anchors = before(dag, t).iter().filter_map(|p| space.placement(*p));
        let record = match dir {
            Direction::Forward => {
                let start = space.min_begin().unwrap_or(0.0);
                let not_before = anchors.map(|p| p.end).fold(start, f64::max);
                space.earliest_fit(spec, not_before)?
            }
            Direction::Backward => {
                let end = space.max_end().unwrap_or(0.0);
                let not_after = anchors.map(|p| p.begin).fold(end, f64::min);
                space.latest_fit(spec, not_after)?
            }
        };
        space.commit(spec, record)?;
        placed += 1;
        for &c in after(dag, t) {
            if let Some(n) = waiting.get_mut(&c) {
                *n -= 1;
                if *n == 0 {
                    ready.push(ByLength(dag.task(c).duration, c));
                }
            }
        }
    }
    if placed < tasks.len() {
        let stuck = waiting
            .iter()
            .find(|(t, _)| !space.is_placed(**t))
            .map(|(t, _)| *t)
            .expect("some task left");
        return Err(ConstructError::DeadEnd(stuck));
    }
    Ok(space)
}

/// Place `tasks` longest-ready-first, each at the earliest time after its
/// placed parents.
pub fn place_forward(
    dag: &JobDag,
    tasks: &BTreeSet<TaskId>,
    space: &VirtualSpace,
) -> Result<VirtualSpace, ConstructError> {
    place_directed(dag, tasks, space, Direction::Forward)
}

/// Mirror of [`place_forward`]: each task ends no later than its placed
/// children begin.
pub fn place_backward(
    dag: &JobDag,
    tasks: &BTreeSet<TaskId>,
    space: &VirtualSpace,
) -> Result<VirtualSpace, ConstructError> {
    place_directed(dag, tasks, space, Direction::Backward)
}

/// The more compact of forward and backward placement; forward on ties.
pub fn place_tasks(
    dag: &JobDag,
    tasks: &BTreeSet<TaskId>,
    space: &VirtualSpace,
) -> Result<(VirtualSpace, Direction), ConstructError> {
    if tasks.is_empty() {
        return Ok((space.clone(), Direction::Forward));
    }
    let fwd = place_forward(dag, tasks, space);
    let bwd = place_backward(dag, tasks, space);
    match (fwd, bwd) {
        (Ok(f), Ok(b)) if b.schedule_length() < f.schedule_length() - 1e-9 => {
            Ok((b, Direction::Backward))
        }
        (Ok(f), _) => Ok((f, Direction::Forward)),
        (Err(_), Ok(b)) => Ok((b, Direction::Backward)),
        (Err(e), Err(_)) => Err(e),
    }
}

/// Place the non-troublesome sets of `division` in one fixed order.
pub fn run_order(
    dag: &JobDag,
    space: &VirtualSpace,
    division: &Division,
    order: SubsetOrder,
) -> Result<VirtualSpace, ConstructError> {
    let (o, p, c) = (&division.others, &division.parents, &division.children);
    match order {
        SubsetOrder::Opc => {
            let s = place_tasks(dag, o, space)?.0;
            let s = place_backward(dag, p, &s)?;
            place_forward(dag, c, &s)
        }
        SubsetOrder::Ocp => {
            let s = place_tasks(dag, o, space)?.0;
            let s = place_forward(dag, c, &s)?;
            place_backward(dag, p, &s)
        }
        SubsetOrder::Cop => {
            let s = place_forward(dag, c, space)?;
            let s = place_backward(dag, o, &s)?;
            place_backward(dag, p, &s)
        }
        SubsetOrder::Poc => {
            let s = place_backward(dag, p, space)?;
            let s = place_forward(dag, o, &s)?;
            place_forward(dag, c, &s)
        }
    }
}

/// Outcome of trying all four orders on one division.
#[derive(Clone, Debug)]
pub struct OrderTrial {
    pub space: VirtualSpace,
    pub order: SubsetOrder,
    pub lengths: [f64; 4],
}

/// Run every order and keep the most compact; earlier orders win ties.
pub fn try_subset_orders(
    dag: &JobDag,
    space: &VirtualSpace,
    division: &Division,
) -> Result<OrderTrial, ConstructError> {
    let mut lengths = [f64::INFINITY; 4];
    let mut best: Option<(VirtualSpace, SubsetOrder)> = None;
    let mut first_err = None;
    for (i, order) in SubsetOrder::ALL.into_iter().enumerate() {
        match run_order(dag, space, division, order) {
            Ok(s) => {
                lengths[i] = s.schedule_length();
                if best
                    .as_ref()
                    .is_none_or(|(b, _)| lengths[i] < b.schedule_length() - 1e-9)
                {
                    best = Some((s, order));
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match best {
        Some((space, order)) => Ok(OrderTrial {
            space,
            order,
            lengths,
        }),
        None => Err(first_err.expect("an order ran")),
    }
}

/// What was chosen for one part of the job.
#[derive(Clone, Debug, Serialize)]
pub struct PartChoice {
    pub stages: Vec<StageId>,
    pub division: Division,
    pub order: SubsetOrder,
    pub order_lengths: [f64; 4],
    pub ceiling: f64,
    pub length: f64,
    pub candidates: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct PreferredSchedule {
    /// Indexed by task id, begins start at zero.
    pub placements: Vec<Placement>,
    /// Indexed by task id; 1 for the earliest task, `1/n` for the last.
    pub pri_score: Vec<f64>,
    pub length: f64,
    pub parts: Vec<PartChoice>,
}

/// Rank tasks by begin time (ties by id): score `1 - rank/n`, rank from 0.
pub fn pri_scores(placements: &[Placement]) -> Vec<f64> {
    let n = placements.len();
    let mut order: Vec<&Placement> = placements.iter().collect();
    order.sort_by(|a, b| a.begin.total_cmp(&b.begin).then(a.task.cmp(&b.task)));
    let mut out = vec![0.0; n];
    for (rank, p) in order.into_iter().enumerate() {
        out[p.task.0] = 1.0 - rank as f64 / n as f64;
    }
    out
}

fn ceiling_vector(cluster: &ClusterSpec, level: f64) -> ResourceVector {
    ResourceVector::new(
        (0..cluster.dims())
            .map(|d| {
                if cluster.overbooking.is_fungible(d) {
                    level
                } else {
                    1.0
                }
            })
            .collect(),
    )
}

struct Candidate {
    space: VirtualSpace,
    division: Division,
    order: SubsetOrder,
    lengths: [f64; 4],
    ceiling: f64,
}

fn evaluate(
    dag: &JobDag,
    base: &VirtualSpace,
    division: &Division,
) -> Result<OrderTrial, ConstructError> {
    let (with_t, _) = place_tasks(dag, &division.troublesome, base)?;
    try_subset_orders(dag, &with_t, division)
}

/// Build the preferred schedule for `dag` on `cluster`.
pub fn build_schedule(
    dag: &JobDag,
    cluster: &ClusterSpec,
    config: &ConstructConfig,
) -> Result<PreferredSchedule, ConstructError> {
    let mut cache = PackCache::default();
    let mut placements = vec![
        Placement {
            task: TaskId(0),
            machine: 0,
            begin: 0.0,
            end: 0.0
        };
        dag.task_count()
    ];
    let mut parts = Vec::new();
    let mut offset = 0.0;
    for part in dag.cut_dags() {
        let divisions = candidate_divisions_cached(dag, &part, cluster, config.delta, &mut cache)?;
        let mut best: Option<Candidate> = None;
        for &level in &config.ceilings {
            let base = VirtualSpace::new(cluster.machines, cluster.capacity.clone())?
                .with_ceiling(&ceiling_vector(cluster, level));
            let trials: Vec<Result<OrderTrial, ConstructError>> = divisions
                .par_iter()
                .map(|d| evaluate(dag, &base, d))
                .collect();
            for (division, trial) in divisions.iter().zip(trials) {
                let trial = trial?;
                let len = trial.space.schedule_length();
                if best
                    .as_ref()
                    .is_none_or(|b| len < b.space.schedule_length() - 1e-9)
                {
                    best = Some(Candidate {
                        space: trial.space,
                        division: division.clone(),
                        order: trial.order,
                        lengths: trial.lengths,
                        ceiling: level,
                    });
                }
            }
        }
        let best = best.expect("a part has at least one division");
        let length = best.space.schedule_length();
        for p in best.space.placements_from(offset) {
            placements[p.task.0] = p;
        }
        offset += length;
        parts.push(PartChoice {
            stages: part.iter().copied().collect(),
            division: best.division,
            order: best.order,
            order_lengths: best.lengths,
            ceiling: best.ceiling,
            length,
            candidates: divisions.len(),
        });
    }
    Ok(PreferredSchedule {
        pri_score: pri_scores(&placements),
        length: offset,
        placements,
        parts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::{DagBuilder, EdgePattern};

    fn one_machine() -> ClusterSpec {
        ClusterSpec::new(1, 1)
    }

    fn all(dag: &JobDag) -> BTreeSet<TaskId> {
        dag.task_ids().collect()
    }

    fn empty(c: &ClusterSpec) -> VirtualSpace {
        VirtualSpace::new(c.machines, c.capacity.clone()).unwrap()
    }

    #[test]
    fn long_score_formula() {
        let mut b = DagBuilder::new("l");
        for d in [1.0, 2.0, 4.0] {
            b.uniform_stage("", 1, d, [0.1]);
        }
        let dag = b.build();
        let s: Vec<f64> = long_scores(&dag, &all(&dag)).into_values().collect();
        assert_eq!(s, vec![0.25, 0.5, 1.0]);
    }

    #[test]
    fn frag_score_examples() {
        let c = one_machine();
        let mut b = DagBuilder::new("f");
        let four = b.uniform_stage("four", 4, 1.0, [0.5]);
        let three = b.uniform_stage("three", 3, 1.0, [0.6]);
        let dag = b.build();
        assert!((frag_score(&dag, four, &c) - 1.0).abs() < 1e-12);
        assert!((frag_score(&dag, three, &c) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn delta_one_gives_single_division() {
        let mut b = DagBuilder::new("d");
        let a = b.uniform_stage("a", 2, 1.0, [0.3]);
        let z = b.uniform_stage("z", 1, 2.0, [0.3]);
        b.a2a(a, z);
        let dag = b.build();
        let part: BTreeSet<StageId> = dag.stage_ids().collect();
        let divs = candidate_divisions(&dag, &part, &one_machine(), 1.0).unwrap();
        assert_eq!(divs.len(), 1);
        assert_eq!(divs[0].troublesome, all(&dag));
        assert!(
            divs[0].others.is_empty() && divs[0].parents.is_empty() && divs[0].children.is_empty()
        );
    }

    #[test]
    fn forward_longest_first() {
        let mut b = DagBuilder::new("i");
        b.uniform_stage("short", 1, 1.0, [0.7]);
        b.uniform_stage("long", 1, 3.0, [0.7]);
        let dag = b.build();
        let s = place_forward(&dag, &all(&dag), &empty(&one_machine())).unwrap();
        assert_eq!(s.placement(TaskId(1)).unwrap().begin, 0.0);
        assert_eq!(s.placement(TaskId(0)).unwrap().begin, 3.0);
        assert_eq!(s.schedule_length(), 4.0);
    }

    #[test]
    fn chain_dependencies_both_directions() {
        let mut b = DagBuilder::new("c");
        let a = b.uniform_stage("a", 1, 2.0, [0.1]);
        let z = b.uniform_stage("b", 1, 3.0, [0.1]);
        b.a2a(a, z);
        let dag = b.build();
        let f = place_forward(&dag, &all(&dag), &empty(&one_machine())).unwrap();
        assert_eq!(
            f.placement(TaskId(1)).unwrap().begin,
            f.placement(TaskId(0)).unwrap().end
        );
        let mut space = empty(&one_machine());
        let rec = Placement {
            task: TaskId(1),
            machine: 0,
            begin: 5.0,
            end: 8.0,
        };
        space.commit(dag.task(TaskId(1)), rec).unwrap();
        let back = place_backward(&dag, &BTreeSet::from([TaskId(0)]), &space).unwrap();
        assert!(back.placement(TaskId(0)).unwrap().end <= 5.0);
    }

    #[test]
    fn backward_wins_when_it_fills_a_hole() {
        // A blocker occupies [0, 1). Forward pushes the chain p -> q past it,
        // backward tucks q beside the blocker and p before it.
        let mut b = DagBuilder::new("h");
        let p = b.uniform_stage("p", 1, 1.0, [0.6]);
        let q = b.uniform_stage("q", 1, 1.0, [0.1]);
        b.a2a(p, q);
        let dag = b.build();
        let mut space = empty(&one_machine());
        let blocker = crate::dag::TaskSpec {
            id: TaskId(99),
            stage: StageId(0),
            duration: 1.0,
            demand: ResourceVector::from([0.6]),
            locality_sensitive: false,
        };
        space
            .commit(
                &blocker,
                Placement {
                    task: TaskId(99),
                    machine: 0,
                    begin: 0.0,
                    end: 1.0,
                },
            )
            .unwrap();
        assert_eq!(
            place_forward(&dag, &all(&dag), &space)
                .unwrap()
                .schedule_length(),
            3.0
        );
        let (s, dir) = place_tasks(&dag, &all(&dag), &space).unwrap();
        assert_eq!(dir, Direction::Backward);
        assert_eq!(s.schedule_length(), 2.0);
    }

    #[test]
    fn empty_division_sets_are_identity() {
        let mut b = DagBuilder::new("s");
        b.uniform_stage("x", 1, 1.0, [0.6]);
        let dag = b.build();
        let space = place_forward(&dag, &all(&dag), &empty(&one_machine())).unwrap();
        let div = divide(&dag, &all(&dag), all(&dag), 1.0, 1.0);
        let trial = try_subset_orders(&dag, &space, &div).unwrap();
        assert_eq!(trial.space, space);
    }

    #[test]
    fn single_task_schedule() {
        let mut b = DagBuilder::new("one");
        b.uniform_stage("x", 1, 2.5, [0.4]);
        let s = build_schedule(&b.build(), &one_machine(), &ConstructConfig::default()).unwrap();
        assert_eq!(s.length, 2.5);
        assert_eq!(s.pri_score, vec![1.0]);
    }

    #[test]
    fn pri_score_ranks() {
        let pl = |t: usize, begin: f64| Placement {
            task: TaskId(t),
            machine: 0,
            begin,
            end: begin + 1.0,
        };
        assert_eq!(
            pri_scores(&[pl(0, 3.0), pl(1, 0.0), pl(2, 1.0), pl(3, 2.0)]),
            vec![0.25, 1.0, 0.75, 0.5]
        );
        assert_eq!(pri_scores(&[pl(0, 0.0), pl(1, 0.0)]), vec![1.0, 0.5]);
    }

    #[test]
    fn chain_orders_agree() {
        let mut b = DagBuilder::new("chain");
        let s0 = b.uniform_stage("a", 1, 1.0, [0.5]);
        let s1 = b.uniform_stage("b", 1, 3.0, [0.5]);
        let s2 = b.uniform_stage("c", 1, 1.0, [0.5]);
        b.edge(s0, s1, EdgePattern::OneToOne);
        b.edge(s1, s2, EdgePattern::OneToOne);
        let dag = b.build();
        let div = divide(&dag, &all(&dag), BTreeSet::from([TaskId(1)]), 1.0, 0.0);
        let (with_t, _) = place_tasks(&dag, &div.troublesome, &empty(&one_machine())).unwrap();
        let trial = try_subset_orders(&dag, &with_t, &div).unwrap();
        assert!(trial.lengths.iter().all(|l| (l - 5.0).abs() < 1e-9));
    }
}
