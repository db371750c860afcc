//! Jobs as DAGs of stages, expanded to task-level precedence.

use crate::cluster::ClusterSpec;
use crate::resource::ResourceVector;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use thiserror::Error;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct TaskId(pub usize);

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct StageId(pub usize);

impl fmt::Debug for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Debug for StageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

impl fmt::Display for StageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// How tasks of two connected stages depend on each other.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgePattern {
    #[serde(rename = "o2o")]
    OneToOne,
    #[serde(rename = "a2a")]
    AllToAll,
    /// Expanded like all-to-all.
    #[serde(rename = "m2o")]
    ManyToOne,
}

impl EdgePattern {
    pub fn is_all_to_all(self) -> bool {
        !matches!(self, EdgePattern::OneToOne)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StageEdge {
    pub to: StageId,
    pub pattern: EdgePattern,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskSpec {
    pub id: TaskId,
    pub stage: StageId,
    pub duration: f64,
    pub demand: ResourceVector,
    pub locality_sensitive: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageSpec {
    pub id: StageId,
    pub name: String,
    pub tasks: Vec<TaskId>,
    pub out_edges: Vec<StageEdge>,
}

/// Input for one task when assembling a DAG.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskDraft {
    pub duration: f64,
    pub demand: ResourceVector,
    pub locality_sensitive: bool,
}

impl TaskDraft {
    pub fn new(duration: f64, demand: impl Into<ResourceVector>) -> Self {
        Self {
            duration,
            demand: demand.into(),
            locality_sensitive: false,
        }
    }

    pub fn local(mut self, flag: bool) -> Self {
        self.locality_sensitive = flag;
        self
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DagError {
    #[error("unknown stage {0}")]
    UnknownStage(StageId),
    #[error("stage graph has a cycle through stage {0}")]
    Cycle(StageId),
}

/// A job: stages of parallel tasks plus typed stage edges. Task-level
/// parents and children are expanded once at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct JobDag {
    pub id: String,
    pub arrival: f64,
    pub group: u32,
    stages: Vec<StageSpec>,
    tasks: Vec<TaskSpec>,
    parents: Vec<Vec<TaskId>>,
    children: Vec<Vec<TaskId>>,
    stage_parents: Vec<Vec<StageId>>,
    stage_children: Vec<Vec<StageId>>,
}

#[derive(Clone, Debug)]
pub struct DagBuilder {
    id: String,
    arrival: f64,
    group: u32,
    stages: Vec<(String, Vec<TaskDraft>)>,
    edges: Vec<(StageId, StageEdge)>,
}

impl DagBuilder {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            arrival: 0.0,
            group: 0,
            stages: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub fn arrival(mut self, t: f64) -> Self {
        self.arrival = t;
        self
    }

    pub fn group(mut self, g: u32) -> Self {
        self.group = g;
        self
    }

    pub fn stage(&mut self, name: impl Into<String>, tasks: Vec<TaskDraft>) -> StageId {
        self.stages.push((name.into(), tasks));
        StageId(self.stages.len() - 1)
    }

    /// Stage with `count` identical tasks.
    pub fn uniform_stage(
        &mut self,
        name: impl Into<String>,
        count: usize,
        duration: f64,
        demand: impl Into<ResourceVector>,
    ) -> StageId {
        let demand = demand.into();
        self.stage(
            name,
            (0..count)
                .map(|_| TaskDraft::new(duration, demand.clone()))
                .collect(),
        )
    }

    pub fn edge(&mut self, from: StageId, to: StageId, pattern: EdgePattern) {
        self.edges.push((from, StageEdge { to, pattern }));
    }

    pub fn a2a(&mut self, from: StageId, to: StageId) {
        self.edge(from, to, EdgePattern::AllToAll);
    }

    pub fn build(self) -> JobDag {
        let mut stages = Vec::with_capacity(self.stages.len());
        let mut tasks = Vec::new();
        for (i, (name, drafts)) in self.stages.into_iter().enumerate() {
            let mut ids = Vec::with_capacity(drafts.len());
            for d in drafts {
                let id = TaskId(tasks.len());
                ids.push(id);
                tasks.push(TaskSpec {
                    id,
                    stage: StageId(i),
                    duration: d.duration,
                    demand: d.demand,
                    locality_sensitive: d.locality_sensitive,
                });
            }
            stages.push(StageSpec {
                id: StageId(i),
                name,
                tasks: ids,
                out_edges: Vec::new(),
            });
        }
        for (from, e) in self.edges {
            if let Some(s) = stages.get_mut(from.0) {
                s.out_edges.push(e);
            }
        }
        JobDag::from_parts(self.id, self.arrival, self.group, stages, tasks)
    }
}

impl JobDag {
    /// Assemble a DAG from already-numbered stages and tasks. Stage `i` must
    /// have id `i` and task `j` id `j`. Dangling edges are kept in the stage
    /// list (so `validate` can report them) but not expanded.
    pub fn from_parts(
        id: String,
        arrival: f64,
        group: u32,
        stages: Vec<StageSpec>,
        tasks: Vec<TaskSpec>,
    ) -> Self {
        let n = tasks.len();
        let ns = stages.len();
        let mut parents: Vec<BTreeSet<TaskId>> = vec![BTreeSet::new(); n];
        let mut children: Vec<BTreeSet<TaskId>> = vec![BTreeSet::new(); n];
        let mut sp: Vec<BTreeSet<StageId>> = vec![BTreeSet::new(); ns];
        let mut sc: Vec<BTreeSet<StageId>> = vec![BTreeSet::new(); ns];
        for s in &stages {
            for e in &s.out_edges {
                let Some(target) = stages.get(e.to.0) else {
                    continue;
                };
                sp[e.to.0].insert(s.id);
                sc[s.id.0].insert(e.to);
                let mut link = |a: TaskId, b: TaskId| {
                    children[a.0].insert(b);
                    parents[b.0].insert(a);
                };
                match e.pattern {
                    EdgePattern::OneToOne => {
                        for (&a, &b) in s.tasks.iter().zip(&target.tasks) {
                            link(a, b);
                        }
                    }
                    EdgePattern::AllToAll | EdgePattern::ManyToOne => {
                        for &a in &s.tasks {
                            for &b in &target.tasks {
                                link(a, b);
                            }
                        }
                    }
                }
            }
        }
        let collect_t =
            |v: Vec<BTreeSet<TaskId>>| v.into_iter().map(|s| s.into_iter().collect()).collect();
        let collect_s =
            |v: Vec<BTreeSet<StageId>>| v.into_iter().map(|s| s.into_iter().collect()).collect();
        Self {
            id,
            arrival,
            group,
            stages,
            tasks,
            parents: collect_t(parents),
            children: collect_t(children),
            stage_parents: collect_s(sp),
            stage_children: collect_s(sc),
        }
    }

    pub fn stages(&self) -> &[StageSpec] {
        &self.stages
    }

    pub fn tasks(&self) -> &[TaskSpec] {
        &self.tasks
    }

    pub fn task(&self, id: TaskId) -> &TaskSpec {
        &self.tasks[id.0]
    }

    pub fn stage(&self, id: StageId) -> &StageSpec {
        &self.stages[id.0]
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }

    pub fn task_ids(&self) -> impl Iterator<Item = TaskId> + '_ {
        (0..self.tasks.len()).map(TaskId)
    }

    pub fn stage_ids(&self) -> impl Iterator<Item = StageId> + '_ {
        (0..self.stages.len()).map(StageId)
    }

    pub fn parents(&self, t: TaskId) -> &[TaskId] {
        &self.parents[t.0]
    }

    pub fn children(&self, t: TaskId) -> &[TaskId] {
        &self.children[t.0]
    }

    pub fn stage_parents(&self, s: StageId) -> &[StageId] {
        &self.stage_parents[s.0]
    }

    pub fn stage_children(&self, s: StageId) -> &[StageId] {
        &self.stage_children[s.0]
    }

    /// Resource dimension of the first task (0 for an empty DAG).
    pub fn dims(&self) -> usize {
        self.tasks.first().map_or(0, |t| t.demand.dims())
    }

    pub fn with_arrival(mut self, t: f64) -> Self {
        self.arrival = t;
        self
    }

    pub fn with_group(mut self, g: u32) -> Self {
        self.group = g;
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn stage_by_name(&self, name: &str) -> Option<StageId> {
        self.stages.iter().find(|s| s.name == name).map(|s| s.id)
    }

    /// Stage ids in topological order.
    pub fn stage_topo_order(&self) -> Result<Vec<StageId>, DagError> {
        let mut indeg: Vec<usize> = self.stage_parents.iter().map(Vec::len).collect();
        let mut queue: VecDeque<StageId> = self.stage_ids().filter(|s| indeg[s.0] == 0).collect();
        let mut out = Vec::with_capacity(self.stages.len());
        while let Some(s) = queue.pop_front() {
            out.push(s);
            for &c in &self.stage_children[s.0] {
                indeg[c.0] -= 1;
                if indeg[c.0] == 0 {
                    queue.push_back(c);
                }
            }
        }
        if out.len() == self.stages.len() {
            Ok(out)
        } else {
            let stuck = self
                .stage_ids()
                .find(|s| indeg[s.0] > 0)
                .unwrap_or_default();
            Err(DagError::Cycle(stuck))
        }
    }

    /// Task ids in topological order (ties by id).
    pub fn topo_order(&self) -> Result<Vec<TaskId>, DagError> {
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: BTreeSet<TaskId> = self.task_ids().filter(|t| indeg[t.0] == 0).collect();
        let mut out = Vec::with_capacity(self.tasks.len());
        while let Some(t) = ready.pop_first() {
            out.push(t);
            for &c in &self.children[t.0] {
                indeg[c.0] -= 1;
                if indeg[c.0] == 0 {
                    ready.insert(c);
                }
            }
        }
        if out.len() == self.tasks.len() {
            Ok(out)
        } else {
            let stuck = self.task_ids().find(|t| indeg[t.0] > 0).unwrap_or_default();
            Err(DagError::Cycle(self.tasks[stuck.0].stage))
        }
    }

    /// Duration-weighted longest path from each task to any leaf, own
    /// duration included.
    pub fn bottom_levels(&self) -> Vec<f64> {
        let order = self.topo_order().expect("acyclic dag");
        let mut level = vec![0.0; self.tasks.len()];
        for &t in order.iter().rev() {
            let tail = self.children[t.0]
                .iter()
                .map(|c| level[c.0])
                .fold(0.0, f64::max);
            level[t.0] = self.tasks[t.0].duration + tail;
        }
        level
    }

    /// Number of edges on the longest stage path from a root to each stage.
    pub fn stage_depths(&self) -> Vec<usize> {
        let order = self.stage_topo_order().expect("acyclic dag");
        let mut depth = vec![0usize; self.stages.len()];
        for s in order {
            for &c in &self.stage_children[s.0] {
                depth[c.0] = depth[c.0].max(depth[s.0] + 1);
            }
        }
        depth
    }

    /// Children, parents, descendants, ancestors and unordered stages of `s`.
    pub fn relatives(&self, s: StageId) -> Result<Relatives, DagError> {
        let all: BTreeSet<StageId> = self.stage_ids().collect();
        self.relatives_within(s, &all)
    }

    /// Like [`relatives`](Self::relatives) but on the sub-DAG induced by `members`.
    pub fn relatives_within(
        &self,
        s: StageId,
        members: &BTreeSet<StageId>,
    ) -> Result<Relatives, DagError> {
        if !members.contains(&s) {
            return Err(DagError::UnknownStage(s));
        }
        let walk = |up: bool| {
            let mut seen = BTreeSet::new();
            let mut stack = vec![s];
            while let Some(x) = stack.pop() {
                let next = if up {
                    self.stage_parents(x)
                } else {
                    self.stage_children(x)
                };
                for &y in next.iter() {
                    if members.contains(&y) && seen.insert(y) {
                        stack.push(y);
                    }
                }
            }
            seen
        };
        let descendants = walk(false);
        let ancestors = walk(true);
        let unordered = members
            .iter()
            .copied()
            .filter(|x| *x != s && !descendants.contains(x) && !ancestors.contains(x))
            .collect();
        let pick = |v: &[StageId]| v.iter().copied().filter(|x| members.contains(x)).collect();
        Ok(Relatives {
            children: pick(self.stage_children(s)),
            parents: pick(self.stage_parents(s)),
            descendants,
            ancestors,
            unordered,
        })
    }

    /// All task-level descendants of the given tasks (exclusive).
    pub fn task_descendants(&self, from: impl IntoIterator<Item = TaskId>) -> BTreeSet<TaskId> {
        self.reach(from, |t| self.children(t))
    }

    /// All task-level ancestors of the given tasks (exclusive).
    pub fn task_ancestors(&self, from: impl IntoIterator<Item = TaskId>) -> BTreeSet<TaskId> {
        self.reach(from, |t| self.parents(t))
    }

    fn reach<'a>(
        &'a self,
        from: impl IntoIterator<Item = TaskId>,
        next: impl Fn(TaskId) -> &'a [TaskId],
    ) -> BTreeSet<TaskId> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<TaskId> = from.into_iter().collect();
        while let Some(x) = stack.pop() {
            for &y in next(x) {
                if seen.insert(y) {
                    stack.push(y);
                }
            }
        }
        seen
    }

    /// The input plus every task on a directed path between two input tasks.
    pub fn closure(&self, tasks: &BTreeSet<TaskId>) -> BTreeSet<TaskId> {
        let down = self.task_descendants(tasks.iter().copied());
        let up = self.task_ancestors(tasks.iter().copied());
        let mut out = tasks.clone();
        out.extend(down.intersection(&up).copied());
        out
    }

    /// Tasks belonging to the given stages, ascending.
    pub fn tasks_of(&self, stages: &BTreeSet<StageId>) -> BTreeSet<TaskId> {
        stages
            .iter()
            .flat_map(|s| self.stages[s.0].tasks.iter().copied())
            .collect()
    }

    /// Split the DAG into totally ordered parts. A part is cut at stage `s`
    /// when `s` has no unordered neighbour and has descendants; the upper
    /// part is `s` with its ancestors. A cut is only taken when every task
    /// of the upper part is a task-level ancestor of every task below it, so
    /// one-to-one edges never produce a false ordering.
    pub fn cut_dags(&self) -> Vec<BTreeSet<StageId>> {
        // Any valid cut puts every upper stage before every lower one, so
        // cuts are prefixes of a single topological order.
        let Ok(order) = self.stage_topo_order() else {
            return vec![self.stage_ids().collect()];
        };
        let ancestors: Vec<BTreeSet<StageId>> = {
            let mut anc = vec![BTreeSet::new(); self.stages.len()];
            for &s in &order {
                let mut acc = BTreeSet::new();
                for &p in self.stage_parents(s) {
                    acc.insert(p);
                    acc.extend(anc[p.0].iter().copied());
                }
                anc[s.0] = acc;
            }
            anc
        };
        let mut out = Vec::new();
        let mut current = BTreeSet::new();
        for (k, &s) in order.iter().enumerate() {
            current.insert(s);
            let upper: BTreeSet<StageId> = order[..=k].iter().copied().collect();
            let lower: BTreeSet<StageId> = order[k + 1..].iter().copied().collect();
            if lower.is_empty() {
                break;
            }
            let stage_cut = lower.iter().all(|l| upper.is_subset(&ancestors[l.0]));
            if stage_cut && self.totally_ordered(&upper, &lower) {
                out.push(std::mem::take(&mut current));
            }
        }
        if !current.is_empty() {
            out.push(current);
        }
        out
    }

    fn totally_ordered(&self, upper: &BTreeSet<StageId>, lower: &BTreeSet<StageId>) -> bool {
        let up_tasks = self.tasks_of(upper);
        let low_tasks = self.tasks_of(lower);
        low_tasks
            .iter()
            .filter(|t| self.parents(**t).iter().all(|p| !low_tasks.contains(p)))
            .all(|&t| {
                let anc = self.task_ancestors([t]);
                up_tasks.iter().all(|u| anc.contains(u))
            })
    }
}

/// Relatives of one stage inside a (sub-)DAG.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Relatives {
    pub children: BTreeSet<StageId>,
    pub parents: BTreeSet<StageId>,
    pub descendants: BTreeSet<StageId>,
    pub ancestors: BTreeSet<StageId>,
    pub unordered: BTreeSet<StageId>,
}

/// One problem found by [`validate`].
#[derive(Clone, Debug, PartialEq, Error)]
pub enum ValidationIssue {
    #[error("stage graph has a cycle through stage {0}")]
    Cycle(StageId),
    #[error("task {task} has non-positive duration {duration}")]
    NonPositiveDuration { task: TaskId, duration: f64 },
    #[error("task {task} has {got} demand entries, expected {want}")]
    DimensionMismatch {
        task: TaskId,
        got: usize,
        want: usize,
    },
    #[error("task {task} has negative demand {value} in dimension {dim}")]
    NegativeDemand {
        task: TaskId,
        dim: usize,
        value: f64,
    },
    #[error("task {task} demands {value} of dimension {dim}, machine capacity is {capacity}")]
    OversizeDemand {
        task: TaskId,
        dim: usize,
        value: f64,
        capacity: f64,
    },
    #[error("stage {from} has an edge to unknown stage {to}")]
    DanglingEdge { from: StageId, to: StageId },
    #[error("one-to-one edge {from}->{to} joins {from_tasks} and {to_tasks} tasks")]
    OneToOneMismatch {
        from: StageId,
        to: StageId,
        from_tasks: usize,
        to_tasks: usize,
    },
    #[error("stage {0} has no tasks")]
    EmptyStage(StageId),
    #[error("arrival time {0} is negative")]
    NegativeArrival(f64),
    #[error("cluster must have at least one machine")]
    NoMachines,
    #[error("cluster capacity entry {dim} is {value}, must be positive")]
    NonPositiveCapacity { dim: usize, value: f64 },
    #[error("remote penalty {0} outside (0, 1]")]
    BadRemotePenalty(f64),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.issues {
            writeln!(f, "{issue}")?;
        }
        Ok(())
    }
}

/// Check every structural invariant of `dag` and that each demand fits one
/// machine of `cluster`.
pub fn validate(dag: &JobDag, cluster: &ClusterSpec) -> ValidationReport {
    let mut issues = Vec::new();
    if cluster.machines == 0 {
        issues.push(ValidationIssue::NoMachines);
    }
    for (dim, value) in cluster.capacity.iter().enumerate() {
        if value <= 0.0 {
            issues.push(ValidationIssue::NonPositiveCapacity { dim, value });
        }
    }
    if !(cluster.remote_penalty > 0.0 && cluster.remote_penalty <= 1.0) {
        issues.push(ValidationIssue::BadRemotePenalty(cluster.remote_penalty));
    }
    if dag.arrival < 0.0 {
        issues.push(ValidationIssue::NegativeArrival(dag.arrival));
    }
    let want = cluster.capacity.dims();
    for t in dag.tasks() {
        if t.duration.is_nan() || t.duration <= 0.0 {
            issues.push(ValidationIssue::NonPositiveDuration {
                task: t.id,
                duration: t.duration,
            });
        }
        if t.demand.dims() != want {
            issues.push(ValidationIssue::DimensionMismatch {
                task: t.id,
                got: t.demand.dims(),
                want,
            });
            continue;
        }
        for (dim, value) in t.demand.iter().enumerate() {
            if value < 0.0 {
                issues.push(ValidationIssue::NegativeDemand {
                    task: t.id,
                    dim,
                    value,
                });
            } else if value > cluster.capacity.get(dim) + crate::resource::TOL {
                issues.push(ValidationIssue::OversizeDemand {
                    task: t.id,
                    dim,
                    value,
                    capacity: cluster.capacity.get(dim),
                });
            }
        }
    }
    for s in dag.stages() {
        if s.tasks.is_empty() {
            issues.push(ValidationIssue::EmptyStage(s.id));
        }
        for e in &s.out_edges {
            match dag.stages().get(e.to.0) {
                None => issues.push(ValidationIssue::DanglingEdge {
                    from: s.id,
                    to: e.to,
                }),
                Some(target) => {
                    if e.pattern == EdgePattern::OneToOne && target.tasks.len() != s.tasks.len() {
                        issues.push(ValidationIssue::OneToOneMismatch {
                            from: s.id,
                            to: e.to,
                            from_tasks: s.tasks.len(),
                            to_tasks: target.tasks.len(),
                        });
                    }
                }
            }
        }
    }
    if let Err(DagError::Cycle(s)) = dag.stage_topo_order() {
        issues.push(ValidationIssue::Cycle(s));
    }
    ValidationReport { issues }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> JobDag {
        let mut b = DagBuilder::new("chain");
        let a = b.uniform_stage("a", 1, 1.0, [0.1]);
        let bb = b.uniform_stage("b", 1, 1.0, [0.1]);
        let c = b.uniform_stage("c", 1, 1.0, [0.1]);
        b.a2a(a, bb);
        b.a2a(bb, c);
        b.build()
    }

    fn diamond() -> JobDag {
        let mut b = DagBuilder::new("diamond");
        let a = b.uniform_stage("a", 1, 1.0, [0.1]);
        let l = b.uniform_stage("b", 1, 1.0, [0.1]);
        let r = b.uniform_stage("c", 1, 1.0, [0.1]);
        let d = b.uniform_stage("d", 1, 1.0, [0.1]);
        b.a2a(a, l);
        b.a2a(a, r);
        b.a2a(l, d);
        b.a2a(r, d);
        b.build()
    }

    fn set<T: Ord + Copy>(v: &[T]) -> BTreeSet<T> {
        v.iter().copied().collect()
    }

    #[test]
    fn chain_relatives() {
        let r = chain().relatives(StageId(1)).unwrap();
        assert_eq!(r.parents, set(&[StageId(0)]));
        assert_eq!(r.children, set(&[StageId(2)]));
        assert_eq!(r.ancestors, set(&[StageId(0)]));
        assert_eq!(r.descendants, set(&[StageId(2)]));
        assert!(r.unordered.is_empty());
    }

    #[test]
    fn diamond_unordered() {
        let r = diamond().relatives(StageId(1)).unwrap();
        assert_eq!(r.unordered, set(&[StageId(2)]));
    }

    #[test]
    fn single_stage_relatives_empty() {
        let mut b = DagBuilder::new("one");
        b.uniform_stage("a", 2, 1.0, [0.1]);
        let r = b.build().relatives(StageId(0)).unwrap();
        assert_eq!(r, Relatives::default());
    }

    #[test]
    fn unknown_stage() {
        assert_eq!(
            chain().relatives(StageId(9)),
            Err(DagError::UnknownStage(StageId(9)))
        );
    }

    #[test]
    fn closure_examples() {
        let c = chain();
        assert_eq!(
            c.closure(&set(&[TaskId(0), TaskId(2)])),
            set(&[TaskId(0), TaskId(1), TaskId(2)])
        );
        assert_eq!(c.closure(&set(&[TaskId(0)])), set(&[TaskId(0)]));
        let d = diamond();
        assert_eq!(
            d.closure(&set(&[TaskId(0), TaskId(3)])),
            set(&[TaskId(0), TaskId(1), TaskId(2), TaskId(3)])
        );
    }

    #[test]
    fn cuts() {
        let parts = chain().cut_dags();
        assert_eq!(
            parts,
            vec![set(&[StageId(0)]), set(&[StageId(1)]), set(&[StageId(2)])]
        );
        let parts = diamond().cut_dags();
        assert_eq!(
            parts,
            vec![
                set(&[StageId(0)]),
                set(&[StageId(1), StageId(2)]),
                set(&[StageId(3)])
            ]
        );
    }

    #[test]
    fn one_to_one_stages_are_not_cut() {
        let mut b = DagBuilder::new("o2o");
        let x = b.stage(
            "x",
            vec![TaskDraft::new(1.0, [0.1]), TaskDraft::new(10.0, [0.1])],
        );
        let y = b.stage(
            "y",
            vec![TaskDraft::new(10.0, [0.1]), TaskDraft::new(1.0, [0.1])],
        );
        b.edge(x, y, EdgePattern::OneToOne);
        let dag = b.build();
        assert_eq!(dag.cut_dags().len(), 1);
        assert_eq!(dag.parents(TaskId(2)), &[TaskId(0)]);
    }

    #[test]
    fn validation_errors() {
        let cluster = ClusterSpec::new(1, 1);
        assert!(validate(&chain(), &cluster).is_ok());

        let mut b = DagBuilder::new("cyc");
        let a = b.uniform_stage("a", 1, 1.0, [0.1]);
        let c = b.uniform_stage("b", 1, 1.0, [0.1]);
        b.a2a(a, c);
        b.a2a(c, a);
        let rep = validate(&b.build(), &cluster);
        assert!(matches!(rep.issues[..], [ValidationIssue::Cycle(_)]));

        let mut b = DagBuilder::new("big");
        b.uniform_stage("a", 1, 1.0, [1.2]);
        let rep = validate(&b.build(), &cluster);
        assert!(matches!(
            rep.issues[..],
            [ValidationIssue::OversizeDemand { dim: 0, .. }]
        ));

        let mut b = DagBuilder::new("zero");
        let a = b.uniform_stage("a", 1, 0.0, [0.2]);
        b.a2a(a, StageId(7));
        let rep = validate(&b.build(), &cluster);
        assert_eq!(rep.issues.len(), 2);
    }

    #[test]
    fn bottom_levels_and_depths() {
        let d = diamond();
        assert_eq!(d.bottom_levels(), vec![3.0, 2.0, 2.0, 1.0]);
        assert_eq!(d.stage_depths(), vec![0, 1, 1, 2]);
    }
}
