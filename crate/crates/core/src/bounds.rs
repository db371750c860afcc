//! Makespan lower bounds for a single job.

use crate::cluster::ClusterSpec;
use crate::dag::{EdgePattern, JobDag, StageId, TaskId, TaskSpec};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

/// Heaviest dimension's `duration * demand` total over the cluster capacity.
pub fn work_of<'a>(tasks: impl IntoIterator<Item = &'a TaskSpec>, cluster: &ClusterSpec) -> f64 {
    let total = cluster.total_capacity();
    let mut sums = vec![0.0; total.dims()];
    for t in tasks {
        for (s, d) in sums.iter_mut().zip(t.demand.iter()) {
            *s += t.duration * d;
        }
    }
    sums.iter()
        .zip(total.iter())
        .map(|(s, c)| s / c)
        .fold(0.0, f64::max)
}

/// Longest duration-weighted task path.
pub fn cp_len(dag: &JobDag) -> f64 {
    dag.bottom_levels().into_iter().fold(0.0, f64::max)
}

pub fn t_work(dag: &JobDag, cluster: &ClusterSpec) -> f64 {
    work_of(dag.tasks(), cluster)
}

/// Stage-path bound: every stage on a path contributes its shortest task
/// except one, which contributes the larger of its work and its longest task.
pub fn mod_cp(dag: &JobDag, cluster: &ClusterSpec) -> f64 {
    let all: BTreeSet<StageId> = dag.stage_ids().collect();
    let groups: Vec<Group> = all
        .iter()
        .map(|&s| Group {
            members: vec![s],
            parents: dag.stage_parents(s).iter().copied().collect(),
            children: dag.stage_children(s).iter().copied().collect(),
        })
        .collect();
    path_bound(dag, cluster, &groups, false)
}

/// Bounds for one totally ordered part of the job.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartBound {
    pub stages: Vec<StageId>,
    pub cp_len: f64,
    pub t_work: f64,
    pub mod_cp: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub cp_len: f64,
    pub t_work: f64,
    pub mod_cp: f64,
    pub new_lb: f64,
    pub parts: Vec<PartBound>,
}

/// Sum over the totally ordered parts of the best bound inside each part.
pub fn new_lb(dag: &JobDag, cluster: &ClusterSpec) -> BoundReport {
    let cp = cp_len(dag);
    let tw = t_work(dag, cluster);
    let mcp = mod_cp(dag, cluster);
    let parts: Vec<PartBound> = dag
        .cut_dags()
        .into_iter()
        .map(|part| part_bound(dag, cluster, &part))
        .collect();
    let total: f64 = parts.iter().map(|p| p.bound).sum();
    BoundReport {
        cp_len: cp,
        t_work: tw,
        mod_cp: mcp,
        new_lb: total.max(cp).max(tw).max(mcp),
        parts,
    }
}

/// `1 - measure / runtime`.
pub fn gap(runtime: f64, measure: f64) -> f64 {
    1.0 - measure / runtime
}

fn part_bound(dag: &JobDag, cluster: &ClusterSpec, part: &BTreeSet<StageId>) -> PartBound {
    let tasks = dag.tasks_of(part);
    let cp = part_cp_len(dag, &tasks);
    let tw = work_of(tasks.iter().map(|t| dag.task(*t)), cluster);
    let inside = |v: &[StageId]| -> BTreeSet<StageId> {
        v.iter().copied().filter(|s| part.contains(s)).collect()
    };
    let singles: Vec<Group> = part
        .iter()
        .map(|&s| Group {
            members: vec![s],
            parents: inside(dag.stage_parents(s)),
            children: inside(dag.stage_children(s)),
        })
        .collect();
    let plain = path_bound(dag, cluster, &singles, false);
    let mut merged: BTreeMap<(BTreeSet<StageId>, BTreeSet<StageId>), Vec<StageId>> =
        BTreeMap::new();
    for g in &singles {
        merged
            .entry((g.parents.clone(), g.children.clone()))
            .or_default()
            .push(g.members[0]);
    }
    let groups: Vec<Group> = merged
        .into_iter()
        .map(|((parents, children), members)| Group {
            members,
            parents,
            children,
        })
        .collect();
    let refined = path_bound(dag, cluster, &groups, true);
    let mcp = plain.max(refined);
    PartBound {
        stages: part.iter().copied().collect(),
        cp_len: cp,
        t_work: tw,
        mod_cp: mcp,
        bound: cp.max(tw).max(mcp),
    }
}

fn part_cp_len(dag: &JobDag, tasks: &BTreeSet<TaskId>) -> f64 {
    let order = dag.topo_order().expect("acyclic dag");
    let mut level: BTreeMap<TaskId, f64> = BTreeMap::new();
    for &t in order.iter().rev().filter(|t| tasks.contains(t)) {
        let tail = dag
            .children(t)
            .iter()
            .filter_map(|c| level.get(c))
            .fold(0.0, |a: f64, b| a.max(*b));
        level.insert(t, dag.task(t).duration + tail);
    }
    level.into_values().fold(0.0, f64::max)
}

/// Stages treated as one node of the path bound. Parents and children are
/// stage ids; a group's neighbours are the groups holding them.
struct Group {
    members: Vec<StageId>,
    parents: BTreeSet<StageId>,
    children: BTreeSet<StageId>,
}

fn path_bound(dag: &JobDag, cluster: &ClusterSpec, groups: &[Group], substitute: bool) -> f64 {
    let mut owner: BTreeMap<StageId, usize> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        for &s in &g.members {
            owner.insert(s, i);
        }
    }
    let mut base = Vec::with_capacity(groups.len());
    let mut full = Vec::with_capacity(groups.len());
    for g in groups {
        let tasks: Vec<&TaskSpec> = g
            .members
            .iter()
            .flat_map(|s| dag.stage(*s).tasks.iter().map(|t| dag.task(*t)))
            .collect();
        let shortest = tasks
            .iter()
            .map(|t| t.duration)
            .fold(f64::INFINITY, f64::min);
        let longest = tasks.iter().map(|t| t.duration).fold(0.0, f64::max);
        let whole = work_of(tasks.iter().copied(), cluster).max(longest);
        let sandwiched = substitute && all_a2a(dag, g, &owner);
        base.push(if sandwiched { whole } else { shortest });
        full.push(whole);
    }
    // Longest path over groups without (plain) and with one upgrade (best).
    let order = group_topo_order(groups, &owner);
    let mut plain = vec![0.0; groups.len()];
    let mut best = vec![0.0; groups.len()];
    for &g in &order {
        let (mut p_in, mut b_in) = (0.0_f64, 0.0_f64);
        for parent in groups[g].parents.iter().filter_map(|s| owner.get(s)) {
            p_in = p_in.max(plain[*parent]);
            b_in = b_in.max(best[*parent]);
        }
        plain[g] = p_in + base[g];
        best[g] = (b_in + base[g]).max(p_in + full[g]);
    }
    best.into_iter().fold(0.0, f64::max)
}

/// True when every edge into or out of the group, within the owner map, is
/// all-to-all.
fn all_a2a(dag: &JobDag, g: &Group, owner: &BTreeMap<StageId, usize>) -> bool {
    let inside = |s: &StageId| owner.contains_key(s);
    let outgoing = g.members.iter().all(|s| {
        dag.stage(*s)
            .out_edges
            .iter()
            .filter(|e| inside(&e.to))
            .all(|e| e.pattern.is_all_to_all())
    });
    let incoming = g.parents.iter().filter(|p| inside(p)).all(|p| {
        dag.stage(*p)
            .out_edges
            .iter()
            .filter(|e| g.members.contains(&e.to))
            .all(|e| e.pattern != EdgePattern::OneToOne)
    });
    outgoing && incoming
}

fn group_topo_order(groups: &[Group], owner: &BTreeMap<StageId, usize>) -> Vec<usize> {
    let n = groups.len();
    let parent_groups: Vec<BTreeSet<usize>> = groups
        .iter()
        .map(|g| {
            g.parents
                .iter()
                .filter_map(|s| owner.get(s).copied())
                .collect()
        })
        .collect();
    let mut indeg: Vec<usize> = parent_groups.iter().map(BTreeSet::len).collect();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (g, ps) in parent_groups.iter().enumerate() {
        for &p in ps {
            children[p].push(g);
        }
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|g| indeg[*g] == 0).collect();
    let mut out = Vec::with_capacity(n);
    while let Some(g) = ready.pop_first() {
        out.push(g);
        for &c in &children[g] {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                ready.insert(c);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::DagBuilder;

    fn one() -> ClusterSpec {
        ClusterSpec::new(1, 1)
    }

    #[test]
    fn cp_len_examples() {
        let mut b = DagBuilder::new("s");
        b.uniform_stage("x", 1, 5.0, [0.1]);
        assert_eq!(cp_len(&b.build()), 5.0);
        let mut b = DagBuilder::new("c");
        let ids: Vec<_> = [1.0, 2.0, 3.0]
            .iter()
            .map(|d| b.uniform_stage("", 1, *d, [0.1]))
            .collect();
        b.a2a(ids[0], ids[1]);
        b.a2a(ids[1], ids[2]);
        let dag = b.build();
        assert_eq!(cp_len(&dag), 6.0);
        assert_eq!(mod_cp(&dag, &one()), 6.0);
    }

    #[test]
    fn t_work_examples() {
        let mut b = DagBuilder::new("w");
        b.uniform_stage("x", 4, 1.0, [0.5]);
        assert_eq!(t_work(&b.build(), &one()), 2.0);
        let mut b = DagBuilder::new("z");
        b.uniform_stage("x", 2, 1.0, [0.0]);
        assert_eq!(t_work(&b.build(), &one()), 0.0);
    }

    #[test]
    fn mod_cp_single_stage() {
        let mut b = DagBuilder::new("m");
        b.uniform_stage("x", 3, 1.0, [0.6]);
        let dag = b.build();
        assert!((mod_cp(&dag, &one()) - 1.8).abs() < 1e-12);
        let r = new_lb(&dag, &one());
        assert!((r.new_lb - 1.8).abs() < 1e-12);
    }

    #[test]
    fn gap_examples() {
        assert!((gap(10.0, 3.0) - 0.7).abs() < 1e-12);
        assert_eq!(gap(4.0, 4.0), 0.0);
        assert!(gap(4.0, 5.0) < 0.0);
    }

    #[test]
    fn one_to_one_chain_stays_sound() {
        // X tasks last 1 and 10, Y tasks 10 and 1: each pair takes 11.
        let mut b = DagBuilder::new("o");
        let x = b.stage(
            "x",
            vec![
                crate::TaskDraft::new(1.0, [0.1]),
                crate::TaskDraft::new(10.0, [0.1]),
            ],
        );
        let y = b.stage(
            "y",
            vec![
                crate::TaskDraft::new(10.0, [0.1]),
                crate::TaskDraft::new(1.0, [0.1]),
            ],
        );
        b.edge(x, y, EdgePattern::OneToOne);
        let r = new_lb(&b.build(), &ClusterSpec::new(2, 1));
        assert!(r.new_lb <= 11.0 + 1e-9);
        assert_eq!(r.cp_len, 11.0);
    }
}
