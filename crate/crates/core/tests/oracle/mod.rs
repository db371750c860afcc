//! Exhaustive optimum for tiny jobs, and a serial list scheduler for
//! building witness schedules.
#![allow(dead_code)]

use dagsched_core::space::VirtualSpace;
use dagsched_core::{ClusterSpec, JobDag, Placement, ResourceVector, TaskId};
use std::collections::HashMap;

const QUANTUM: f64 = 1e-9;

#[derive(Clone, PartialEq, Eq, Hash)]
struct Key {
    done: u64,
    started: u64,
    running: Vec<(usize, usize, i64)>,
}

struct Search<'a> {
    dag: &'a JobDag,
    cluster: &'a ClusterSpec,
    memo: HashMap<Key, f64>,
}

/// Optimal makespan by branching, at time zero and at every completion,
/// over every set of ready tasks to start and every machine assignment.
pub fn brute_force_opt(dag: &JobDag, cluster: &ClusterSpec) -> f64 {
    let n = dag.task_count();
    assert!(n <= 63, "too many tasks for the exhaustive search");
    let mut s = Search {
        dag,
        cluster,
        memo: HashMap::new(),
    };
    s.best(0, 0, Vec::new())
}

impl Search<'_> {
    /// Least remaining time to finish, given `running` as (task, machine, time left).
    fn best(&mut self, done: u64, started: u64, running: Vec<(usize, usize, f64)>) -> f64 {
        let n = self.dag.task_count();
        if done.count_ones() as usize == n {
            return 0.0;
        }
        let mut key_run: Vec<(usize, usize, i64)> = running
            .iter()
            .map(|&(t, m, left)| (t, m, (left / QUANTUM).round() as i64))
            .collect();
        key_run.sort_unstable();
        let key = Key {
            done,
            started,
            running: key_run,
        };
        if let Some(v) = self.memo.get(&key) {
            return *v;
        }
        let ready: Vec<usize> = (0..n)
            .filter(|&t| started & (1 << t) == 0)
            .filter(|&t| {
                self.dag
                    .parents(TaskId(t))
                    .iter()
                    .all(|p| done & (1 << p.0) != 0)
            })
            .collect();
        let mut used = vec![ResourceVector::zeros(self.cluster.dims()); self.cluster.machines];
        for &(t, m, _) in &running {
            used[m].add_assign(&self.dag.task(TaskId(t)).demand);
        }
        let mut best = f64::INFINITY;
        let mut chosen = Vec::new();
        self.assign(
            &ready,
            0,
            &mut used,
            &mut chosen,
            done,
            started,
            &running,
            &mut best,
        );
        self.memo.insert(key, best);
        best
    }

    #[allow(clippy::too_many_arguments)]
    fn assign(
        &mut self,
        ready: &[usize],
        i: usize,
        used: &mut Vec<ResourceVector>,
        chosen: &mut Vec<(usize, usize)>,
        done: u64,
        started: u64,
        running: &[(usize, usize, f64)],
        best: &mut f64,
    ) {
        if i == ready.len() {
            if running.is_empty() && chosen.is_empty() {
                return;
            }
            let mut next: Vec<(usize, usize, f64)> = running.to_vec();
            let mut now_started = started;
            for &(t, m) in chosen.iter() {
                next.push((t, m, self.dag.task(TaskId(t)).duration));
                now_started |= 1 << t;
            }
            let step = next.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
            let mut now_done = done;
            let mut rest = Vec::new();
            for (t, m, left) in next {
                if left - step <= QUANTUM {
                    now_done |= 1 << t;
                } else {
                    rest.push((t, m, left - step));
                }
            }
            let v = step + self.best(now_done, now_started, rest);
            if v < *best {
                *best = v;
            }
            return;
        }
        self.assign(ready, i + 1, used, chosen, done, started, running, best);
        let t = ready[i];
        let demand = self.dag.task(TaskId(t)).demand.clone();
        for m in 0..used.len() {
            // Machines with identical load are interchangeable.
            if used[..m].iter().any(|u| u == &used[m]) {
                continue;
            }
            if !demand.plus(&used[m]).fits_within(&self.cluster.capacity) {
                continue;
            }
            used[m].add_assign(&demand);
            chosen.push((t, m));
            self.assign(ready, i + 1, used, chosen, done, started, running, best);
            chosen.pop();
            used[m].sub_assign(&demand);
        }
    }
}

/// Serial schedule: each task in `order` (which must be topological) goes
/// at the earliest time after its parents where it fits.
pub fn list_schedule(dag: &JobDag, cluster: &ClusterSpec, order: &[TaskId]) -> Vec<Placement> {
    let mut space = VirtualSpace::new(cluster.machines, cluster.capacity.clone()).unwrap();
    for &t in order {
        let spec = dag.task(t);
        let ready = dag
            .parents(t)
            .iter()
            .map(|p| space.placement(*p).expect("order is topological").end)
            .fold(0.0, f64::max);
        let p = space.earliest_fit(spec, ready).unwrap();
        space.commit(spec, p).unwrap();
    }
    let mut out: Vec<Placement> = space.placements().copied().collect();
    out.sort_by_key(|p| p.task);
    out
}
