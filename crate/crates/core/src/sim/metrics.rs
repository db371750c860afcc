//! Per-run results.

use super::fairness::jain_index;
use crate::dag::TaskId;
use serde::Serialize;
use std::collections::BTreeSet;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JobResult {
    pub id: String,
    pub group: u32,
    pub arrival: f64,
    pub completion: f64,
    pub jct: f64,
}

/// One matcher decision.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LaunchRecord {
    pub time: f64,
    pub job: usize,
    pub group: u32,
    pub task: TaskId,
    pub machine: usize,
    /// False when the task was overbooked onto the machine.
    pub fits: bool,
    /// Group with the largest deficit among groups that had runnable work.
    pub leader: Option<u32>,
    pub leader_deficit: f64,
    /// Largest deficit over every active group.
    pub max_deficit: f64,
}

/// A finished task execution.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaskRun {
    pub job: usize,
    pub group: u32,
    pub task: TaskId,
    pub machine: usize,
    pub start: f64,
    pub end: f64,
    /// Largest demand entry, used as the allocation weight for fairness.
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JainWindow {
    pub window: f64,
    pub index: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunMetrics {
    pub scheduler: String,
    pub seed: u64,
    pub jobs: Vec<JobResult>,
    pub makespan: f64,
    pub jain: Vec<JainWindow>,
    #[serde(skip)]
    pub launches: Vec<LaunchRecord>,
    #[serde(skip)]
    pub runs: Vec<TaskRun>,
}

impl RunMetrics {
    pub fn jcts(&self) -> Vec<f64> {
        self.jobs.iter().map(|j| j.jct).collect()
    }

    pub fn median_jct(&self) -> f64 {
        let mut v = self.jcts();
        v.sort_by(f64::total_cmp);
        percentile(&v, 50.0)
    }
}

/// Nearest-rank percentile of an ascending slice; NaN when empty.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Mean Jain index over consecutive windows of length `window`, counting in
/// each window only the groups with a job in flight.
pub fn windowed_jain(jobs: &[JobResult], runs: &[TaskRun], window: f64, horizon: f64) -> f64 {
    let groups: BTreeSet<u32> = jobs.iter().map(|j| j.group).collect();
    let mut total = 0.0;
    let mut count = 0usize;
    let mut start = 0.0;
    while start < horizon {
        let end = start + window;
        let active: Vec<u32> = groups
            .iter()
            .copied()
            .filter(|g| {
                jobs.iter()
                    .any(|j| j.group == *g && j.arrival < end && j.completion > start)
            })
            .collect();
        if !active.is_empty() {
            let alloc: Vec<f64> = active
                .iter()
                .map(|g| {
                    runs.iter()
                        .filter(|r| r.group == *g)
                        .map(|r| (r.end.min(end) - r.start.max(start)).max(0.0) * r.weight)
                        .sum()
                })
                .collect();
            total += jain_index(&alloc);
            count += 1;
        }
        start = end;
    }
    if count == 0 {
        1.0
    } else {
        total / count as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 50.0), 2.0);
        assert_eq!(percentile(&v, 75.0), 3.0);
        assert_eq!(percentile(&v, 90.0), 4.0);
        assert_eq!(percentile(&v, 0.0), 1.0);
    }
}
