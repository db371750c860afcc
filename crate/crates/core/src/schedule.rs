//! Concrete task placements and a checker shared by every scheduler.

use crate::cluster::ClusterSpec;
use crate::dag::{JobDag, TaskId};
use crate::resource::ResourceVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PLACEMENT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub task: TaskId,
    pub machine: usize,
    pub begin: f64,
    pub end: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleViolation {
    #[error("task {0} is not placed")]
    Missing(TaskId),
    #[error("task {0} is placed twice")]
    Duplicate(TaskId),
    #[error("task {task} runs for {got}, expected {want}")]
    WrongDuration { task: TaskId, got: f64, want: f64 },
    #[error("task {child} begins at {begin} before parent {parent} ends at {end}")]
    Dependency {
        parent: TaskId,
        child: TaskId,
        end: f64,
        begin: f64,
    },
    #[error("machine {machine} dimension {dim} reaches {load} at time {time}")]
    Capacity {
        machine: usize,
        dim: usize,
        time: f64,
        load: f64,
    },
    #[error("task {task} placed on machine {machine} of {machines}")]
    NoSuchMachine {
        task: TaskId,
        machine: usize,
        machines: usize,
    },
}

/// Latest end minus earliest begin.
pub fn span(placements: &[Placement]) -> f64 {
    if placements.is_empty() {
        return 0.0;
    }
    let lo = placements
        .iter()
        .map(|p| p.begin)
        .fold(f64::INFINITY, f64::min);
    let hi = placements
        .iter()
        .map(|p| p.end)
        .fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

/// Check that `placements` cover every task once with its own duration,
/// respect task-level dependencies and never exceed `ceiling` times the
/// machine capacity in any dimension.
pub fn check_schedule(
    dag: &JobDag,
    cluster: &ClusterSpec,
    placements: &[Placement],
    ceiling: &ResourceVector,
) -> Result<(), ScheduleViolation> {
    let mut by_task: Vec<Option<&Placement>> = vec![None; dag.task_count()];
    for p in placements {
        if p.machine >= cluster.machines {
            return Err(ScheduleViolation::NoSuchMachine {
                task: p.task,
                machine: p.machine,
                machines: cluster.machines,
            });
        }
        let slot = &mut by_task[p.task.0];
        if slot.is_some() {
            return Err(ScheduleViolation::Duplicate(p.task));
        }
        *slot = Some(p);
        let want = dag.task(p.task).duration;
        if ((p.end - p.begin) - want).abs() > 1e-6 * want.max(1.0) {
            return Err(ScheduleViolation::WrongDuration {
                task: p.task,
                got: p.end - p.begin,
                want,
            });
        }
    }
    for t in dag.task_ids() {
        let Some(child) = by_task[t.0] else {
            return Err(ScheduleViolation::Missing(t));
        };
        for &parent in dag.parents(t) {
            let p = by_task[parent.0].expect("checked above");
            if child.begin + 1e-7 < p.end {
                return Err(ScheduleViolation::Dependency {
                    parent,
                    child: t,
                    end: p.end,
                    begin: child.begin,
                });
            }
        }
    }
    let limit = cluster.capacity.times(ceiling);
    for m in 0..cluster.machines {
        let mut begins: Vec<&Placement> = placements.iter().filter(|p| p.machine == m).collect();
        let mut ends = begins.clone();
        begins.sort_by(|a, b| a.begin.total_cmp(&b.begin));
        ends.sort_by(|a, b| a.end.total_cmp(&b.end));
        let mut ended = 0;
        let mut load = ResourceVector::zeros(cluster.dims());
        for p in begins {
            // Ends within rounding noise of this begin count as before it.
            while ended < ends.len() && ends[ended].end <= p.begin + 1e-9 {
                load.sub_assign(&dag.task(ends[ended].task).demand);
                ended += 1;
            }
            load.add_assign(&dag.task(p.task).demand);
            for (dim, (l, c)) in load.iter().zip(limit.iter()).enumerate() {
                if l > c + 1e-7 {
                    return Err(ScheduleViolation::Capacity {
                        machine: m,
                        dim,
                        time: p.begin,
                        load: l,
                    });
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::DagBuilder;

    fn two() -> JobDag {
        let mut b = DagBuilder::new("x");
        let a = b.uniform_stage("a", 1, 1.0, [0.6]);
        let c = b.uniform_stage("b", 1, 2.0, [0.6]);
        b.a2a(a, c);
        b.build()
    }

    fn pl(task: usize, machine: usize, begin: f64, end: f64) -> Placement {
        Placement {
            task: TaskId(task),
            machine,
            begin,
            end,
        }
    }

    #[test]
    fn valid_and_span() {
        let c = ClusterSpec::new(1, 1);
        let p = vec![pl(0, 0, 0.0, 1.0), pl(1, 0, 1.0, 3.0)];
        assert_eq!(
            check_schedule(&two(), &c, &p, &ResourceVector::ones(1)),
            Ok(())
        );
        assert_eq!(span(&p), 3.0);
        assert_eq!(span(&[]), 0.0);
    }

    #[test]
    fn dependency_violation() {
        let c = ClusterSpec::new(2, 1);
        let p = vec![pl(0, 0, 0.0, 1.0), pl(1, 1, 0.5, 2.5)];
        assert!(matches!(
            check_schedule(&two(), &c, &p, &ResourceVector::ones(1)),
            Err(ScheduleViolation::Dependency { .. })
        ));
    }

    #[test]
    fn capacity_violation() {
        let mut b = DagBuilder::new("y");
        b.uniform_stage("a", 2, 1.0, [0.6]);
        let dag = b.build();
        let c = ClusterSpec::new(1, 1);
        let p = vec![pl(0, 0, 0.0, 1.0), pl(1, 0, 0.5, 1.5)];
        assert!(matches!(
            check_schedule(&dag, &c, &p, &ResourceVector::ones(1)),
            Err(ScheduleViolation::Capacity { .. })
        ));
        let back_to_back = vec![pl(0, 0, 0.0, 1.0), pl(1, 0, 1.0, 2.0)];
        assert!(check_schedule(&dag, &c, &back_to_back, &ResourceVector::ones(1)).is_ok());
    }
}
