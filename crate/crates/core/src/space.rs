//! Resource-time canvas used while constructing a schedule offline.
//!
//! Each machine keeps a piecewise-constant usage profile stored as sorted
//! breakpoints. Fit queries sweep the breakpoints, skipping past whichever
//! segment blocked the previous candidate. Times may go negative while
//! placing backwards.

use crate::dag::{TaskId, TaskSpec};
use crate::resource::{ResourceVector, TOL};
use crate::schedule::Placement;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SpaceError {
    #[error("a space needs at least one machine")]
    NoMachines,
    #[error("task {0} does not fit an empty machine")]
    NeverFits(TaskId),
    #[error("placing task {task} on machine {machine} at {begin} exceeds capacity")]
    CapacityViolation {
        task: TaskId,
        machine: usize,
        begin: f64,
    },
    #[error("task {0} is already placed")]
    AlreadyPlaced(TaskId),
}

/// Usage of one machine: `steps[k].1` applies on `[steps[k].0, steps[k+1].0)`,
/// zero before the first step; the last step always carries zero usage.
#[derive(Clone, Debug, PartialEq, Default)]
struct Profile {
    steps: Vec<(f64, ResourceVector)>,
}

impl Profile {
    fn seg_end(&self, k: usize) -> f64 {
        self.steps.get(k + 1).map_or(f64::INFINITY, |s| s.0)
    }

    /// Index of the first segment ending after `t`, i.e. covering `t`.
    fn first_covering(&self, t: f64) -> usize {
        self.steps.partition_point(|s| s.0 <= t).saturating_sub(1)
    }

    fn overloaded(&self, k: usize, demand: &ResourceVector, limit: &ResourceVector) -> bool {
        let u = &self.steps[k].1;
        u.iter()
            .zip(demand.iter())
            .zip(limit.iter())
            .any(|((u, d), l)| u + d > l + TOL)
    }

    /// First segment in `[begin, end)` that cannot take `demand`.
    fn first_block(
        &self,
        begin: f64,
        end: f64,
        demand: &ResourceVector,
        limit: &ResourceVector,
    ) -> Option<usize> {
        if self.steps.is_empty() || end <= self.steps[0].0 + TOL {
            return None;
        }
        let mut k = self.first_covering(begin);
        while k < self.steps.len() && self.steps[k].0 < end - TOL {
            if self.seg_end(k) > begin + TOL && self.overloaded(k, demand, limit) {
                return Some(k);
            }
            k += 1;
        }
        None
    }

    fn last_block(
        &self,
        begin: f64,
        end: f64,
        demand: &ResourceVector,
        limit: &ResourceVector,
    ) -> Option<usize> {
        if self.steps.is_empty() || end <= self.steps[0].0 + TOL {
            return None;
        }
        let mut k = self.first_covering(end - TOL).min(self.steps.len() - 1);
        loop {
            if self.seg_end(k) <= begin + TOL {
                return None;
            }
            if self.steps[k].0 < end - TOL && self.overloaded(k, demand, limit) {
                return Some(k);
            }
            if k == 0 {
                return None;
            }
            k -= 1;
        }
    }

    fn earliest(
        &self,
        demand: &ResourceVector,
        dur: f64,
        not_before: f64,
        limit: &ResourceVector,
    ) -> f64 {
        let mut s = not_before;
        while let Some(k) = self.first_block(s, s + dur, demand, limit) {
            s = self.seg_end(k);
        }
        s
    }

    /// Latest end at or before `not_after`.
    fn latest(
        &self,
        demand: &ResourceVector,
        dur: f64,
        not_after: f64,
        limit: &ResourceVector,
    ) -> f64 {
        let mut e = not_after;
        while let Some(k) = self.last_block(e - dur, e, demand, limit) {
            e = self.steps[k].0;
        }
        e
    }

    fn split_at(&mut self, t: f64, dims: usize) -> usize {
        let idx = self.steps.partition_point(|s| s.0 < t);
        if idx < self.steps.len() && (self.steps[idx].0 - t).abs() <= 1e-12 {
            return idx;
        }
        let usage = if idx == 0 {
            ResourceVector::zeros(dims)
        } else {
            self.steps[idx - 1].1.clone()
        };
        self.steps.insert(idx, (t, usage));
        idx
    }

    fn add(&mut self, begin: f64, end: f64, demand: &ResourceVector) {
        let dims = demand.dims();
        let i = self.split_at(begin, dims);
        let j = self.split_at(end, dims);
        for step in &mut self.steps[i..j] {
            step.1.add_assign(demand);
        }
    }

    fn usage_at(&self, t: f64, dims: usize) -> ResourceVector {
        match self.steps.partition_point(|s| s.0 <= t) {
            0 => ResourceVector::zeros(dims),
            i => self.steps[i - 1].1.clone(),
        }
    }
}

/// Machines times resources times continuous time.
#[derive(Clone, Debug, PartialEq)]
pub struct VirtualSpace {
    capacity: ResourceVector,
    limit: ResourceVector,
    machines: Vec<Profile>,
    placements: BTreeMap<TaskId, Placement>,
}

impl VirtualSpace {
    pub fn new(machines: usize, capacity: ResourceVector) -> Result<Self, SpaceError> {
        if machines == 0 {
            return Err(SpaceError::NoMachines);
        }
        Ok(Self {
            limit: capacity.clone(),
            capacity,
            machines: vec![Profile::default(); machines],
            placements: BTreeMap::new(),
        })
    }

    /// Allow usage up to `ceiling[d] * capacity[d]` in each dimension.
    pub fn with_ceiling(mut self, ceiling: &ResourceVector) -> Self {
        self.limit = self.capacity.times(ceiling);
        self
    }

    pub fn machine_count(&self) -> usize {
        self.machines.len()
    }

    pub fn capacity(&self) -> &ResourceVector {
        &self.capacity
    }

    pub fn is_empty(&self) -> bool {
        self.placements.is_empty()
    }

    pub fn len(&self) -> usize {
        self.placements.len()
    }

    pub fn placement(&self, task: TaskId) -> Option<&Placement> {
        self.placements.get(&task)
    }

    pub fn is_placed(&self, task: TaskId) -> bool {
        self.placements.contains_key(&task)
    }

    /// Placements ordered by task id.
    pub fn placements(&self) -> impl Iterator<Item = &Placement> {
        self.placements.values()
    }

    /// Remaining room on `machine` at instant `t`.
    pub fn free_at(&self, machine: usize, t: f64) -> ResourceVector {
        self.limit
            .minus(&self.machines[machine].usage_at(t, self.capacity.dims()))
    }

    fn check_fits_empty(&self, task: &TaskSpec) -> Result<(), SpaceError> {
        if task.demand.fits_within(&self.limit) {
            Ok(())
        } else {
            Err(SpaceError::NeverFits(task.id))
        }
    }

    /// Smallest begin at or after `not_before` on any machine; ties go to
    /// the lower machine index.
    pub fn earliest_fit(&self, task: &TaskSpec, not_before: f64) -> Result<Placement, SpaceError> {
        self.check_fits_empty(task)?;
        let mut best: Option<Placement> = None;
        for (m, prof) in self.machines.iter().enumerate() {
            let begin = prof.earliest(&task.demand, task.duration, not_before, &self.limit);
            if best.is_none_or(|b| begin < b.begin - TOL) {
                best = Some(Placement {
                    task: task.id,
                    machine: m,
                    begin,
                    end: begin + task.duration,
                });
            }
        }
        Ok(best.expect("at least one machine"))
    }

    /// Largest begin whose end is at or before `not_after`; ties go to the
    /// lower machine index.
    pub fn latest_fit(&self, task: &TaskSpec, not_after: f64) -> Result<Placement, SpaceError> {
        self.check_fits_empty(task)?;
        let mut best: Option<Placement> = None;
        for (m, prof) in self.machines.iter().enumerate() {
            let end = prof.latest(&task.demand, task.duration, not_after, &self.limit);
            let begin = end - task.duration;
            if best.is_none_or(|b| begin > b.begin + TOL) {
                best = Some(Placement {
                    task: task.id,
                    machine: m,
                    begin,
                    end,
                });
            }
        }
        Ok(best.expect("at least one machine"))
    }

    pub fn commit(&mut self, task: &TaskSpec, record: Placement) -> Result<(), SpaceError> {
        if self.placements.contains_key(&task.id) {
            return Err(SpaceError::AlreadyPlaced(task.id));
        }
        let prof = &mut self.machines[record.machine];
        if prof
            .first_block(record.begin, record.end, &task.demand, &self.limit)
            .is_some()
        {
            return Err(SpaceError::CapacityViolation {
                task: task.id,
                machine: record.machine,
                begin: record.begin,
            });
        }
        prof.add(record.begin, record.end, &task.demand);
        self.placements.insert(task.id, record);
        Ok(())
    }

    pub fn min_begin(&self) -> Option<f64> {
        self.placements.values().map(|p| p.begin).reduce(f64::min)
    }

    pub fn max_end(&self) -> Option<f64> {
        self.placements.values().map(|p| p.end).reduce(f64::max)
    }

    /// Latest end minus earliest begin, 0 when empty.
    pub fn schedule_length(&self) -> f64 {
        match (self.min_begin(), self.max_end()) {
            (Some(lo), Some(hi)) => hi - lo,
            _ => 0.0,
        }
    }

    /// Placements shifted so the earliest begin is at `origin`, ordered by task id.
    pub fn placements_from(&self, origin: f64) -> Vec<Placement> {
        let shift = origin - self.min_begin().unwrap_or(0.0);
        self.placements
            .values()
            .map(|p| Placement {
                begin: p.begin + shift,
                end: p.end + shift,
                ..*p
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::StageId;

    fn task(id: usize, duration: f64, demand: f64) -> TaskSpec {
        TaskSpec {
            id: TaskId(id),
            stage: StageId(0),
            duration,
            demand: ResourceVector::from([demand]),
            locality_sensitive: false,
        }
    }

    fn space(m: usize) -> VirtualSpace {
        VirtualSpace::new(m, ResourceVector::ones(1)).unwrap()
    }

    #[test]
    fn create() {
        let s = space(1);
        assert_eq!(s.schedule_length(), 0.0);
        assert!(s.is_empty());
        let s3 = VirtualSpace::new(3, ResourceVector::ones(4)).unwrap();
        let total: f64 = (0..3).map(|m| s3.free_at(m, 0.0).get(0)).sum();
        assert_eq!(total, 3.0);
        assert_eq!(
            VirtualSpace::new(0, ResourceVector::ones(1)),
            Err(SpaceError::NoMachines)
        );
    }

    #[test]
    fn earliest_on_empty() {
        let p = space(1).earliest_fit(&task(0, 2.0, 0.5), 5.0).unwrap();
        assert_eq!((p.begin, p.machine), (5.0, 0));
    }

    #[test]
    fn earliest_after_blocker() {
        let mut s = space(1);
        let blocker = task(0, 4.0, 0.7);
        let r = s.earliest_fit(&blocker, 0.0).unwrap();
        s.commit(&blocker, r).unwrap();
        let p = s.earliest_fit(&task(1, 1.0, 0.5), 0.0).unwrap();
        assert_eq!(p.begin, 4.0);
    }

    #[test]
    fn earliest_prefers_free_machine() {
        let mut s = space(2);
        let blocker = task(0, 4.0, 1.0);
        let r = s.earliest_fit(&blocker, 0.0).unwrap();
        s.commit(&blocker, r).unwrap();
        let p = s.earliest_fit(&task(1, 1.0, 0.5), 0.0).unwrap();
        assert_eq!((p.begin, p.machine), (0.0, 1));
    }

    #[test]
    fn latest_examples() {
        let s = space(1);
        assert_eq!(s.latest_fit(&task(0, 3.0, 0.5), 10.0).unwrap().begin, 7.0);
        assert_eq!(s.latest_fit(&task(0, 3.0, 0.5), 2.0).unwrap().begin, -1.0);

        let mut s = space(1);
        let blocker = task(0, 5.0, 0.8);
        s.commit(
            &blocker,
            Placement {
                task: TaskId(0),
                machine: 0,
                begin: 5.0,
                end: 10.0,
            },
        )
        .unwrap();
        assert_eq!(s.latest_fit(&task(1, 3.0, 0.5), 10.0).unwrap().begin, 2.0);
    }

    #[test]
    fn never_fits() {
        assert_eq!(
            space(1).earliest_fit(&task(3, 1.0, 1.5), 0.0),
            Err(SpaceError::NeverFits(TaskId(3)))
        );
    }

    #[test]
    fn commit_clone_and_stale() {
        let mut s = space(1);
        let a = task(0, 2.0, 0.6);
        let r = s.earliest_fit(&a, 0.0).unwrap();
        let copy = s.clone();
        s.commit(&a, r).unwrap();
        assert!((s.free_at(0, 1.0).get(0) - 0.4).abs() < 1e-12);
        assert!(copy.is_empty());
        assert_eq!(copy.free_at(0, 1.0).get(0), 1.0);

        let b = task(1, 2.0, 0.6);
        let stale = copy.earliest_fit(&b, 0.0).unwrap();
        assert!(matches!(
            s.commit(&b, stale),
            Err(SpaceError::CapacityViolation { .. })
        ));
    }

    #[test]
    fn lengths() {
        let mut s = space(2);
        s.commit(
            &task(0, 7.0, 0.1),
            Placement {
                task: TaskId(0),
                machine: 0,
                begin: 0.0,
                end: 7.0,
            },
        )
        .unwrap();
        assert_eq!(s.schedule_length(), 7.0);
        let mut s = space(2);
        s.commit(
            &task(0, 3.0, 0.1),
            Placement {
                task: TaskId(0),
                machine: 0,
                begin: 0.0,
                end: 3.0,
            },
        )
        .unwrap();
        s.commit(
            &task(1, 4.0, 0.1),
            Placement {
                task: TaskId(1),
                machine: 1,
                begin: 5.0,
                end: 9.0,
            },
        )
        .unwrap();
        assert_eq!(s.schedule_length(), 9.0);
    }

    #[test]
    fn ceiling_allows_overbooking() {
        let mut s = space(1).with_ceiling(&ResourceVector::from([1.1]));
        let a = task(0, 1.0, 0.55);
        let r = s.earliest_fit(&a, 0.0).unwrap();
        s.commit(&a, r).unwrap();
        assert_eq!(s.earliest_fit(&task(1, 1.0, 0.55), 0.0).unwrap().begin, 0.0);
    }

    #[test]
    fn hole_between_blockers() {
        let mut s = space(1);
        s.commit(
            &task(0, 1.0, 1.0),
            Placement {
                task: TaskId(0),
                machine: 0,
                begin: 0.0,
                end: 1.0,
            },
        )
        .unwrap();
        s.commit(
            &task(1, 1.0, 1.0),
            Placement {
                task: TaskId(1),
                machine: 0,
                begin: 3.0,
                end: 4.0,
            },
        )
        .unwrap();
        assert_eq!(s.earliest_fit(&task(2, 2.0, 0.5), 0.0).unwrap().begin, 1.0);
        assert_eq!(s.earliest_fit(&task(2, 2.5, 0.5), 0.0).unwrap().begin, 4.0);
        assert_eq!(s.latest_fit(&task(2, 2.0, 0.5), 4.0).unwrap().begin, 1.0);
        assert_eq!(s.latest_fit(&task(2, 2.5, 0.5), 4.0).unwrap().begin, -2.5);
    }
}
