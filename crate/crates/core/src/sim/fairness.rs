//! Deficit counters and Jain's index.

use crate::resource::ResourceVector;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// What one launch costs its group in the deficit accounting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Fairness {
    /// Every task counts as one slot.
    #[default]
    Slot,
    /// A task counts as its largest demand entry.
    Drf,
}

impl Fairness {
    pub fn weight(self, demand: &ResourceVector) -> f64 {
        match self {
            Fairness::Slot => 1.0,
            Fairness::Drf => demand.max_entry(),
        }
    }
}

/// Per-group deficit counters over the currently active groups, each with
/// an equal fair share. A group that goes inactive is forgotten and starts
/// from zero when it returns.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Deficits {
    counters: BTreeMap<u32, f64>,
}

impl Deficits {
    pub fn activate(&mut self, group: u32) {
        self.counters.entry(group).or_insert(0.0);
    }

    pub fn deactivate(&mut self, group: u32) {
        self.counters.remove(&group);
    }

    pub fn get(&self, group: u32) -> f64 {
        self.counters.get(&group).copied().unwrap_or(0.0)
    }

    pub fn groups(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.counters.iter().map(|(g, d)| (*g, *d))
    }

    pub fn record(&mut self, group: u32, weight: f64) {
        let n = self.counters.len().max(1) as f64;
        let share = 1.0 / n;
        for (g, d) in self.counters.iter_mut() {
            if *g == group {
                *d += weight * (share - 1.0);
            } else {
                *d += weight * share;
            }
        }
    }

    /// Group with the largest counter among `eligible`, lowest id on ties.
    pub fn max_among(&self, eligible: impl Iterator<Item = u32>) -> Option<(u32, f64)> {
        eligible
            .map(|g| (g, self.get(g)))
            .fold(None, |best, (g, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((g, d)),
            })
    }
}

/// `(Σx)² / (N·Σx²)`; 1 when every allocation is zero.
pub fn jain_index(allocations: &[f64]) -> f64 {
    let sum: f64 = allocations.iter().sum();
    let sq: f64 = allocations.iter().map(|x| x * x).sum();
    if sq <= 0.0 {
        return 1.0;
    }
    sum * sum / (allocations.len() as f64 * sq)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jain_examples() {
        assert_eq!(jain_index(&[2.0, 2.0, 2.0]), 1.0);
        assert_eq!(jain_index(&[1.0, 0.0]), 0.5);
        assert!((jain_index(&[3.0, 1.0, 1.0, 1.0]) - 0.75).abs() < 1e-12);
        assert_eq!(jain_index(&[0.0, 0.0]), 1.0);
    }

    #[test]
    fn slot_deficits() {
        let mut d = Deficits::default();
        d.activate(0);
        d.activate(1);
        d.record(0, 1.0);
        assert_eq!((d.get(0), d.get(1)), (-0.5, 0.5));
        d.record(1, 1.0);
        assert_eq!((d.get(0), d.get(1)), (0.0, 0.0));
        assert_eq!(d.max_among([0, 1].into_iter()), Some((0, 0.0)));
    }

    #[test]
    fn drf_weight() {
        assert_eq!(Fairness::Drf.weight(&ResourceVector::from([0.4, 0.7])), 0.7);
        assert_eq!(
            Fairness::Slot.weight(&ResourceVector::from([0.4, 0.7])),
            1.0
        );
    }

    #[test]
    fn inactive_group_resets() {
        let mut d = Deficits::default();
        d.activate(0);
        d.activate(1);
        d.record(0, 1.0);
        d.deactivate(1);
        d.activate(1);
        assert_eq!(d.get(1), 0.0);
    }
}
