use crate::resource::{ResourceVector, DEFAULT_DIMS};
use serde::{Deserialize, Serialize};

/// How a fungible dimension slows tasks down once its load exceeds capacity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Slowdown {
    /// Load `L > 1` makes every task on that dimension progress at `1/L`.
    Linear,
    /// Rate `L^-k`; `k < 1` gives a concave penalty.
    Power(f64),
}

impl Slowdown {
    pub fn rate(self, load: f64) -> f64 {
        if load <= 1.0 {
            return 1.0;
        }
        match self {
            Slowdown::Linear => 1.0 / load,
            Slowdown::Power(k) => load.powf(-k),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverbookPolicy {
    /// Whether the online matcher may overbook at all.
    pub enabled: bool,
    /// Per dimension: true when overbooking only slows tasks (network, disk),
    /// false for hard dimensions (cores, memory).
    pub fungible: Vec<bool>,
    pub slowdown: Slowdown,
}

impl OverbookPolicy {
    /// Cores and memory hard, everything after them fungible.
    pub fn standard(dims: usize) -> Self {
        Self {
            enabled: true,
            fungible: (0..dims).map(|d| d >= 2).collect(),
            slowdown: Slowdown::Linear,
        }
    }

    pub fn disabled(dims: usize) -> Self {
        Self {
            enabled: false,
            ..Self::standard(dims)
        }
    }

    pub fn is_fungible(&self, dim: usize) -> bool {
        self.fungible.get(dim).copied().unwrap_or(false)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub machines: usize,
    /// Per-machine capacity.
    pub capacity: ResourceVector,
    /// Multiplier applied to the packing score of a locality-sensitive task
    /// placed away from its data.
    pub remote_penalty: f64,
    pub overbooking: OverbookPolicy,
}

impl ClusterSpec {
    /// `machines` machines with unit capacity in `dims` dimensions.
    pub fn new(machines: usize, dims: usize) -> Self {
        Self {
            machines,
            capacity: ResourceVector::ones(dims),
            remote_penalty: 0.8,
            overbooking: OverbookPolicy::standard(dims),
        }
    }

    pub fn with_overbooking(mut self, enabled: bool) -> Self {
        self.overbooking.enabled = enabled;
        self
    }

    pub fn dims(&self) -> usize {
        self.capacity.dims()
    }

    /// Capacity summed over all machines.
    pub fn total_capacity(&self) -> ResourceVector {
        self.capacity.scaled(self.machines as f64)
    }
}

impl Default for ClusterSpec {
    fn default() -> Self {
        Self::new(1, DEFAULT_DIMS)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_slowdown() {
        assert_eq!(Slowdown::Linear.rate(0.5), 1.0);
        assert!((Slowdown::Linear.rate(1.25) - 0.8).abs() < 1e-12);
        assert!(Slowdown::Power(0.5).rate(4.0) - 0.5 < 1e-12);
    }

    #[test]
    fn standard_fungibility() {
        let p = OverbookPolicy::standard(4);
        assert_eq!(p.fungible, vec![false, false, true, true]);
        assert!(!p.is_fungible(9));
    }

    #[test]
    fn total_capacity() {
        let c = ClusterSpec::new(3, 2);
        assert_eq!(c.total_capacity().as_slice(), &[3.0, 3.0]);
    }
}
