//! Fixed-dimension resource quantities.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Absolute tolerance used for every capacity comparison.
pub const TOL: f64 = 1e-9;

/// Number of dimensions used when nothing else is configured
/// (cores, memory, network, disk).
pub const DEFAULT_DIMS: usize = 4;

/// Demand or capacity vector, one entry per resource dimension, expressed as
/// a fraction of a single machine.
#[derive(Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct ResourceVector(Vec<f64>);

impl ResourceVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(dims: usize) -> Self {
        Self(vec![0.0; dims])
    }

    pub fn splat(dims: usize, v: f64) -> Self {
        Self(vec![v; dims])
    }

    pub fn ones(dims: usize) -> Self {
        Self::splat(dims, 1.0)
    }

    /// Vector with `v` in dimension `dim` and zero elsewhere.
    pub fn unit(dims: usize, dim: usize, v: f64) -> Self {
        let mut out = Self::zeros(dims);
        out.0[dim] = v;
        out
    }

    pub fn dims(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }

    pub fn get(&self, dim: usize) -> f64 {
        self.0[dim]
    }

    pub fn set(&mut self, dim: usize, v: f64) {
        self.0[dim] = v;
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.iter().zip(other.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn l1(&self) -> f64 {
        self.iter().map(f64::abs).sum()
    }

    pub fn max_entry(&self) -> f64 {
        self.iter().fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.iter().all(|v| v.abs() <= TOL)
    }

    /// True when every entry of `self` is at most the matching entry of `limit`.
    pub fn fits_within(&self, limit: &Self) -> bool {
        self.iter().zip(limit.iter()).all(|(a, b)| a <= b + TOL)
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.0.iter_mut().zip(other.iter()) {
            *a += b;
        }
    }

    pub fn sub_assign(&mut self, other: &Self) {
        for (a, b) in self.0.iter_mut().zip(other.iter()) {
            *a -= b;
        }
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn minus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.sub_assign(other);
        out
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self(self.iter().map(|v| v * k).collect())
    }

    /// Entry-wise product.
    pub fn times(&self, other: &Self) -> Self {
        Self(self.iter().zip(other.iter()).map(|(a, b)| a * b).collect())
    }

    /// Clamp every entry at zero from below.
    pub fn clamp_nonneg(&self) -> Self {
        Self(self.iter().map(|v| v.max(0.0)).collect())
    }
}

impl fmt::Debug for ResourceVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl From<Vec<f64>> for ResourceVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl<const N: usize> From<[f64; N]> for ResourceVector {
    fn from(v: [f64; N]) -> Self {
        Self(v.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_and_norms() {
        let a = ResourceVector::from([0.5, 0.25]);
        let b = ResourceVector::from([1.0, 1.0]);
        assert_eq!(a.dot(&b), 0.75);
        assert_eq!(a.l1(), 0.75);
        assert_eq!(a.max_entry(), 0.5);
    }

    #[test]
    fn fit_uses_tolerance() {
        let a = ResourceVector::from([0.1 + 0.2, 0.7]);
        let cap = ResourceVector::from([0.3, 0.7]);
        assert!(a.fits_within(&cap));
        assert!(!ResourceVector::from([0.31, 0.0]).fits_within(&cap));
    }

    #[test]
    fn clamp() {
        let v = ResourceVector::from([0.2, -0.1]).clamp_nonneg();
        assert_eq!(v.as_slice(), &[0.2, 0.0]);
    }
}
