//! Finite model of a Dedekind-complete vector lattice with strong unit.
//!
//! Elements are real vectors of a fixed dimension, ordered componentwise.
//! The strong unit is the all-ones vector, so the smallest `c` with
//! `|x| <= c e` is the max-norm of `x`. A `LatticeVector` also serves as a
//! sample ensemble: component `i` is the value of a random variable on
//! the `i`-th Monte Carlo draw.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeVector {
    values: Vec<f64>,
}

impl LatticeVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("lattice dimension must be >= 1".into()));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { values })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "lattice dimension must be >= 1");
        Self { values: vec![0.0; dim] }
    }

    /// The strong unit `e`.
    pub fn unit(dim: usize) -> Self {
        assert!(dim >= 1, "lattice dimension must be >= 1");
        Self { values: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { left: self.dim(), right: other.dim() });
        }
        Ok(())
    }

    fn zip_with(&self, other: &Self, op: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self {
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| op(a, b)).collect(),
        })
    }

    fn map(&self, op: impl Fn(f64) -> f64) -> Self {
        Self { values: self.values.iter().map(|&v| op(v)).collect() }
    }

    pub fn negate(&self) -> Self {
        self.map(|v| -v)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// Positive part `x ∨ 0`.
    pub fn positive_part(&self) -> Self {
        self.map(|v| v.max(0.0))
    }

    /// Negative part `(-x) ∨ 0`.
    pub fn negative_part(&self) -> Self {
        self.map(|v| (-v).max(0.0))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.dim() as f64
    }
}

/// Lattice supremum (componentwise max).
pub fn join(x: &LatticeVector, y: &LatticeVector) -> Result<LatticeVector> {
    x.zip_with(y, f64::max)
}

/// Lattice infimum (componentwise min).
pub fn meet(x: &LatticeVector, y: &LatticeVector) -> Result<LatticeVector> {
    x.zip_with(y, f64::min)
}

/// `|x| = x ∨ (-x)`.
pub fn abs_val(x: &LatticeVector) -> LatticeVector {
    x.map(|v| v.max(-v))
}

/// Componentwise `x <= y`. The order is partial: both `leq(x, y)` and
/// `leq(y, x)` can be false.
pub fn leq(x: &LatticeVector, y: &LatticeVector) -> Result<bool> {
    x.check_dim(y)?;
    Ok(x.values.iter().zip(&y.values).all(|(a, b)| a <= b))
}

/// Smallest `c >= 0` with `|x| <= c e`.
pub fn unit_dominance(x: &LatticeVector) -> f64 {
    x.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Finite stand-in for an (o)-sequence: a non-increasing ladder of positive
/// reals whose last rung is at or below an explicit tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OSequenceLadder {
    values: Vec<f64>,
    tolerance: f64,
}

impl OSequenceLadder {
    pub fn new(values: Vec<f64>, tolerance: f64) -> Result<Self> {
        let err = Error::InvalidLadder { tolerance };
        if !(tolerance > 0.0 && tolerance.is_finite()) || values.is_empty() {
            return Err(err);
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(err);
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(err);
        }
        if *values.last().unwrap() > tolerance {
            return Err(err);
        }
        Ok(Self { values, tolerance })
    }

    /// Ladder `start, start·ratio, ...` with `rungs` entries; the tolerance is the last rung.
    pub fn geometric(start: f64, ratio: f64, rungs: usize) -> Result<Self> {
        if !(ratio > 0.0 && ratio <= 1.0) || rungs == 0 {
            return Err(Error::InvalidParameter("geometric ladder needs 0 < ratio <= 1 and rungs >= 1".into()));
        }
        let values: Vec<f64> = (0..rungs).map(|p| start * ratio.powi(p as i32)).collect();
        let tolerance = *values.last().unwrap();
        Self::new(values, tolerance)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
