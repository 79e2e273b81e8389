//! Baseline (uncalibrated) forecasters.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_outcome, check_probability, Error, Result};

/// Floor on the running score magnitude used for hinge normalization.
pub const SCORE_FLOOR: f64 = 1e-12;

pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + libm::exp(-s))
    } else {
        let e = libm::exp(s);
        e / (1.0 + e)
    }
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearKind {
    /// Logistic loss, probabilities through the sigmoid.
    Logistic,
    /// Hinge loss, probabilities by normalizing scores with their running
    /// maximum magnitude: p = (s + m) / 2m.
    Hinge,
}

/// Online ℓ1-regularized linear model trained by subgradient steps with
/// step size `learning_rate / sqrt(t)`.
///
/// The ℓ1 term uses cumulative-penalty clipping: each weight owes the total
/// shrinkage accrued so far and pays it only when its feature is nonzero,
/// so sparse inputs cost O(nnz) per step and weights can reach exactly 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineLinearForecaster {
    weights: Vec<f64>,
    learning_rate: f64,
    l1_strength: f64,
    kind: LinearKind,
    abs_max: f64,
    steps: u64,
    total_penalty: f64,
    applied_penalty: Vec<f64>,
}

impl OnlineLinearForecaster {
    pub fn new(dim: usize, kind: LinearKind) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "feature dimension must be positive",
            ));
        }
        Ok(Self {
            weights: vec![0.0; dim],
            learning_rate: 0.1,
            l1_strength: 1e-4,
            kind,
            abs_max: 0.0,
            steps: 0,
            total_penalty: 0.0,
            applied_penalty: vec![0.0; dim],
        })
    }

    pub fn with_learning_rate(mut self, rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::InvalidParameter("learning rate must be nonnegative"));
        }
        self.learning_rate = rate;
        Ok(self)
    }

    pub fn with_l1_strength(mut self, strength: f64) -> Result<Self> {
        if !(strength.is_finite() && strength >= 0.0) {
            return Err(Error::InvalidParameter("l1 strength must be nonnegative"));
        }
        self.l1_strength = strength;
        Ok(self)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> LinearKind {
        self.kind
    }

    /// Running max |score| seen by hinge predictions.
    pub fn abs_max(&self) -> f64 {
        self.abs_max
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.weights.len() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                got: x.len(),
            })
        }
    }

    /// Returns `(score, probability)`.
    pub fn predict(&mut self, x: &[f64]) -> Result<(f64, f64)> {
        self.check_dim(x)?;
        let s = dot(&self.weights, x);
        let p = match self.kind {
            LinearKind::Logistic => sigmoid(s),
            LinearKind::Hinge => {
                self.abs_max = self.abs_max.max(s.abs()).max(SCORE_FLOOR);
                ((s + self.abs_max) / (2.0 * self.abs_max)).clamp(0.0, 1.0)
            }
        };
        Ok((s, p))
    }

    pub fn update(&mut self, x: &[f64], y: u8) -> Result<()> {
        self.check_dim(x)?;
        check_outcome(y)?;
        self.steps += 1;
        let eta = self.learning_rate / libm::sqrt(self.steps as f64);
        if eta == 0.0 {
            return Ok(());
        }
        let s = dot(&self.weights, x);
        let slope = match self.kind {
            LinearKind::Logistic => sigmoid(s) - f64::from(y),
            LinearKind::Hinge => {
                let label = 2.0 * f64::from(y) - 1.0;
                if label * s < 1.0 {
                    -label
                } else {
                    0.0
                }
            }
        };
        self.total_penalty += eta * self.l1_strength;
        for ((w, q), &xk) in self
            .weights
            .iter_mut()
            .zip(self.applied_penalty.iter_mut())
            .zip(x)
        {
            if xk == 0.0 {
                continue;
            }
            *w -= eta * slope * xk;
            let before = *w;
            if *w > 0.0 {
                *w = (*w - (self.total_penalty + *q)).max(0.0);
            } else if *w < 0.0 {
                *w = (*w + (self.total_penalty - *q)).min(0.0);
            }
            *q += *w - before;
        }
        Ok(())
    }
}

/// Fixed logistic model σ(w·x); scaling `w` produces over- or
/// under-confident forecasts with the same ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedLogisticForecaster {
    pub weights: Vec<f64>,
}

impl FixedLogisticForecaster {
    pub fn scaled(weights: &[f64], factor: f64) -> Self {
        Self {
            weights: weights.iter().map(|w| w * factor).collect(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                got: x.len(),
            });
        }
        Ok(sigmoid(dot(&self.weights, x)))
    }
}

/// Clairvoyant expert that reports `high` when the upcoming outcome is 1
/// and `low` otherwise: perfectly sharp but miscalibrated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoValueExpert {
    low: f64,
    high: f64,
}

impl Default for TwoValueExpert {
    fn default() -> Self {
        Self {
            low: 0.3,
            high: 0.7,
        }
    }
}

impl TwoValueExpert {
    pub fn new(low: f64, high: f64) -> Result<Self> {
        check_probability("low forecast", low)?;
        check_probability("high forecast", high)?;
        if low >= high {
            return Err(Error::InvalidParameter("low forecast must be below high"));
        }
        Ok(Self { low, high })
    }

    pub fn predict(&self, y_next: u8) -> f64 {
        if y_next == 1 {
            self.high
        } else {
            self.low
        }
    }
}

/// Uninformative forecaster: 0 or 1 with equal probability.
pub fn noise_predict<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random_bool(0.5) {
        1.0
    } else {
        0.0
    }
}
