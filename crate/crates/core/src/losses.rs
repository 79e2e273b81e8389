//! Binary-outcome loss functions and a finite properness check.
//!
//! A loss is *proper* when reporting the true Bernoulli parameter minimizes
//! its expectation. Only proper losses can be recalibrated without giving up
//! accuracy; `is_proper_on_grid` separates the two classes numerically.

use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_outcome, check_probability, Error, Result};

/// Default clamp applied to probabilities before taking logarithms.
pub const DEFAULT_LOG_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    L2,
    Log,
    Misclass,
    L1,
    Hinge,
}

impl LossKind {
    pub const ALL: [LossKind; 5] = [
        LossKind::L2,
        LossKind::Log,
        LossKind::Misclass,
        LossKind::L1,
        LossKind::Hinge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::L2 => "l2",
            LossKind::Log => "log",
            LossKind::Misclass => "misclass",
            LossKind::L1 => "l1",
            LossKind::Hinge => "hinge",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or(Error::InvalidParameter("unknown loss name"))
    }
}

/// A loss together with its supremum over the prediction grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    bound: f64,
    log_clamp: f64,
}

impl LossSpec {
    pub fn new(kind: LossKind) -> Self {
        Self::with_log_clamp(kind, DEFAULT_LOG_CLAMP).expect("default clamp is valid")
    }

    /// `log_clamp` must lie in (0, 0.5); it only affects `LossKind::Log`.
    pub fn with_log_clamp(kind: LossKind, log_clamp: f64) -> Result<Self> {
        if !(log_clamp > 0.0 && log_clamp < 0.5) {
            return Err(Error::InvalidParameter("log_clamp must lie in (0, 0.5)"));
        }
        let bound = match kind {
            LossKind::L2 | LossKind::L1 | LossKind::Misclass => 1.0,
            LossKind::Hinge => 2.0,
            LossKind::Log => -libm::log(log_clamp),
        };
        Ok(Self {
            kind,
            bound,
            log_clamp,
        })
    }

    /// Upper bound B on the loss over all of [0, 1].
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn log_clamp(&self) -> f64 {
        self.log_clamp
    }

    pub fn is_proper(&self) -> bool {
        matches!(self.kind, LossKind::L2 | LossKind::Log | LossKind::Misclass)
    }

    pub fn eval(&self, y: u8, p: f64) -> Result<f64> {
        check_outcome(y)?;
        check_probability("prediction", p)?;
        Ok(self.eval_unchecked(y, p))
    }

    /// Same as [`eval`](Self::eval) without domain checks; callers guarantee
    /// `y` in {0, 1} and `p` in [0, 1].
    pub fn eval_unchecked(&self, y: u8, p: f64) -> f64 {
        let yf = f64::from(y);
        match self.kind {
            LossKind::L2 => (yf - p) * (yf - p),
            LossKind::L1 => libm::fabs(yf - p),
            LossKind::Log => {
                let q = p.clamp(self.log_clamp, 1.0 - self.log_clamp);
                if y == 1 {
                    -libm::log(q)
                } else {
                    -libm::log(1.0 - q)
                }
            }
            LossKind::Misclass => {
                let predicted = u8::from(p >= 0.5);
                f64::from(u8::from(predicted != y))
            }
            LossKind::Hinge => {
                let label = 2.0 * yf - 1.0;
                let score = 2.0 * p - 1.0;
                (1.0 - label * score).max(0.0)
            }
        }
    }

    /// Expected loss of reporting `q` when `y ~ Ber(p)`.
    pub fn expected(&self, p: f64, q: f64) -> Result<f64> {
        check_probability("true probability", p)?;
        check_probability("prediction", q)?;
        Ok(p * self.eval_unchecked(1, q) + (1.0 - p) * self.eval_unchecked(0, q))
    }

    /// Checks properness on the grid {i/N}: every grid point must minimize its
    /// own expected loss over the grid, up to `tol`. A finite certificate only.
    pub fn is_proper_on_grid(&self, grid_size: usize, tol: f64) -> Result<bool> {
        if grid_size < 2 {
            return Err(Error::InvalidParameter("grid size must be at least 2"));
        }
        if tol.is_nan() || tol <= 0.0 {
            return Err(Error::InvalidParameter("tolerance must be positive"));
        }
        let n = grid_size as f64;
        for i in 0..=grid_size {
            let p = i as f64 / n;
            let own = self.expected(p, p)?;
            let best = (0..=grid_size)
                .map(|j| self.expected(p, j as f64 / n))
                .try_fold(f64::INFINITY, |acc, v| v.map(|v| acc.min(v)))?;
            if own > best + tol {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
