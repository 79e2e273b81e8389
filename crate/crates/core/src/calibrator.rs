//! Online calibration over the grid {i/N} by internal regret minimization.
//!
//! Each grid value i/N is an expert with loss (y - i/N)^2. The calibrator
//! keeps the cumulative internal regret R[i][j] of every switch i -> j under
//! expected play and, each round, plays a distribution μ balancing the
//! positive regrets:
//!
//! ```text
//! μ_j · Σ_k R⁺[j][k] = Σ_i μ_i · R⁺[i][j]    for every j
//! ```
//!
//! which is the stationary law of the chain `Q = I + (R⁺ - diag S) / c`,
//! `S_i = Σ_j R⁺[i][j]`, `c = max_i S_i`. Playing such a μ keeps every
//! internal regret sublinear, which in turn makes the empirical frequency at
//! each played level converge to that level.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_outcome, Error, Result};
use crate::rng;

/// Residual tolerance ‖μ − μQ‖∞ accepted from [`fixed_point`].
pub const FIXED_POINT_TOL: f64 = 1e-8;

/// A probability distribution over grid indices 0..=N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDistribution {
    weights: Vec<f64>,
}

impl GridDistribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter(
                "distribution needs at least one weight",
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter(
                "weights must be finite and nonnegative",
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter("weights must sum to 1"));
        }
        Ok(Self { weights })
    }

    pub fn uniform(levels: usize) -> Self {
        Self {
            weights: vec![1.0 / levels as f64; levels],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Inverse-CDF sample for a uniform draw `u` in [0, 1).
    pub fn sample(&self, u: f64) -> usize {
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, &w) in self.weights.iter().enumerate() {
            if w > 0.0 {
                acc += w;
                last_positive = i;
                if u < acc {
                    return i;
                }
            }
        }
        // rounding left u above the accumulated mass
        last_positive
    }

    pub fn mean_index(&self) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(i, w)| i as f64 * w)
            .sum()
    }
}

fn validate_regrets(positive_regrets: &[f64], levels: usize) -> Result<()> {
    if levels == 0 || positive_regrets.len() != levels * levels {
        return Err(Error::InvalidParameter(
            "regret matrix must be levels x levels",
        ));
    }
    if positive_regrets
        .iter()
        .any(|r| !(r.is_finite() && *r >= 0.0))
    {
        return Err(Error::InvalidParameter(
            "positive regrets must be finite and nonnegative",
        ));
    }
    Ok(())
}

fn off_diagonal_row_sums(positive_regrets: &[f64], levels: usize) -> Vec<f64> {
    positive_regrets
        .chunks_exact(levels)
        .enumerate()
        .map(|(i, row)| row.iter().sum::<f64>() - row[i])
        .collect()
}

/// Row-stochastic transition matrix (row-major) whose stationary laws are the
/// regret-balancing distributions. Rows without positive regret self-loop.
pub fn transition_matrix(positive_regrets: &[f64], levels: usize) -> Result<Vec<f64>> {
    validate_regrets(positive_regrets, levels)?;
    let sums = off_diagonal_row_sums(positive_regrets, levels);
    let scale = sums.iter().copied().fold(0.0, f64::max);
    let mut q = vec![0.0; levels * levels];
    for i in 0..levels {
        for j in 0..levels {
            q[i * levels + j] = if i == j {
                if scale > 0.0 {
                    1.0 - sums[i] / scale
                } else {
                    1.0
                }
            } else if scale > 0.0 {
                positive_regrets[i * levels + j] / scale
            } else {
                0.0
            };
        }
    }
    Ok(q)
}

/// ‖μ − μQ‖∞ for a row-major square `q`.
pub fn stationarity_residual(mu: &[f64], q: &[f64]) -> f64 {
    let n = mu.len();
    (0..n)
        .map(|j| {
            let flow: f64 = (0..n).map(|i| mu[i] * q[i * n + j]).sum();
            (flow - mu[j]).abs()
        })
        .fold(0.0, f64::max)
}

/// Computes a regret-balancing distribution for the `levels x levels`
/// row-major matrix of positive-part regrets.
///
/// Solved directly: the stationary law of every closed communicating class
/// of the positive-regret graph is found by GTH elimination and the classes
/// are mixed by size. An all-zero matrix yields the uniform distribution.
pub fn fixed_point(positive_regrets: &[f64], levels: usize) -> Result<GridDistribution> {
    validate_regrets(positive_regrets, levels)?;
    let sums = off_diagonal_row_sums(positive_regrets, levels);
    if sums.iter().all(|&s| s == 0.0) {
        return Ok(GridDistribution::uniform(levels));
    }
    let mu = closed_class_solution(positive_regrets, levels);
    let q = transition_matrix(positive_regrets, levels)?;
    let residual = stationarity_residual(&mu, &q);
    if residual <= FIXED_POINT_TOL {
        Ok(GridDistribution { weights: mu })
    } else {
        Err(Error::NumericFailure { residual })
    }
}

/// Power iteration from the uniform distribution on the lazy chain
/// (I + Q)/2, stopping once ‖μ − μQ‖∞ ≤ [`FIXED_POINT_TOL`] or after
/// `max_sweeps`. Slow on nearly reducible chains; kept as an independent
/// route to the same fixed points.
pub fn fixed_point_by_iteration(
    positive_regrets: &[f64],
    levels: usize,
    max_sweeps: usize,
) -> Result<GridDistribution> {
    validate_regrets(positive_regrets, levels)?;
    let sums = off_diagonal_row_sums(positive_regrets, levels);
    let scale = sums.iter().copied().fold(0.0, f64::max);
    let mut mu = vec![1.0 / levels as f64; levels];
    if scale == 0.0 {
        return Ok(GridDistribution { weights: mu });
    }
    let mut next = vec![0.0; levels];
    let mut residual = f64::INFINITY;
    for _ in 0..max_sweeps {
        for j in 0..levels {
            next[j] = mu[j] * (1.0 - sums[j] / scale);
        }
        for (i, row) in positive_regrets.chunks_exact(levels).enumerate() {
            let a = mu[i] / scale;
            if a == 0.0 || sums[i] == 0.0 {
                continue;
            }
            for (j, (n, &r)) in next.iter_mut().zip(row).enumerate() {
                if j != i {
                    *n += a * r;
                }
            }
        }
        residual = mu
            .iter()
            .zip(&next)
            .map(|(m, n)| (m - n).abs())
            .fold(0.0, f64::max);
        if residual <= FIXED_POINT_TOL {
            return Ok(GridDistribution { weights: mu });
        }
        let mut total = 0.0;
        for (m, n) in mu.iter_mut().zip(&next) {
            *m = 0.5 * (*m + n);
            total += *m;
        }
        mu.iter_mut().for_each(|m| *m /= total);
    }
    Err(Error::NumericFailure { residual })
}

/// Direct solve: mixes the stationary laws of every closed communicating
/// class of the positive-regret graph, weighted by class size.
fn closed_class_solution(rates: &[f64], levels: usize) -> Vec<f64> {
    let reach = reachability(rates, levels);
    let reaches = |i: usize, j: usize| reach[i * levels + j];

    let mut assigned = vec![false; levels];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for i in 0..levels {
        if assigned[i] {
            continue;
        }
        let closed = (0..levels).all(|j| !reaches(i, j) || reaches(j, i));
        if !closed {
            continue;
        }
        let class: Vec<usize> = (0..levels).filter(|&j| j == i || reaches(i, j)).collect();
        for &j in &class {
            assigned[j] = true;
        }
        classes.push(class);
    }

    let recurrent: usize = classes.iter().map(Vec::len).sum();
    let mut mu = vec![0.0; levels];
    for class in &classes {
        let weight = class.len() as f64 / recurrent as f64;
        let pi = gth_stationary(rates, levels, class);
        for (&state, p) in class.iter().zip(pi) {
            mu[state] += weight * p;
        }
    }
    mu
}

fn reachability(rates: &[f64], levels: usize) -> Vec<bool> {
    let mut reach = vec![false; levels * levels];
    let mut stack = Vec::with_capacity(levels);
    for start in 0..levels {
        stack.clear();
        stack.push(start);
        while let Some(i) = stack.pop() {
            for j in 0..levels {
                if j != i && rates[i * levels + j] > 0.0 && !reach[start * levels + j] {
                    reach[start * levels + j] = true;
                    stack.push(j);
                }
            }
        }
    }
    reach
}

/// Grassmann–Taksar–Heyman elimination on the rates restricted to an
/// irreducible class. Subtraction free, so it stays accurate when rates span
/// many orders of magnitude.
fn gth_stationary(rates: &[f64], levels: usize, class: &[usize]) -> Vec<f64> {
    let m = class.len();
    if m == 1 {
        return vec![1.0];
    }
    let mut a: Vec<f64> = class
        .iter()
        .flat_map(|&i| {
            class
                .iter()
                .map(move |&j| if i == j { 0.0 } else { rates[i * levels + j] })
        })
        .collect();
    for k in (1..m).rev() {
        let s: f64 = a[k * m..k * m + k].iter().sum();
        for i in 0..k {
            a[i * m + k] /= s;
        }
        for i in 0..k {
            let aik = a[i * m + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..k {
                a[i * m + j] += aik * a[k * m + j];
            }
        }
    }
    let mut pi = vec![0.0; m];
    pi[0] = 1.0;
    for k in 1..m {
        pi[k] = (0..k).map(|i| pi[i] * a[i * m + k]).sum();
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    pi
}

/// A prediction awaiting its outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPrediction {
    pub step: u64,
    pub index: usize,
    pub value: f64,
    pub distribution: GridDistribution,
}

/// Calibrated forecaster over {i/N}; predictions and updates must alternate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineCalibrator {
    resolution: usize,
    /// (N+1)x(N+1) row-major cumulative internal regret.
    regret: Vec<f64>,
    counts: Vec<u64>,
    outcome_sums: Vec<u64>,
    steps: u64,
    seed: u64,
    stream: u64,
    pending: Option<GridPrediction>,
}

impl OnlineCalibrator {
    pub fn new(resolution: usize, seed: u64, stream: u64) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::InvalidParameter("resolution must be positive"));
        }
        let levels = resolution + 1;
        Ok(Self {
            resolution,
            regret: vec![0.0; levels * levels],
            counts: vec![0; levels],
            outcome_sums: vec![0; levels],
            steps: 0,
            seed,
            stream,
            pending: None,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn levels(&self) -> usize {
        self.resolution + 1
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn outcome_sums(&self) -> &[u64] {
        &self.outcome_sums
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn pending(&self) -> Option<&GridPrediction> {
        self.pending.as_ref()
    }

    /// Cumulative internal regret of switching plays of level `i` to `j`.
    pub fn regret(&self, i: usize, j: usize) -> f64 {
        self.regret[i * self.levels() + j]
    }

    pub fn regret_matrix(&self) -> &[f64] {
        &self.regret
    }

    pub fn positive_regrets(&self) -> Vec<f64> {
        self.regret.iter().map(|r| r.max(0.0)).collect()
    }

    /// Draws the next prediction. Repeated calls before `update` return the
    /// same prediction.
    pub fn predict(&mut self) -> Result<GridPrediction> {
        if let Some(p) = &self.pending {
            return Ok(p.clone());
        }
        let distribution = fixed_point(&self.positive_regrets(), self.levels())?;
        let u = rng::counter_uniform(self.seed, self.stream, self.steps);
        let index = distribution.sample(u);
        let prediction = GridPrediction {
            step: self.steps,
            index,
            value: index as f64 / self.resolution as f64,
            distribution,
        };
        self.pending = Some(prediction.clone());
        Ok(prediction)
    }

    /// Feeds the outcome for `prediction`, which must be the pending one.
    pub fn update(&mut self, prediction: &GridPrediction, y: u8) -> Result<()> {
        check_outcome(y)?;
        match &self.pending {
            None => return Err(Error::ProtocolOrder("update without a pending prediction")),
            Some(p) if p != prediction => {
                return Err(Error::ProtocolOrder(
                    "update does not match the pending prediction",
                ))
            }
            Some(_) => {}
        }
        let levels = self.levels();
        let n = self.resolution as f64;
        let yf = f64::from(y);
        let losses: Vec<f64> = (0..levels)
            .map(|k| {
                let d = yf - k as f64 / n;
                d * d
            })
            .collect();
        for (i, &mu) in prediction.distribution.weights().iter().enumerate() {
            if mu == 0.0 {
                continue;
            }
            let row = &mut self.regret[i * levels..(i + 1) * levels];
            for (j, r) in row.iter_mut().enumerate() {
                if j != i {
                    *r += mu * (losses[i] - losses[j]);
                }
            }
        }
        self.counts[prediction.index] += 1;
        self.outcome_sums[prediction.index] += u64::from(y);
        self.steps += 1;
        self.pending = None;
        Ok(())
    }

    /// Weighted ℓp distance between level frequencies and the levels themselves.
    pub fn calibration_error(&self, norm_p: u32) -> Result<f64> {
        crate::metrics::grid_calibration_error(
            &self.counts,
            &self.outcome_sums,
            self.resolution,
            norm_p,
        )
    }

    /// Checks the structural invariants; used after loading snapshots.
    pub fn validate(&self) -> Result<()> {
        let levels = self.levels();
        if self.resolution == 0
            || self.regret.len() != levels * levels
            || self.counts.len() != levels
            || self.outcome_sums.len() != levels
        {
            return Err(Error::InvalidParameter(
                "calibrator arrays do not match resolution",
            ));
        }
        if self.counts.iter().sum::<u64>() != self.steps {
            return Err(Error::InvalidParameter("level counts do not sum to steps"));
        }
        if self
            .counts
            .iter()
            .zip(&self.outcome_sums)
            .any(|(n, s)| s > n)
        {
            return Err(Error::InvalidParameter("outcome sum exceeds level count"));
        }
        if (0..levels).any(|i| self.regret[i * levels + i] != 0.0)
            || self.regret.iter().any(|r| !r.is_finite())
        {
            return Err(Error::InvalidParameter("regret matrix is corrupt"));
        }
        if let Some(p) = &self.pending {
            if p.step != self.steps || p.index >= levels || p.distribution.len() != levels {
                return Err(Error::InvalidParameter("pending prediction is stale"));
            }
        }
        Ok(())
    }
}
