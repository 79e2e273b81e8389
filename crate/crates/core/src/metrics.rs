//! Calibration error, calibration curves and regret bookkeeping.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_outcome, check_probability, Error, Result};
use crate::losses::LossSpec;
use crate::recalibrator::bucket_index;

/// Distance from the grid below which a prediction counts as on-grid.
const GRID_SNAP_TOL: f64 = 1e-9;

/// Index `k` with `p == k/N`, if `p` sits on the grid.
pub fn grid_index(p: f64, resolution: usize) -> Option<usize> {
    if !(0.0..=1.0).contains(&p) {
        return None;
    }
    let scaled = p * resolution as f64;
    let k = libm::round(scaled);
    ((scaled - k).abs() <= GRID_SNAP_TOL).then_some(k as usize)
}

fn check_norm(norm_p: u32) -> Result<()> {
    if norm_p == 0 {
        Err(Error::InvalidParameter(
            "calibration norm must be at least 1",
        ))
    } else {
        Ok(())
    }
}

/// Σ_i |ρ(i/N) − i/N|^p · n_i/T over grid levels; empty levels contribute 0.
pub fn grid_calibration_error(
    counts: &[u64],
    outcome_sums: &[u64],
    resolution: usize,
    norm_p: u32,
) -> Result<f64> {
    check_norm(norm_p)?;
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::Empty);
    }
    let n = resolution as f64;
    let t = total as f64;
    Ok(counts
        .iter()
        .zip(outcome_sums)
        .enumerate()
        .filter(|(_, (&c, _))| c > 0)
        .map(|(i, (&c, &s))| {
            let gap = (s as f64 / c as f64 - i as f64 / n).abs();
            libm::pow(gap, f64::from(norm_p)) * (c as f64 / t)
        })
        .sum())
}

/// One point of a reliability diagram. Means are absent for empty buckets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveBucket {
    pub lo: f64,
    pub hi: f64,
    pub mean_prediction: Option<f64>,
    pub mean_outcome: Option<f64>,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    pub buckets: Vec<CurveBucket>,
}

impl CalibrationCurve {
    fn from_sums(prediction_sums: &[f64], outcome_sums: &[u64], counts: &[u64]) -> Self {
        let m = counts.len() as f64;
        let buckets = counts
            .iter()
            .enumerate()
            .map(|(b, &count)| {
                let (mean_prediction, mean_outcome) = if count > 0 {
                    (
                        Some(prediction_sums[b] / count as f64),
                        Some(outcome_sums[b] as f64 / count as f64),
                    )
                } else {
                    (None, None)
                };
                CurveBucket {
                    lo: b as f64 / m,
                    hi: (b + 1) as f64 / m,
                    mean_prediction,
                    mean_outcome,
                    count,
                }
            })
            .collect();
        Self { buckets }
    }

    /// Builds a curve directly from (prediction, outcome) pairs.
    pub fn from_pairs(pairs: &[(f64, u8)], buckets: usize) -> Result<Self> {
        if buckets == 0 {
            return Err(Error::InvalidParameter("bucket count must be positive"));
        }
        if pairs.is_empty() {
            return Err(Error::Empty);
        }
        let mut preds = vec![0.0; buckets];
        let mut outs = vec![0u64; buckets];
        let mut counts = vec![0u64; buckets];
        for &(p, y) in pairs {
            check_outcome(y)?;
            let b = bucket_index(p, buckets)?;
            preds[b] += p;
            outs[b] += u64::from(y);
            counts[b] += 1;
        }
        Ok(Self::from_sums(&preds, &outs, &counts))
    }

    pub fn total_count(&self) -> u64 {
        self.buckets.iter().map(|b| b.count).sum()
    }

    /// Largest |ȳ_B − p̄_B| over buckets holding at least `min_count` points.
    pub fn max_gap(&self, min_count: u64) -> f64 {
        self.buckets
            .iter()
            .filter(|b| b.count >= min_count)
            .filter_map(|b| Some((b.mean_outcome? - b.mean_prediction?).abs()))
            .fold(0.0, f64::max)
    }
}

/// A single recorded step, kept only when history auditing is enabled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub forecast: f64,
    pub prediction: f64,
    pub outcome: u8,
}

/// Running averages reported every few steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: u64,
    pub loss_recal_avg: f64,
    pub loss_base_avg: f64,
    pub cal_err_l1: f64,
    pub cal_err_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsAccumulator {
    resolution: usize,
    loss: LossSpec,
    grid_strict: bool,
    level_counts: Vec<u64>,
    level_outcomes: Vec<u64>,
    level_predictions: Vec<f64>,
    raw_counts: Vec<u64>,
    raw_outcomes: Vec<u64>,
    raw_forecasts: Vec<f64>,
    cum_loss_recal: f64,
    cum_loss_baseline: f64,
    steps: u64,
    history: Option<Vec<HistoryEntry>>,
}

impl MetricsAccumulator {
    /// Accumulator for predictions on {i/N}; raw forecasts are tracked in
    /// N buckets. Grid-strict by default.
    pub fn new(resolution: usize, loss: LossSpec) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::InvalidParameter("resolution must be positive"));
        }
        let levels = resolution + 1;
        Ok(Self {
            resolution,
            loss,
            grid_strict: true,
            level_counts: vec![0; levels],
            level_outcomes: vec![0; levels],
            level_predictions: vec![0.0; levels],
            raw_counts: vec![0; resolution],
            raw_outcomes: vec![0; resolution],
            raw_forecasts: vec![0.0; resolution],
            cum_loss_recal: 0.0,
            cum_loss_baseline: 0.0,
            steps: 0,
            history: None,
        })
    }

    /// Keeps every (p_f, p_t, y) triple for regret audits.
    pub fn with_history(mut self) -> Self {
        self.history = Some(Vec::new());
        self
    }

    /// When off, off-grid predictions are snapped to the nearest level.
    pub fn with_grid_strict(mut self, strict: bool) -> Self {
        self.grid_strict = strict;
        self
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn loss(&self) -> LossSpec {
        self.loss
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn level_counts(&self) -> &[u64] {
        &self.level_counts
    }

    pub fn level_outcomes(&self) -> &[u64] {
        &self.level_outcomes
    }

    pub fn cum_loss_recal(&self) -> f64 {
        self.cum_loss_recal
    }

    pub fn cum_loss_baseline(&self) -> f64 {
        self.cum_loss_baseline
    }

    pub fn history(&self) -> Option<&[HistoryEntry]> {
        self.history.as_deref()
    }

    pub fn record(&mut self, forecast: f64, prediction: f64, y: u8) -> Result<()> {
        check_outcome(y)?;
        check_probability("raw forecast", forecast)?;
        check_probability("prediction", prediction)?;
        let level = match grid_index(prediction, self.resolution) {
            Some(k) => k,
            None if self.grid_strict => {
                return Err(Error::Domain {
                    what: "off-grid prediction",
                    value: prediction,
                })
            }
            None => libm::round(prediction * self.resolution as f64) as usize,
        };
        let bucket = bucket_index(forecast, self.resolution)?;

        self.level_counts[level] += 1;
        self.level_outcomes[level] += u64::from(y);
        self.level_predictions[level] += prediction;
        self.raw_counts[bucket] += 1;
        self.raw_outcomes[bucket] += u64::from(y);
        self.raw_forecasts[bucket] += forecast;
        self.cum_loss_recal += self.loss.eval_unchecked(y, prediction);
        self.cum_loss_baseline += self.loss.eval_unchecked(y, forecast);
        self.steps += 1;
        if let Some(h) = &mut self.history {
            h.push(HistoryEntry {
                forecast,
                prediction,
                outcome: y,
            });
        }
        Ok(())
    }

    fn non_empty(&self) -> Result<()> {
        if self.steps == 0 {
            Err(Error::Empty)
        } else {
            Ok(())
        }
    }

    /// Calibration error of the recalibrated predictions.
    pub fn calibration_error(&self, norm_p: u32) -> Result<f64> {
        self.non_empty()?;
        grid_calibration_error(
            &self.level_counts,
            &self.level_outcomes,
            self.resolution,
            norm_p,
        )
    }

    /// Calibration error of the raw forecasts, with each bucket's mean
    /// forecast standing in for the grid level.
    pub fn baseline_calibration_error(&self, norm_p: u32) -> Result<f64> {
        check_norm(norm_p)?;
        self.non_empty()?;
        let t = self.steps as f64;
        Ok((0..self.resolution)
            .filter(|&b| self.raw_counts[b] > 0)
            .map(|b| {
                let c = self.raw_counts[b] as f64;
                let gap = (self.raw_outcomes[b] as f64 / c - self.raw_forecasts[b] / c).abs();
                libm::pow(gap, f64::from(norm_p)) * c / t
            })
            .sum())
    }

    /// Reliability diagram of the recalibrated predictions.
    pub fn calibration_curve(&self, buckets: usize) -> Result<CalibrationCurve> {
        if buckets == 0 {
            return Err(Error::InvalidParameter("bucket count must be positive"));
        }
        self.non_empty()?;
        let mut preds = vec![0.0; buckets];
        let mut outs = vec![0u64; buckets];
        let mut counts = vec![0u64; buckets];
        for level in 0..=self.resolution {
            let c = self.level_counts[level];
            if c == 0 {
                continue;
            }
            let b = bucket_index(level as f64 / self.resolution as f64, buckets)?;
            preds[b] += self.level_predictions[level];
            outs[b] += self.level_outcomes[level];
            counts[b] += c;
        }
        Ok(CalibrationCurve::from_sums(&preds, &outs, &counts))
    }

    /// Reliability diagram of the raw forecasts over N buckets.
    pub fn baseline_calibration_curve(&self) -> Result<CalibrationCurve> {
        self.non_empty()?;
        Ok(CalibrationCurve::from_sums(
            &self.raw_forecasts,
            &self.raw_outcomes,
            &self.raw_counts,
        ))
    }

    pub fn mean_loss_recal(&self) -> Result<f64> {
        self.non_empty()?;
        Ok(self.cum_loss_recal / self.steps as f64)
    }

    pub fn mean_loss_baseline(&self) -> Result<f64> {
        self.non_empty()?;
        Ok(self.cum_loss_baseline / self.steps as f64)
    }

    /// Average excess loss of the recalibrated predictions over the raw ones.
    pub fn recalibration_regret(&self) -> Result<f64> {
        self.non_empty()?;
        Ok((self.cum_loss_recal - self.cum_loss_baseline) / self.steps as f64)
    }

    /// Internal regret of the recalibrated predictions under `loss`,
    /// computed from the per-level tallies.
    pub fn internal_regret(&self, loss: &LossSpec) -> f64 {
        level_internal_regret(
            &self.level_counts,
            &self.level_outcomes,
            self.resolution,
            loss,
        )
    }

    pub fn series_row(&self) -> Result<SeriesRow> {
        Ok(SeriesRow {
            t: self.steps,
            loss_recal_avg: self.mean_loss_recal()?,
            loss_base_avg: self.mean_loss_baseline()?,
            cal_err_l1: self.calibration_error(1)?,
            cal_err_l2: self.calibration_error(2)?,
        })
    }
}

/// Per-level tallies of an on-grid history.
fn tally(history: &[(f64, u8)], resolution: usize) -> Result<(Vec<u64>, Vec<u64>)> {
    if resolution == 0 {
        return Err(Error::InvalidParameter("resolution must be positive"));
    }
    let mut counts = vec![0u64; resolution + 1];
    let mut sums = vec![0u64; resolution + 1];
    for &(p, y) in history {
        check_outcome(y)?;
        let k = grid_index(p, resolution).ok_or(Error::Domain {
            what: "off-grid prediction",
            value: p,
        })?;
        counts[k] += 1;
        sums[k] += u64::from(y);
    }
    Ok((counts, sums))
}

fn level_internal_regret(counts: &[u64], sums: &[u64], resolution: usize, loss: &LossSpec) -> f64 {
    let n = resolution as f64;
    let level_loss = |k: usize, y: u8| loss.eval_unchecked(y, k as f64 / n);
    let mut best = 0.0f64;
    for i in 0..=resolution {
        if counts[i] == 0 {
            continue;
        }
        let ones = sums[i] as f64;
        let zeros = (counts[i] - sums[i]) as f64;
        for j in 0..=resolution {
            let gain = ones * (level_loss(i, 1) - level_loss(j, 1))
                + zeros * (level_loss(i, 0) - level_loss(j, 0));
            best = best.max(gain);
        }
    }
    best
}

/// max over (i, j) of the loss saved by replaying every play of i/N as j/N.
pub fn internal_regret(history: &[(f64, u8)], loss: &LossSpec, resolution: usize) -> Result<f64> {
    let (counts, sums) = tally(history, resolution)?;
    Ok(level_internal_regret(&counts, &sums, resolution, loss))
}

/// Realized loss minus the loss of the best fixed grid prediction.
pub fn external_regret(history: &[(f64, u8)], loss: &LossSpec, resolution: usize) -> Result<f64> {
    let (counts, sums) = tally(history, resolution)?;
    let n = resolution as f64;
    let ones: u64 = sums.iter().sum();
    let zeros = history.len() as u64 - ones;
    let realized: f64 = (0..=resolution)
        .map(|k| {
            let p = k as f64 / n;
            sums[k] as f64 * loss.eval_unchecked(1, p)
                + (counts[k] - sums[k]) as f64 * loss.eval_unchecked(0, p)
        })
        .sum();
    let best_fixed = (0..=resolution)
        .map(|k| {
            let p = k as f64 / n;
            ones as f64 * loss.eval_unchecked(1, p) + zeros as f64 * loss.eval_unchecked(0, p)
        })
        .fold(f64::INFINITY, f64::min);
    Ok(realized - best_fixed)
}
