//! Bucketed recalibration of a black-box forecaster.
//!
//! Raw forecasts are routed into M equal-width buckets over [0, 1]; each
//! bucket owns an independent [`OnlineCalibrator`], which only ever sees the
//! outcomes that arrived while the raw forecast fell in its bucket.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::calibrator::{GridPrediction, OnlineCalibrator};
use crate::error::{check_outcome, check_probability, Error, Result};
use crate::metrics::grid_calibration_error;

/// Bucket of `p` among `[0,1/M), [1/M,2/M), ..., [(M-1)/M, 1]`.
pub fn bucket_index(p: f64, buckets: usize) -> Result<usize> {
    check_probability("raw forecast", p)?;
    if buckets == 0 {
        return Err(Error::InvalidParameter("bucket count must be positive"));
    }
    Ok(((p * buckets as f64) as usize).min(buckets - 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingForecast {
    pub bucket: usize,
    pub forecast: f64,
    pub prediction: GridPrediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recalibrator {
    buckets: usize,
    resolution: usize,
    seed: u64,
    /// Created on first use; keyed by bucket index.
    instances: BTreeMap<usize, OnlineCalibrator>,
    bucket_counts: Vec<u64>,
    steps: u64,
    pending: Option<PendingForecast>,
}

impl Recalibrator {
    /// `buckets` = M intervals of raw forecasts, `resolution` = N grid steps.
    pub fn new(buckets: usize, resolution: usize, seed: u64) -> Result<Self> {
        if buckets == 0 {
            return Err(Error::InvalidParameter("bucket count must be positive"));
        }
        if resolution == 0 {
            return Err(Error::InvalidParameter("resolution must be positive"));
        }
        Ok(Self {
            buckets,
            resolution,
            seed,
            instances: BTreeMap::new(),
            bucket_counts: vec![0; buckets],
            steps: 0,
            pending: None,
        })
    }

    /// M = N.
    pub fn with_resolution(resolution: usize, seed: u64) -> Result<Self> {
        Self::new(resolution, resolution, seed)
    }

    pub fn buckets(&self) -> usize {
        self.buckets
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn bucket_counts(&self) -> &[u64] {
        &self.bucket_counts
    }

    pub fn pending(&self) -> Option<&PendingForecast> {
        self.pending.as_ref()
    }

    /// Mean of the pending prediction's distribution: what an adversary that
    /// knows the state but not the current draw can observe.
    pub fn expected_prediction(&self) -> Option<f64> {
        self.pending
            .as_ref()
            .map(|p| p.prediction.distribution.mean_index() / self.resolution as f64)
    }

    pub fn instance(&self, bucket: usize) -> Option<&OnlineCalibrator> {
        self.instances.get(&bucket)
    }

    pub fn instances(&self) -> impl Iterator<Item = (usize, &OnlineCalibrator)> {
        self.instances.iter().map(|(&j, c)| (j, c))
    }

    /// Routes the raw forecast to its bucket and returns the calibrated
    /// probability for this step.
    pub fn observe_forecast(&mut self, forecast: f64) -> Result<f64> {
        if self.pending.is_some() {
            return Err(Error::ProtocolOrder(
                "forecast observed before previous outcome",
            ));
        }
        let bucket = bucket_index(forecast, self.buckets)?;
        let instance = match self.instances.entry(bucket) {
            alloc::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
            alloc::collections::btree_map::Entry::Vacant(e) => e.insert(OnlineCalibrator::new(
                self.resolution,
                self.seed,
                bucket as u64,
            )?),
        };
        let prediction = instance.predict()?;
        let value = prediction.value;
        self.pending = Some(PendingForecast {
            bucket,
            forecast,
            prediction,
        });
        Ok(value)
    }

    pub fn observe_outcome(&mut self, y: u8) -> Result<()> {
        check_outcome(y)?;
        let pending = self.pending.as_ref().ok_or(Error::ProtocolOrder(
            "outcome observed without a pending forecast",
        ))?;
        let instance = self
            .instances
            .get_mut(&pending.bucket)
            .ok_or(Error::InvalidParameter("pending bucket has no instance"))?;
        instance.update(&pending.prediction, y)?;
        self.bucket_counts[pending.bucket] += 1;
        self.steps += 1;
        self.pending = None;
        Ok(())
    }

    /// Per-level (counts, outcome sums) of the combined output stream.
    pub fn aggregate_tallies(&self) -> (Vec<u64>, Vec<u64>) {
        let mut counts = vec![0u64; self.resolution + 1];
        let mut sums = vec![0u64; self.resolution + 1];
        for inst in self.instances.values() {
            for (k, (&c, &s)) in inst.counts().iter().zip(inst.outcome_sums()).enumerate() {
                counts[k] += c;
                sums[k] += s;
            }
        }
        (counts, sums)
    }

    /// Calibration error of the combined output stream.
    pub fn aggregate_calibration_error(&self, norm_p: u32) -> Result<f64> {
        let (counts, sums) = self.aggregate_tallies();
        grid_calibration_error(&counts, &sums, self.resolution, norm_p)
    }

    /// Σ_j (T_j/T) · (calibration error of instance j).
    pub fn weighted_instance_error(&self, norm_p: u32) -> Result<f64> {
        if self.steps == 0 {
            return Err(Error::Empty);
        }
        let t = self.steps as f64;
        let mut total = 0.0;
        for (&j, inst) in &self.instances {
            if self.bucket_counts[j] > 0 {
                total += self.bucket_counts[j] as f64 / t * inst.calibration_error(norm_p)?;
            }
        }
        Ok(total)
    }

    pub fn validate(&self) -> Result<()> {
        if self.buckets == 0 || self.resolution == 0 || self.bucket_counts.len() != self.buckets {
            return Err(Error::InvalidParameter(
                "recalibrator shape is inconsistent",
            ));
        }
        if self.bucket_counts.iter().sum::<u64>() != self.steps {
            return Err(Error::InvalidParameter("bucket counts do not sum to steps"));
        }
        for (&j, inst) in &self.instances {
            inst.validate()?;
            if j >= self.buckets
                || inst.resolution() != self.resolution
                || inst.steps() != self.bucket_counts[j]
                || inst.stream() != j as u64
                || inst.seed() != self.seed
            {
                return Err(Error::InvalidParameter(
                    "instance does not match its bucket",
                ));
            }
        }
        match &self.pending {
            Some(p) => {
                let inst = self
                    .instances
                    .get(&p.bucket)
                    .ok_or(Error::InvalidParameter("pending bucket has no instance"))?;
                if inst.pending() != Some(&p.prediction) {
                    return Err(Error::InvalidParameter("pending forecast is out of sync"));
                }
            }
            None => {
                if self.instances.values().any(|i| i.pending().is_some()) {
                    return Err(Error::InvalidParameter("instance holds a stray prediction"));
                }
            }
        }
        Ok(())
    }
}
