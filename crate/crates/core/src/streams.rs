//! Outcome and covariate generators.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_outcome, check_probability, Error, Result};
use crate::forecasters::sigmoid;
use crate::rng::{substream, FEATURE_STREAM, OUTCOME_STREAM};

/// One event of an input stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamRecord {
    pub features: Option<Vec<f64>>,
    pub forecast: Option<f64>,
    pub outcome: u8,
}

impl StreamRecord {
    pub fn new(features: Option<Vec<f64>>, forecast: Option<f64>, outcome: u8) -> Result<Self> {
        check_outcome(outcome)?;
        if features.is_none() && forecast.is_none() {
            return Err(Error::InvalidParameter(
                "record needs features or a forecast",
            ));
        }
        if let Some(p) = forecast {
            check_probability("raw forecast", p)?;
        }
        Ok(Self {
            features,
            forecast,
            outcome,
        })
    }
}

/// Infinite i.i.d. Ber(p) outcomes.
#[derive(Debug, Clone)]
pub struct BernoulliStream {
    p: f64,
    rng: ChaCha8Rng,
}

impl BernoulliStream {
    pub fn new(p: f64, seed: u64) -> Result<Self> {
        check_probability("bernoulli parameter", p)?;
        Ok(Self {
            p,
            rng: substream(seed, OUTCOME_STREAM),
        })
    }
}

impl Iterator for BernoulliStream {
    type Item = u8;

    fn next(&mut self) -> Option<u8> {
        Some(u8::from(self.rng.random_bool(self.p)))
    }
}

pub fn bernoulli_stream(p: f64, len: usize, seed: u64) -> Result<Vec<u8>> {
    Ok(BernoulliStream::new(p, seed)?.take(len).collect())
}

/// Parses a pattern such as `"001"`.
pub fn parse_pattern(s: &str) -> Result<Vec<u8>> {
    if s.is_empty() {
        return Err(Error::InvalidParameter("pattern must be nonempty"));
    }
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(Error::InvalidParameter("pattern must contain only 0 and 1")),
        })
        .collect()
}

/// The pattern repeated and truncated to `len`.
pub fn pattern_stream(pattern: &[u8], len: usize) -> Result<Vec<u8>> {
    if pattern.is_empty() {
        return Err(Error::InvalidParameter("pattern must be nonempty"));
    }
    pattern.iter().try_for_each(|&y| check_outcome(y))?;
    Ok(pattern.iter().copied().cycle().take(len).collect())
}

/// Adaptive adversary: answers 0 to any prediction above 1/2, else 1.
pub fn adversarial_outcome(prediction: f64) -> u8 {
    u8::from(prediction <= 0.5)
}

/// Infinite stream of `x ~ N(0, I)`, `y ~ Ber(σ(w·x))`.
#[derive(Debug, Clone)]
pub struct LogisticSynthStream {
    weights: Vec<f64>,
    rng: ChaCha8Rng,
}

impl LogisticSynthStream {
    pub fn new(weights: &[f64], seed: u64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter("true weights must be nonempty"));
        }
        Ok(Self {
            weights: weights.to_vec(),
            rng: substream(seed, FEATURE_STREAM),
        })
    }

    /// Probability of y = 1 given `x` under the generating model.
    pub fn true_probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.weights.iter().zip(x).map(|(w, v)| w * v).sum())
    }
}

impl Iterator for LogisticSynthStream {
    type Item = StreamRecord;

    fn next(&mut self) -> Option<StreamRecord> {
        let x: Vec<f64> = (0..self.weights.len())
            .map(|_| self.rng.sample(StandardNormal))
            .collect();
        let p = self.true_probability(&x);
        let y = u8::from(self.rng.random_bool(p));
        Some(StreamRecord {
            features: Some(x),
            forecast: None,
            outcome: y,
        })
    }
}

pub fn logistic_synth_stream(weights: &[f64], len: usize, seed: u64) -> Result<Vec<StreamRecord>> {
    Ok(LogisticSynthStream::new(weights, seed)?.take(len).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn mean(ys: &[u8]) -> f64 {
        ys.iter().map(|&y| f64::from(y)).sum::<f64>() / ys.len() as f64
    }

    #[test]
    fn bernoulli_extremes_and_mean() {
        assert!(bernoulli_stream(0.0, 1000, 1)
            .unwrap()
            .iter()
            .all(|&y| y == 0));
        assert!(bernoulli_stream(1.0, 1000, 1)
            .unwrap()
            .iter()
            .all(|&y| y == 1));
        let m = mean(&bernoulli_stream(0.5, 100_000, 2).unwrap());
        assert!((0.49..=0.51).contains(&m));
        assert!(bernoulli_stream(1.5, 10, 1).is_err());
        assert_eq!(
            bernoulli_stream(0.3, 500, 8).unwrap(),
            bernoulli_stream(0.3, 500, 8).unwrap()
        );
    }

    #[test]
    fn seeds_are_uncorrelated() {
        let a = bernoulli_stream(0.5, 10_000, 1).unwrap();
        let b = bernoulli_stream(0.5, 10_000, 2).unwrap();
        let (ma, mb) = (mean(&a), mean(&b));
        let cov: f64 = a
            .iter()
            .zip(&b)
            .map(|(&x, &y)| (f64::from(x) - ma) * (f64::from(y) - mb))
            .sum();
        let r = cov / libm::sqrt((ma * (1.0 - ma)) * (mb * (1.0 - mb))) / a.len() as f64;
        assert!(r.abs() <= 0.05, "r = {r}");
    }

    #[test]
    fn patterns() {
        assert_eq!(
            pattern_stream(&parse_pattern("001").unwrap(), 6).unwrap(),
            [0, 0, 1, 0, 0, 1]
        );
        assert_eq!(
            pattern_stream(&parse_pattern("01").unwrap(), 4).unwrap(),
            [0, 1, 0, 1]
        );
        assert_eq!(pattern_stream(&[1], 3).unwrap(), [1, 1, 1]);
        assert!(pattern_stream(&[], 3).is_err());
        assert!(parse_pattern("").is_err());
        assert!(parse_pattern("012").is_err());
    }

    #[test]
    fn adversary_rule() {
        assert_eq!(adversarial_outcome(0.7), 0);
        assert_eq!(adversarial_outcome(0.3), 1);
        assert_eq!(adversarial_outcome(0.5), 1);
    }

    #[test]
    fn logistic_synth_zero_weights() {
        let recs = logistic_synth_stream(&[0.0, 0.0, 0.0], 100_000, 4).unwrap();
        let ys: Vec<u8> = recs.iter().map(|r| r.outcome).collect();
        assert!((mean(&ys) - 0.5).abs() <= 0.01);
        assert_eq!(recs[0].features.as_ref().unwrap().len(), 3);
        assert!(logistic_synth_stream(&[], 10, 4).is_err());
        assert_eq!(
            recs[..50],
            logistic_synth_stream(&[0.0, 0.0, 0.0], 50, 4).unwrap()[..]
        );
    }

    #[test]
    fn logistic_synth_large_weights_nearly_deterministic() {
        let w = [40.0, -30.0];
        let recs = logistic_synth_stream(&w, 20_000, 5).unwrap();
        let errors = recs
            .iter()
            .filter(|r| {
                let x = r.features.as_ref().unwrap();
                let bayes = u8::from(w[0] * x[0] + w[1] * x[1] >= 0.0);
                bayes != r.outcome
            })
            .count();
        assert!((errors as f64) / (recs.len() as f64) <= 0.05);
    }

    #[test]
    fn record_validation() {
        assert!(StreamRecord::new(None, None, 1).is_err());
        assert!(StreamRecord::new(None, Some(1.3), 1).is_err());
        assert!(StreamRecord::new(None, Some(0.3), 2).is_err());
        assert!(StreamRecord::new(Some(vec![1.0]), None, 0).is_ok());
    }
}
