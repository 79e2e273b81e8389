//! Experiment runner.
//!
//! Every step runs in protocol order: the source yields a raw forecast, the
//! recalibrator answers, the source reveals the outcome (an adaptive source
//! may look at the answer first), the recalibrator updates, and metrics are
//! recorded last.

use std::fmt;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use recal_core::rng::{substream, FORECAST_STREAM};
use recal_core::streams::{parse_pattern, BernoulliStream, LogisticSynthStream};
use recal_core::{
    adversarial_outcome, noise_predict, CalibrationCurve, FixedLogisticForecaster, LinearKind,
    LossKind, MetricsAccumulator, OnlineLinearForecaster, Recalibrator, SeriesRow, StreamRecord,
    TwoValueExpert,
};

use crate::config::{ExperimentConfig, ExperimentKind, ForecasterKind, DEFAULT_STEPS};
use crate::csv_io;
use crate::error::{Error, Result};

/// Supplies raw forecasts and outcomes, one step at a time.
trait Source {
    fn forecast(&mut self) -> Result<f64>;
    /// Called after the recalibrator has answered. `prediction` is the
    /// realized draw, `expected` the mean of the distribution it came from.
    fn outcome(&mut self, prediction: f64, expected: f64) -> Result<u8>;
    /// Called once the outcome has been revealed to everyone.
    fn learn(&mut self, _y: u8) -> Result<()> {
        Ok(())
    }
}

/// Clairvoyant two-value expert on Bernoulli outcomes.
struct ExpertSource {
    outcomes: BernoulliStream,
    expert: TwoValueExpert,
    next: u8,
}

impl Source for ExpertSource {
    fn forecast(&mut self) -> Result<f64> {
        self.next = self.outcomes.next().expect("bernoulli stream is infinite");
        Ok(self.expert.predict(self.next))
    }

    fn outcome(&mut self, _prediction: f64, _expected: f64) -> Result<u8> {
        Ok(self.next)
    }
}

/// Coin-flip forecaster against an adversary that reacts to the prediction.
struct AdversarySource {
    rng: ChaCha8Rng,
    sees_draw: bool,
}

impl Source for AdversarySource {
    fn forecast(&mut self) -> Result<f64> {
        Ok(noise_predict(&mut self.rng))
    }

    fn outcome(&mut self, prediction: f64, expected: f64) -> Result<u8> {
        Ok(adversarial_outcome(if self.sees_draw {
            prediction
        } else {
            expected
        }))
    }
}

/// Periodic outcomes against a constant-zero forecaster.
struct PatternSource {
    pattern: Vec<u8>,
    t: usize,
}

impl Source for PatternSource {
    fn forecast(&mut self) -> Result<f64> {
        Ok(0.0)
    }

    fn outcome(&mut self, _prediction: f64, _expected: f64) -> Result<u8> {
        let y = self.pattern[self.t % self.pattern.len()];
        self.t += 1;
        Ok(y)
    }
}

enum Model {
    Fixed(FixedLogisticForecaster),
    Online(OnlineLinearForecaster),
}

impl Model {
    fn predict(&mut self, x: &[f64]) -> Result<f64> {
        Ok(match self {
            Model::Fixed(m) => m.predict(x)?,
            Model::Online(m) => m.predict(x)?.1,
        })
    }

    fn learn(&mut self, x: &[f64], y: u8) -> Result<()> {
        if let Model::Online(m) = self {
            m.update(x, y)?;
        }
        Ok(())
    }
}

fn online_model(config: &ExperimentConfig, dim: usize) -> Result<Model> {
    let kind = config
        .forecaster
        .linear_kind()
        .unwrap_or(LinearKind::Logistic);
    Ok(Model::Online(
        OnlineLinearForecaster::new(dim, kind)?
            .with_learning_rate(config.learning_rate)?
            .with_l1_strength(config.l1_strength)?,
    ))
}

/// Synthetic logistic data with a feature-based forecaster.
struct CovariateSource {
    stream: LogisticSynthStream,
    model: Model,
    current: Option<StreamRecord>,
}

impl Source for CovariateSource {
    fn forecast(&mut self) -> Result<f64> {
        let rec = self.stream.next().expect("synthetic stream is infinite");
        let p = self
            .model
            .predict(rec.features.as_deref().unwrap_or_default())?;
        self.current = Some(rec);
        Ok(p)
    }

    fn outcome(&mut self, _prediction: f64, _expected: f64) -> Result<u8> {
        Ok(self.current.as_ref().map_or(0, |r| r.outcome))
    }

    fn learn(&mut self, y: u8) -> Result<()> {
        if let Some(rec) = self.current.take() {
            self.model
                .learn(rec.features.as_deref().unwrap_or_default(), y)?;
        }
        Ok(())
    }
}

/// Records from a file; rows without a forecast go through an online model.
struct RecordSource<'a> {
    records: &'a [StreamRecord],
    model: Option<Model>,
    t: usize,
}

impl Source for RecordSource<'_> {
    fn forecast(&mut self) -> Result<f64> {
        let row = self.t + 1;
        let rec = self.records.get(self.t).ok_or_else(|| {
            Error::Data(format!(
                "stream exhausted after {} records",
                self.records.len()
            ))
        })?;
        if let Some(p) = rec.forecast {
            return Ok(p);
        }
        let (Some(model), Some(x)) = (self.model.as_mut(), rec.features.as_deref()) else {
            return Err(Error::Data(format!(
                "row {row}: no forecast and no features"
            )));
        };
        model
            .predict(x)
            .map_err(|e| Error::Data(format!("row {row}: {e}")))
    }

    fn outcome(&mut self, _prediction: f64, _expected: f64) -> Result<u8> {
        Ok(self.records[self.t].outcome)
    }

    fn learn(&mut self, y: u8) -> Result<()> {
        let rec = &self.records[self.t];
        self.t += 1;
        if let (Some(model), Some(x)) = (self.model.as_mut(), rec.features.as_deref()) {
            model
                .learn(x, y)
                .map_err(|e| Error::Data(format!("row {}: {e}", self.t)))?;
        }
        Ok(())
    }
}

/// End-of-run figures. Calibration errors for the raw forecasts use each
/// bucket's mean forecast in place of a grid level.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub experiment: ExperimentKind,
    pub loss: LossKind,
    pub steps: u64,
    pub buckets: usize,
    pub resolution: usize,
    pub seed: u64,
    pub loss_recal: f64,
    pub loss_base: f64,
    /// Average loss of recalibrated minus raw forecasts.
    pub regret: f64,
    pub cal_err_l1: f64,
    pub cal_err_l2: f64,
    pub base_cal_err_l1: f64,
    pub base_cal_err_l2: f64,
    /// Internal regret of the recalibrated predictions divided by T.
    pub internal_regret: f64,
    pub mean_prediction: f64,
    pub mean_forecast: f64,
    pub mean_outcome: f64,
    pub curve: CalibrationCurve,
    pub baseline_curve: CalibrationCurve,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "experiment={}", self.experiment)?;
        writeln!(f, "loss={}", self.loss)?;
        writeln!(
            f,
            "T={} M={} N={} seed={}",
            self.steps, self.buckets, self.resolution, self.seed
        )?;
        writeln!(f, "loss_recal={}", self.loss_recal)?;
        writeln!(f, "loss_base={}", self.loss_base)?;
        writeln!(f, "regret={}", self.regret)?;
        writeln!(f, "cal_err_l1={}", self.cal_err_l1)?;
        writeln!(f, "cal_err_l2={}", self.cal_err_l2)?;
        writeln!(f, "base_cal_err_l1={}", self.base_cal_err_l1)?;
        writeln!(f, "base_cal_err_l2={}", self.base_cal_err_l2)?;
        writeln!(f, "internal_regret={}", self.internal_regret)?;
        writeln!(f, "mean_prediction={}", self.mean_prediction)?;
        writeln!(f, "mean_forecast={}", self.mean_forecast)?;
        writeln!(f, "mean_outcome={}", self.mean_outcome)?;
        writeln!(f, "curve: bucket mean_pred mean_outcome count")?;
        for b in &self.curve.buckets {
            writeln!(
                f,
                "  [{:.3}, {:.3}] {} {} {}",
                b.lo,
                b.hi,
                opt(b.mean_prediction),
                opt(b.mean_outcome),
                b.count
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub summary: Summary,
    pub series: Vec<SeriesRow>,
    /// Recalibrated prediction at every step.
    pub predictions: Vec<f64>,
    pub recalibrator: Recalibrator,
    pub metrics: MetricsAccumulator,
}

fn drive(
    config: &ExperimentConfig,
    source: &mut dyn Source,
    steps: u64,
) -> Result<ExperimentReport> {
    let loss = config.loss_spec();
    let mut recal = Recalibrator::new(config.buckets, config.resolution, config.seed)?;
    let mut metrics = MetricsAccumulator::new(config.resolution, loss)?;
    let mut series = Vec::new();
    let mut predictions = Vec::with_capacity(usize::try_from(steps).unwrap_or(0));
    let (mut sum_forecast, mut sum_outcome) = (0.0, 0u64);

    for t in 1..=steps {
        let forecast = source.forecast()?;
        let prediction = recal.observe_forecast(forecast)?;
        let expected = recal.expected_prediction().expect("forecast is pending");
        let y = source.outcome(prediction, expected)?;
        recal.observe_outcome(y)?;
        source.learn(y)?;
        metrics.record(forecast, prediction, y)?;

        predictions.push(prediction);
        sum_forecast += forecast;
        sum_outcome += u64::from(y);
        if t % config.report_every == 0 || t == steps {
            series.push(metrics.series_row()?);
        }
    }

    let t = steps as f64;
    let summary = Summary {
        experiment: config.experiment,
        loss: loss.kind,
        steps,
        buckets: config.buckets,
        resolution: config.resolution,
        seed: config.seed,
        loss_recal: metrics.mean_loss_recal()?,
        loss_base: metrics.mean_loss_baseline()?,
        regret: metrics.recalibration_regret()?,
        cal_err_l1: metrics.calibration_error(1)?,
        cal_err_l2: metrics.calibration_error(2)?,
        base_cal_err_l1: metrics.baseline_calibration_error(1)?,
        base_cal_err_l2: metrics.baseline_calibration_error(2)?,
        internal_regret: metrics.internal_regret(&loss) / t,
        mean_prediction: predictions.iter().sum::<f64>() / t,
        mean_forecast: sum_forecast / t,
        mean_outcome: sum_outcome as f64 / t,
        curve: metrics.calibration_curve(config.buckets)?,
        baseline_curve: metrics.baseline_calibration_curve()?,
    };
    Ok(ExperimentReport {
        summary,
        series,
        predictions,
        recalibrator: recal,
        metrics,
    })
}

fn write_outputs(config: &ExperimentConfig, report: &ExperimentReport) -> Result<()> {
    if let Some(path) = &config.out {
        csv_io::write_series(path, &report.series)?;
    }
    if let Some(path) = &config.curve_out {
        csv_io::write_curve(path, &report.summary.curve)?;
    }
    if let Some(path) = &config.baseline_curve_out {
        csv_io::write_curve(path, &report.summary.baseline_curve)?;
    }
    Ok(())
}

fn record_source<'a>(
    config: &ExperimentConfig,
    records: &'a [StreamRecord],
) -> Result<RecordSource<'a>> {
    let model = match records.iter().find(|r| r.forecast.is_none()) {
        None => None,
        Some(r) => {
            let dim = r.features.as_ref().map_or(0, Vec::len);
            Some(online_model(config, dim)?)
        }
    };
    Ok(RecordSource {
        records,
        model,
        t: 0,
    })
}

fn csv_steps(config: &ExperimentConfig, records: &[StreamRecord]) -> Result<u64> {
    let available = records.len() as u64;
    match config.steps {
        Some(t) if t > available => Err(Error::Data(format!(
            "stream exhausted after {available} records before T = {t}"
        ))),
        Some(t) => Ok(t),
        None if available == 0 => Err(Error::Data("input has no records".into())),
        None => Ok(available),
    }
}

/// Runs the configured experiment without touching the filesystem.
pub fn execute(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let steps = config.steps.unwrap_or(DEFAULT_STEPS);
    let seed = config.seed;
    match config.experiment {
        ExperimentKind::BernoulliExpert => drive(
            config,
            &mut ExpertSource {
                outcomes: BernoulliStream::new(config.bernoulli_p, seed)?,
                expert: TwoValueExpert::new(config.expert_low, config.expert_high)?,
                next: 0,
            },
            steps,
        ),
        ExperimentKind::Adversarial => drive(
            config,
            &mut AdversarySource {
                rng: substream(seed, FORECAST_STREAM),
                sees_draw: config.adversary_sees_draw,
            },
            steps,
        ),
        ExperimentKind::PatternL1 => drive(
            config,
            &mut PatternSource {
                pattern: parse_pattern(&config.pattern)?,
                t: 0,
            },
            steps,
        ),
        ExperimentKind::Covariate => {
            let model = match config.forecaster {
                ForecasterKind::Scaled => Model::Fixed(FixedLogisticForecaster::scaled(
                    &config.true_weights,
                    config.temperature,
                )),
                _ => online_model(config, config.true_weights.len())?,
            };
            drive(
                config,
                &mut CovariateSource {
                    stream: LogisticSynthStream::new(&config.true_weights, seed)?,
                    model,
                    current: None,
                },
                steps,
            )
        }
        ExperimentKind::Csv => {
            let path = config.input.as_deref().expect("validated");
            let records = csv_io::read_records(path)?;
            let steps = csv_steps(config, &records)?;
            drive(config, &mut record_source(config, &records)?, steps)
        }
    }
}

/// Runs the configured experiment and writes the requested CSV files.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let report = execute(config)?;
    write_outputs(config, &report)?;
    Ok(report)
}

/// Recalibrates the `p_f` column of `config.input` and writes the records
/// with an added `p_cal` column to `output`.
pub fn recalibrate_csv(config: &ExperimentConfig, output: &Path) -> Result<ExperimentReport> {
    let config = ExperimentConfig {
        experiment: ExperimentKind::Csv,
        ..config.clone()
    };
    config.validate()?;
    let records = csv_io::read_records(config.input.as_deref().expect("validated"))?;
    if let Some(i) = records.iter().position(|r| r.forecast.is_none()) {
        return Err(Error::Data(format!(
            "row {}, column p_f: missing forecast",
            i + 1
        )));
    }
    let steps = csv_steps(&config, &records)?;
    let report = drive(&config, &mut record_source(&config, &records)?, steps)?;
    let used = &records[..report.predictions.len()];
    csv_io::write_records(output, used, Some(("p_cal", &report.predictions)))?;
    write_outputs(&config, &report)?;
    Ok(report)
}
