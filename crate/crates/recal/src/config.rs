//! Experiment configuration.
//!
//! A config file is plain text with one `key = value` per line; `#` starts a
//! comment. Command-line flags are applied afterwards and win.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use recal_core::streams::parse_pattern;
use recal_core::{LinearKind, LossKind, LossSpec};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    BernoulliExpert,
    Adversarial,
    PatternL1,
    Covariate,
    Csv,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::BernoulliExpert,
        ExperimentKind::Adversarial,
        ExperimentKind::PatternL1,
        ExperimentKind::Covariate,
        ExperimentKind::Csv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::BernoulliExpert => "bernoulli_expert",
            ExperimentKind::Adversarial => "adversarial",
            ExperimentKind::PatternL1 => "pattern_l1",
            ExperimentKind::Covariate => "covariate",
            ExperimentKind::Csv => "csv",
        }
    }

    pub fn default_loss(self) -> LossKind {
        match self {
            ExperimentKind::PatternL1 => LossKind::L1,
            _ => LossKind::L2,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment {s:?}")))
    }
}

/// How the covariate and csv experiments produce raw forecasts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForecasterKind {
    /// σ(temperature · w·x) with the generating weights w.
    Scaled,
    OnlineLogistic,
    OnlineHinge,
}

impl ForecasterKind {
    pub fn linear_kind(self) -> Option<LinearKind> {
        match self {
            ForecasterKind::Scaled => None,
            ForecasterKind::OnlineLogistic => Some(LinearKind::Logistic),
            ForecasterKind::OnlineHinge => Some(LinearKind::Hinge),
        }
    }
}

impl FromStr for ForecasterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scaled" => Ok(ForecasterKind::Scaled),
            "logistic" => Ok(ForecasterKind::OnlineLogistic),
            "hinge" => Ok(ForecasterKind::OnlineHinge),
            _ => Err(Error::Config(format!("unknown forecaster {s:?}"))),
        }
    }
}

pub const DEFAULT_STEPS: u64 = 10_000;
pub const DEFAULT_TRUE_WEIGHTS: [f64; 5] = [1.0, -0.5, 0.25, 0.75, -1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// `None` means the default horizon, or the whole file in csv mode.
    pub steps: Option<u64>,
    pub buckets: usize,
    pub resolution: usize,
    /// `None` picks the experiment's default loss.
    pub loss: Option<LossKind>,
    pub seed: u64,
    pub report_every: u64,
    pub out: Option<PathBuf>,
    pub curve_out: Option<PathBuf>,
    pub baseline_curve_out: Option<PathBuf>,
    pub input: Option<PathBuf>,
    /// Lifts the M ≥ N ≥ 2 requirement.
    pub allow_small_grid: bool,
    /// The adversary reacts to the realized draw instead of the
    /// distribution's mean. No forecaster can be calibrated against it.
    pub adversary_sees_draw: bool,
    pub bernoulli_p: f64,
    pub expert_low: f64,
    pub expert_high: f64,
    pub pattern: String,
    pub true_weights: Vec<f64>,
    pub temperature: f64,
    pub forecaster: ForecasterKind,
    pub learning_rate: f64,
    pub l1_strength: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::BernoulliExpert,
            steps: None,
            buckets: 10,
            resolution: 10,
            loss: None,
            seed: 0,
            report_every: 100,
            out: None,
            curve_out: None,
            baseline_curve_out: None,
            input: None,
            allow_small_grid: false,
            adversary_sees_draw: false,
            bernoulli_p: 0.5,
            expert_low: 0.3,
            expert_high: 0.7,
            pattern: "001".into(),
            true_weights: DEFAULT_TRUE_WEIGHTS.to_vec(),
            temperature: 3.0,
            forecaster: ForecasterKind::Scaled,
            learning_rate: 0.1,
            l1_strength: 1e-4,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!(
            "{key}: expected true or false, got {value:?}"
        ))),
    }
}

impl ExperimentConfig {
    pub fn for_experiment(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            ..Self::default()
        }
    }

    pub fn loss_kind(&self) -> LossKind {
        self.loss.unwrap_or_else(|| self.experiment.default_loss())
    }

    pub fn loss_spec(&self) -> LossSpec {
        LossSpec::new(self.loss_kind())
    }

    /// Sets one key. Keys accept `-` or `_` as separators.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let path = || Some(PathBuf::from(value));
        match key.trim().replace('-', "_").as_str() {
            "experiment" => self.experiment = value.parse()?,
            "T" | "steps" => self.steps = Some(parse(key, value)?),
            "M" | "buckets" => self.buckets = parse(key, value)?,
            "N" | "resolution" => self.resolution = parse(key, value)?,
            "loss" => {
                self.loss = Some(
                    value
                        .parse()
                        .map_err(|_| Error::Config(format!("unknown loss {value:?}")))?,
                )
            }
            "seed" => self.seed = parse(key, value)?,
            "report_every" => self.report_every = parse(key, value)?,
            "out" => self.out = path(),
            "curve_out" => self.curve_out = path(),
            "baseline_curve_out" => self.baseline_curve_out = path(),
            "input" => self.input = path(),
            "allow_small_grid" => self.allow_small_grid = parse_bool(key, value)?,
            "adversary_sees_draw" => self.adversary_sees_draw = parse_bool(key, value)?,
            "bernoulli_p" | "p" => self.bernoulli_p = parse(key, value)?,
            "expert_low" => self.expert_low = parse(key, value)?,
            "expert_high" => self.expert_high = parse(key, value)?,
            "pattern" => self.pattern = value.to_string(),
            "weights" => {
                self.true_weights = value
                    .split(',')
                    .map(|w| parse(key, w.trim()))
                    .collect::<Result<_>>()?
            }
            "temperature" => self.temperature = parse(key, value)?,
            "forecaster" => self.forecaster = value.parse()?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "l1_strength" => self.l1_strength = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if self.steps == Some(0) {
            return bad("T must be at least 1");
        }
        if self.buckets == 0 || self.resolution == 0 {
            return bad("M and N must be positive");
        }
        if !self.allow_small_grid && !(self.buckets >= self.resolution && self.resolution >= 2) {
            return bad("M >= N >= 2 required (set allow_small_grid to override)");
        }
        if self.report_every == 0 {
            return bad("report_every must be positive");
        }
        if !(0.0..=1.0).contains(&self.bernoulli_p) {
            return bad("bernoulli_p must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.expert_low)
            || !(0.0..=1.0).contains(&self.expert_high)
            || self.expert_low >= self.expert_high
        {
            return bad("expert forecasts need 0 <= expert_low < expert_high <= 1");
        }
        if parse_pattern(&self.pattern).is_err() {
            return bad("pattern must be a nonempty string of 0 and 1");
        }
        if self.true_weights.is_empty() || self.true_weights.iter().any(|w| !w.is_finite()) {
            return bad("weights must be a nonempty list of finite numbers");
        }
        if !self.temperature.is_finite() {
            return bad("temperature must be finite");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning_rate must be nonnegative");
        }
        if !(self.l1_strength.is_finite() && self.l1_strength >= 0.0) {
            return bad("l1_strength must be nonnegative");
        }
        if self.experiment == ExperimentKind::Csv && self.input.is_none() {
            return bad("csv experiment needs an input file");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text("# sweep\nexperiment = adversarial\nT=500\nseed = 7 # inline\n\nloss=log\n")
            .unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::Adversarial);
        assert_eq!(cfg.steps, Some(500));
        assert_eq!(cfg.seed, 7);
        cfg.set("T", "900").unwrap();
        assert_eq!(cfg.steps, Some(900));
        assert_eq!(cfg.loss_kind(), LossKind::Log);
        cfg.validate().unwrap();
    }

    #[test]
    fn default_losses() {
        assert_eq!(
            ExperimentConfig::for_experiment(ExperimentKind::PatternL1).loss_kind(),
            LossKind::L1
        );
        assert_eq!(
            ExperimentConfig::for_experiment(ExperimentKind::Covariate).loss_kind(),
            LossKind::L2
        );
    }

    #[test]
    fn rejects_bad_input() {
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.set("T", "-3").is_err());
        assert!(cfg.set("loss", "brier").is_err());
        assert!(cfg.set("colour", "red").is_err());
        assert!(cfg.apply_text("T 5").is_err());
        let err = cfg.apply_text("T = 5\nM = x").unwrap_err();
        assert!(err.to_string().contains("line 2"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn grid_invariant() {
        let mut cfg = ExperimentConfig {
            buckets: 5,
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg.allow_small_grid = true;
        cfg.validate().unwrap();
        cfg.buckets = 1;
        cfg.resolution = 1;
        cfg.validate().unwrap();
        cfg.steps = Some(0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn csv_needs_input() {
        let mut cfg = ExperimentConfig::for_experiment(ExperimentKind::Csv);
        assert!(cfg.validate().is_err());
        cfg.set("input", "data.csv").unwrap();
        cfg.validate().unwrap();
    }

    #[test]
    fn weights_list() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("weights", "1, -2.5,3").unwrap();
        assert_eq!(cfg.true_weights, vec![1.0, -2.5, 3.0]);
        assert!(cfg.set("weights", "1,,2").is_err());
    }
}
