use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use recal::{recalibrate_csv, run_experiment, Error, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(
    name = "recal",
    version,
    about = "Online recalibration of probability forecasts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a synthetic experiment (or a csv stream) and report metrics.
    Run(Flags),
    /// Recalibrate the p_f column of a CSV file; writes a p_cal column.
    Recalibrate(Flags),
}

#[derive(Args)]
struct Flags {
    /// key = value file applied before the other flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// bernoulli_expert, adversarial, pattern_l1, covariate or csv.
    #[arg(long)]
    experiment: Option<String>,
    /// Number of steps.
    #[arg(long = "T")]
    steps: Option<String>,
    /// Number of raw-forecast buckets.
    #[arg(long = "M")]
    buckets: Option<String>,
    /// Grid resolution.
    #[arg(long = "N")]
    resolution: Option<String>,
    /// l2, log, misclass, l1 or hinge.
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    report_every: Option<String>,
    /// Series CSV for `run`, annotated CSV for `recalibrate`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Calibration curve CSV.
    #[arg(long)]
    curve_out: Option<PathBuf>,
    /// Input CSV with y and p_f (or x0..xk) columns.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Any other config key, e.g. --set temperature=3.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    extra: Vec<String>,
}

impl Flags {
    fn config(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let pairs = [
            ("experiment", &self.experiment),
            ("T", &self.steps),
            ("M", &self.buckets),
            ("N", &self.resolution),
            ("loss", &self.loss),
            ("seed", &self.seed),
            ("report_every", &self.report_every),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        for kv in &self.extra {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k, v)?;
        }
        if let Some(p) = &self.out {
            cfg.out = Some(p.clone());
        }
        if let Some(p) = &self.curve_out {
            cfg.curve_out = Some(p.clone());
        }
        if let Some(p) = &self.input {
            cfg.input = Some(p.clone());
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run(flags) => {
            let cfg = flags.config()?;
            let report = run_experiment(&cfg)?;
            print!("{}", report.summary);
        }
        Command::Recalibrate(flags) => {
            let mut cfg = flags.config()?;
            cfg.experiment = ExperimentKind::Csv;
            let output = cfg
                .out
                .take()
                .ok_or_else(|| Error::Config("recalibrate needs --out".into()))?;
            let report = recalibrate_csv(&cfg, &output)?;
            print!("{}", report.summary);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("recal: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
