use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::Rng;
use recal::csv_io::{read_records, write_records};
use recal::{recalibrate_csv, ExperimentConfig};
use recal_core::rng::substream;
use recal_core::StreamRecord;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("recal-cli-{}-{name}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn recal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_recal"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_series_and_curve() {
    let dir = scratch("run");
    let (series, curve) = (dir.join("series.csv"), dir.join("curve.csv"));
    let out = recal(&[
        "run",
        "--experiment",
        "adversarial",
        "--T",
        "450",
        "--seed",
        "3",
        "--report-every",
        "200",
        "--out",
        s(&series),
        "--curve-out",
        s(&curve),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("cal_err_l2=") && stdout.contains("regret="));

    let text = fs::read_to_string(&series).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "t,loss_recal_avg,loss_base_avg,cal_err_l1,cal_err_l2"
    );
    let ts: Vec<&str> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(ts, ["200", "400", "450"]);

    let text = fs::read_to_string(&curve).unwrap();
    assert!(text.starts_with("bucket_lo,bucket_hi,mean_pred,mean_outcome,count\n"));
    let total: u64 = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 450);
}

#[test]
fn flags_override_config_file() {
    let dir = scratch("config");
    let cfg = dir.join("exp.cfg");
    fs::write(&cfg, "experiment = pattern_l1\nT = 50\nseed = 9\n").unwrap();
    let out = recal(&["run", "--config", s(&cfg), "--T", "30"]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("experiment=pattern_l1"));
    assert!(stdout.contains("loss=l1"));
    assert!(stdout.contains("T=30 M=10 N=10 seed=9"));
}

#[test]
fn config_errors_exit_2() {
    for args in [
        &["run", "--experiment", "nope"][..],
        &["run", "--T", "0"],
        &["run", "--M", "4", "--N", "5"],
        &["run", "--loss", "brier"],
        &["run", "--set", "colour=red"],
        &["run", "--bogus-flag"],
        &["recalibrate", "--input", "x.csv"],
    ] {
        assert_eq!(recal(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn data_errors_exit_3() {
    let dir = scratch("bad");
    let bad = dir.join("bad.csv");
    fs::write(&bad, "p_f,y\n1.3,1\n").unwrap();
    let out = recal(&[
        "recalibrate",
        "--input",
        s(&bad),
        "--out",
        s(&dir.join("o.csv")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(
        stderr.contains("row 1") && stderr.contains("p_f"),
        "{stderr}"
    );

    let short = dir.join("short.csv");
    fs::write(&short, "p_f,y\n0.5,1\n").unwrap();
    let out = recal(&[
        "run",
        "--experiment",
        "csv",
        "--input",
        s(&short),
        "--T",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(3));

    let missing = recal(&[
        "run",
        "--experiment",
        "csv",
        "--input",
        s(&dir.join("none.csv")),
    ]);
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn recalibrate_two_rows() {
    let dir = scratch("two");
    let (input, output) = (dir.join("in.csv"), dir.join("out.csv"));
    fs::write(&input, "p_f,y\n0.7,1\n0.3,0\n").unwrap();
    let args = [
        "recalibrate",
        "--input",
        s(&input),
        "--out",
        s(&output),
        "--M",
        "2",
        "--N",
        "2",
        "--seed",
        "4",
    ];
    assert!(recal(&args).status.success());
    let first = fs::read(&output).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    assert!(text.starts_with("p_f,y,p_cal\n"));
    for line in text.lines().skip(1) {
        let p: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!([0.0, 0.5, 1.0].contains(&p), "{p}");
    }
    assert!(recal(&args).status.success());
    assert_eq!(fs::read(&output).unwrap(), first);
}

#[test]
fn recalibrating_calibrated_data_is_nearly_free() {
    let dir = scratch("calibrated");
    let (input, output) = (dir.join("in.csv"), dir.join("out.csv"));
    let mut rng = substream(21, 0);
    let recs: Vec<StreamRecord> = (0..100_000)
        .map(|_| {
            let p: f64 = rng.random();
            StreamRecord::new(None, Some(p), u8::from(rng.random_bool(p))).unwrap()
        })
        .collect();
    write_records(&input, &recs, None).unwrap();
    let cfg = ExperimentConfig {
        input: Some(input),
        seed: 5,
        ..ExperimentConfig::default()
    };
    let report = recalibrate_csv(&cfg, &output).unwrap();
    assert!(
        report.summary.regret.abs() <= 0.01,
        "{}",
        report.summary.regret
    );
    assert_eq!(read_records(&output).unwrap(), recs);
}
