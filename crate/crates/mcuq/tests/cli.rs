//! End-to-end tests of the `mcuq` binary: exit codes, file formats, and the
//! byte-identity contract.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mcuq"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, content).unwrap();
    p
}

const TOY: &str = "i,j,value\n0,0,4\n0,1,2\n1,0,2\n1,1,1\n";

#[test]
fn missing_rank_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "toy.csv", TOY);
    let out = run_in(dir.path(), &["complete", "toy.csv", "-o", "out.csv"]);
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn malformed_csv_reports_line_and_exits_64() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.csv", "i,j,value\n0,0,1\n0,zap,2\n");
    let out = run_in(dir.path(), &["complete", "bad.csv", "--rank", "1", "-o", "out.csv"]);
    assert_eq!(out.status.code(), Some(64));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(":3:"), "stderr lacks line number: {err}");
}

#[test]
fn infeasible_rank_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "toy.csv", TOY);
    let out =
        run_in(dir.path(), &["complete", "toy.csv", "--rank", "9", "-o", "out.csv"]);
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn collapsed_factors_exit_numerical() {
    // All-zero data puts the spectral initializer exactly at zero factors;
    // with an explicit positive ridge the de-bias step hits a singular Gram
    // matrix, which is a numerical failure (exit 2).
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "zero.csv", "i,j,value\n0,0,0\n0,1,0\n1,0,0\n1,1,0\n");
    let out = run_in(
        dir.path(),
        &["complete", "zero.csv", "--rank", "1", "--lambda", "0.5", "-o", "out.csv"],
    );
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("gram"), "stderr: {err}");
}

#[test]
fn complete_reproduces_rank1_input() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "toy.csv", TOY);
    let out = run_in(
        dir.path(),
        &["complete", "toy.csv", "--rank", "1", "--p", "1.0", "-o", "out.csv"],
    );
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("out.csv")).unwrap();
    let vals: Vec<f64> = text
        .lines()
        .flat_map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()))
        .collect();
    let expect = [4.0, 2.0, 2.0, 1.0];
    for (a, b) in vals.iter().zip(expect) {
        assert!((a - b).abs() < 1e-6 * 5.0, "{a} vs {b}");
    }
    assert!(dir.path().join("out.csv.manifest.json").exists());
}

#[test]
fn dense_round_trip_via_cli() {
    // complete → dense CSV → complete again (fully observed, p = 1) gives
    // the same matrix within 1e-6.
    let dir = tempfile::tempdir().unwrap();
    // A noisy rank-2-ish 4×4 input observed on 12 of 16 entries.
    let mut rows = String::from("i,j,value\n");
    let vals = [
        (0, 0, 3.1), (0, 1, 1.2), (0, 2, 0.4), (0, 3, 2.0),
        (1, 0, 1.1), (1, 1, 2.2), (1, 3, 0.7),
        (2, 0, 0.9), (2, 2, 1.8), (2, 3, 1.1),
        (3, 1, 1.4), (3, 2, 0.6),
    ];
    for (i, j, v) in vals {
        rows.push_str(&format!("{i},{j},{v}\n"));
    }
    write(dir.path(), "in.csv", &rows);
    let out = run_in(
        dir.path(),
        &["complete", "in.csv", "--rank", "2", "--rows", "4", "--cols", "4", "-o", "md.csv"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out2 = run_in(dir.path(), &["complete", "md.csv", "--rank", "2", "-o", "md2.csv"]);
    assert!(out2.status.success(), "{}", String::from_utf8_lossy(&out2.stderr));
    let a: Vec<f64> = fs::read_to_string(dir.path().join("md.csv"))
        .unwrap()
        .lines()
        .flat_map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()))
        .collect();
    let b: Vec<f64> = fs::read_to_string(dir.path().join("md2.csv"))
        .unwrap()
        .lines()
        .flat_map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()))
        .collect();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let err = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    assert!(err <= 1e-6 * scale, "round-trip error {err} vs scale {scale}");
}

#[test]
fn interval_widths_match_level() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "toy.csv", TOY);
    let out = run_in(
        dir.path(),
        &[
            "intervals", "toy.csv", "--rank", "1", "--p", "1.0", "--model", "poisson",
            "--level", "0.95", "-o", "iv.csv",
        ],
    );
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("iv.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "i,j,md,s,lo,hi");
    for line in lines {
        let f: Vec<f64> = line.split(',').skip(2).map(|v| v.parse().unwrap()).collect();
        let (s, lo, hi) = (f[1], f[2], f[3]);
        assert!((hi - lo - 2.0 * 1.959964 * s).abs() < 1e-5 * s.max(1e-9), "{line}");
    }
}

#[test]
fn intervals_entry_filter() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "toy.csv", TOY);
    let out = run_in(
        dir.path(),
        &[
            "intervals", "toy.csv", "--rank", "1", "--p", "1.0", "--model", "poisson",
            "--entries", "0,0;1,1", "-o", "iv.csv",
        ],
    );
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("iv.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,0,"));
    assert!(lines[2].starts_with("1,1,"));

    let bad = run_in(
        dir.path(),
        &[
            "intervals", "toy.csv", "--rank", "1", "--p", "1.0", "--model", "poisson",
            "--entries", "9,9", "-o", "iv2.csv",
        ],
    );
    assert_eq!(bad.status.code(), Some(64));
}

#[test]
fn poisson_and_gaussian_intervals_differ() {
    // Heterogeneous truth: Poisson-model spreads vary along a row, the
    // homogeneous-Gaussian ones vary only through factor leverage.
    let dir = tempfile::tempdir().unwrap();
    let mut input = String::from("i,j,value\n");
    for i in 0..6 {
        for j in 0..6 {
            let v = (1 + i) as f64 * (1 + j) as f64; // rank-1, wide range
            input.push_str(&format!("{i},{j},{v}\n"));
        }
    }
    write(dir.path(), "in.csv", &input);
    for model in ["poisson", "gaussian"] {
        let out = run_in(
            dir.path(),
            &[
                "intervals", "in.csv", "--rank", "1", "--p", "1.0", "--model", model, "-o",
                &format!("{model}.csv"),
            ],
        );
        assert!(out.status.success());
    }
    let read_s = |name: &str| -> Vec<f64> {
        fs::read_to_string(dir.path().join(name))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
            .collect()
    };
    let sp = read_s("poisson.csv");
    let sg = read_s("gaussian.csv");
    assert_ne!(sp, sg);
    // Within the first row the Poisson s must actually vary.
    let row0: Vec<f64> = sp[..6].to_vec();
    assert!(row0.windows(2).any(|w| (w[0] - w[1]).abs() > 1e-9));
}

#[test]
fn covmax_zero_budget_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "rows.csv", "i,j,md,s\n0,0,1.5,1.0\n0,1,-2.0,0.5\n");
    let out = run_in(dir.path(), &["covmax", "rows.csv", "--budget", "0", "-o", "alloc.csv"]);
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("alloc.csv")).unwrap();
    for line in text.lines().skip(1) {
        let f: Vec<f64> = line.split(',').skip(2).map(|v| v.parse().unwrap()).collect();
        assert_eq!(f[0], f[1]);
    }
    let out = run_in(dir.path(), &["covmax", "rows.csv", "--budget", "-1", "-o", "a.csv"]);
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn covmax_missing_truth_rows_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "rows.csv", "i,j,md,s\n0,0,1.5,1.0\n2,7,-2.0,0.5\n");
    write(dir.path(), "truth.csv", "i,j,value\n0,0,1.4\n");
    let out = run_in(
        dir.path(),
        &["covmax", "rows.csv", "--budget", "2", "--truth", "truth.csv", "-o", "alloc.csv"],
    );
    assert_eq!(out.status.code(), Some(64));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("(2, 7)"), "stderr: {err}");
}

const SIM_CFG: &str = r#"{"m": 24, "n": 20, "r": 2, "p": 0.7, "mean_target": 8.0,
 "noise": {"kind": "poisson"}, "trials": 5, "seed": 11, "variance_source": "plugin"}"#;

#[test]
fn simulate_deterministic_across_threads_and_reruns() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "sim.json", SIM_CFG);
    let mut bytes = Vec::new();
    for (out_name, threads) in [("r1.json", "1"), ("r2.json", "2"), ("r3.json", "1")] {
        let out = run_in(
            dir.path(),
            &["simulate", "--config", "sim.json", "-o", out_name, "--threads", threads],
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let report = fs::read(dir.path().join(out_name)).unwrap();
        let csv = fs::read(dir.path().join(Path::new(out_name).with_extension("csv"))).unwrap();
        bytes.push((report, csv));
    }
    assert_eq!(bytes[0], bytes[1], "thread count changed the output bytes");
    assert_eq!(bytes[0], bytes[2], "re-run changed the output bytes");
}

#[test]
fn simulate_env_var_overrides_threads() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "sim.json", SIM_CFG);
    let out = bin()
        .current_dir(dir.path())
        .env("MCUQ_THREADS", "1")
        .args(["simulate", "--config", "sim.json", "-o", "r.json", "--threads", "4"])
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn simulate_single_trial_flags_degenerate_std() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "sim.json",
        &SIM_CFG.replace("\"trials\": 5", "\"trials\": 1"),
    );
    let out = run_in(dir.path(), &["simulate", "--config", "sim.json", "-o", "r.json"]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("± 0.0000"), "{stdout}");
    assert!(stdout.contains("std degenerate"), "{stdout}");
}

#[test]
fn simulate_invalid_config_names_field() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "sim.json", &SIM_CFG.replace("\"p\": 0.7", "\"p\": 1.7"));
    let out = run_in(dir.path(), &["simulate", "--config", "sim.json", "-o", "r.json"]);
    assert_eq!(out.status.code(), Some(64));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`p`"), "stderr: {err}");
}

#[test]
fn distcheck_writes_histogram_and_ks() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "sim.json", SIM_CFG);
    let out = run_in(
        dir.path(),
        &["distcheck", "--config", "sim.json", "--entry", "0,0", "-o", "hist.csv"],
    );
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("KS = "), "{stdout}");
    let hist = fs::read_to_string(dir.path().join("hist.csv")).unwrap();
    assert!(hist.starts_with("bin_left,bin_right,count\n"));
    assert_eq!(hist.lines().count(), 41);
    assert!(dir.path().join("hist.json").exists());

    // Deterministic bytes on re-run.
    let out2 = run_in(
        dir.path(),
        &["distcheck", "--config", "sim.json", "--entry", "0,0", "-o", "hist2.csv"],
    );
    assert!(out2.status.success());
    assert_eq!(
        fs::read(dir.path().join("hist.csv")).unwrap(),
        fs::read(dir.path().join("hist2.csv")).unwrap()
    );
}

#[test]
fn rerun_from_manifest_reproduces_bytes() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "sim.json", SIM_CFG);
    let out = run_in(dir.path(), &["simulate", "--config", "sim.json", "-o", "r.json"]);
    assert!(out.status.success());
    let first = fs::read(dir.path().join("r.json")).unwrap();
    let first_csv = fs::read(dir.path().join("r.csv")).unwrap();

    // Re-issue exactly the argv recorded in the manifest.
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r.json.manifest.json")).unwrap())
            .unwrap();
    let argv: Vec<String> = manifest["argv"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    fs::remove_file(dir.path().join("r.json")).unwrap();
    fs::remove_file(dir.path().join("r.csv")).unwrap();
    let out2 = bin().current_dir(dir.path()).args(&argv).output().unwrap();
    assert!(out2.status.success());
    assert_eq!(first, fs::read(dir.path().join("r.json")).unwrap());
    assert_eq!(first_csv, fs::read(dir.path().join("r.csv")).unwrap());
}
