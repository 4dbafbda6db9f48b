use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn tfclock(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tfclock"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("failed to launch tfclock")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("terminated by signal")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Parses the detuning CSV into rows of numbers.
fn rows(path: &Path) -> Vec<Vec<f64>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("delta,fidelity,mean_n0,std_n0,delta_omega"));
    lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect()
}

#[test]
fn scan_delta_defaults_lock_in() {
    let dir = TempDir::new().unwrap();
    let o = tfclock(&["scan-delta"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = rows(&dir.path().join("scan_delta_n10.csv"));
    assert_eq!(rows.len(), 201);
    let centre = &rows[100];
    assert_eq!(centre[0], 0.0);
    assert!(centre[1] >= 0.99, "F(0) = {}", centre[1]);

    let meta = json(&dir.path().join("scan_delta_n10.json"));
    assert_eq!(meta["command"], "scan-delta");
    assert_eq!(meta["params"]["n_total"], 10);
    assert_eq!(meta["config"]["grid"]["points"], 201);
    for key in ["linewidth", "delta_star", "delta_omega_min", "sql", "heisenberg"] {
        assert!(meta["metrics"][key].is_number(), "{key}");
    }
    let dw = meta["metrics"]["delta_omega_min"].as_f64().unwrap();
    assert!(dw < meta["metrics"]["sql"].as_f64().unwrap());
}

#[test]
fn analytic_scan_is_symmetric() {
    let dir = TempDir::new().unwrap();
    let o = tfclock(&["scan-delta", "--mode", "analytic_adiabatic", "--n-atoms", "4"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = rows(&dir.path().join("scan_delta_n4.csv"));
    let n = rows.len();
    for i in 0..n {
        assert_eq!(rows[i][0], -rows[n - 1 - i][0]);
        assert!((rows[i][1] - rows[n - 1 - i][1]).abs() <= 1e-8);
    }
}

#[test]
fn usage_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let bad_config = dir.path().join("bad.toml");
    fs::write(&bad_config, "n_atom = [4]\n").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["scan-delta", "--delta-points", "0"],
        vec!["scan-delta", "--delta-points", "10"],
        vec!["scan-delta", "--delta-min", "-0.01", "--delta-max", "0.02"],
        vec!["scan-delta", "--n-atoms", "7"],
        vec!["scan-delta", "--c2", "1"],
        vec!["scan-delta", "--beta", "0.01,0.05"],
        vec!["scan-delta", "--mode", "sideways"],
        vec!["scan-delta", "--config", bad_config.to_str().unwrap()],
        vec!["verify-analytic", "--convention", "main_text"],
        vec!["no-such-command"],
    ];
    for args in cases {
        let o = tfclock(&args, dir.path());
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(!dir.path().join("scan_delta_n10.csv").exists());
}

#[test]
fn output_independent_of_worker_count() {
    let dir = TempDir::new().unwrap();
    let mut csvs = Vec::new();
    for workers in ["1", "3"] {
        let out = dir.path().join(workers);
        let o = tfclock(&["scan-delta", "--n-atoms", "8", "--delta-points", "41", "--workers", workers], &out);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        csvs.push(fs::read(out.join("scan_delta_n8.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn flags_override_config_file() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(&config, "n_atoms = [6]\ndelta_points = 21\nmode = \"analytic_adiabatic\"\nbig_t = 50.0\n").unwrap();
    let o = tfclock(&["scan-delta", "--config", config.to_str().unwrap(), "--delta-points", "31"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(rows(&dir.path().join("scan_delta_n6.csv")).len(), 31);
    let meta = json(&dir.path().join("scan_delta_n6.json"));
    assert_eq!(meta["params"]["big_t"], 50.0);
    assert_eq!(meta["params"]["mode"], "analytic_adiabatic");
}

#[test]
fn scan_n_single_point_refuses_fit() {
    let dir = TempDir::new().unwrap();
    let o = tfclock(&["scan-n", "--n-atoms", "6", "--mode", "analytic_adiabatic"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("scan_n.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("6,"));
    let meta = json(&dir.path().join("scan_n.json"));
    assert!(meta["fits"].is_null());
    assert!(meta["fit_error"].is_string());
}

#[test]
fn scan_n_then_refit() {
    let dir = TempDir::new().unwrap();
    let o = tfclock(&["scan-n", "--n-atoms", "4,8,12,16", "--mode", "analytic_adiabatic"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let meta = json(&dir.path().join("scan_n.json"));
    let slope = meta["fits"]["linewidth"]["slope"].as_f64().unwrap();
    assert!(slope < -0.5, "slope {slope}");

    let refit = dir.path().join("refit");
    let input = dir.path().join("scan_n.csv");
    let o = tfclock(&["fit", "--input", input.to_str().unwrap()], &refit);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let fit = json(&refit.join("fit.json"));
    assert_eq!(fit["fits"]["linewidth"]["slope"], meta["fits"]["linewidth"]["slope"]);
    assert_eq!(fit["fits"]["precision"]["slope"], meta["fits"]["precision"]["slope"]);

    let missing = dir.path().join("missing.csv");
    let o = tfclock(&["fit", "--input", missing.to_str().unwrap()], &refit);
    assert_eq!(code(&o), 1);
}

#[test]
fn scan_noise_reports() {
    let dir = TempDir::new().unwrap();
    let o = tfclock(&["scan-noise", "--n-atoms", "10", "--sigma", "2,0,1", "--delta-points", "101"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("scan_noise.csv")).unwrap();
    let sigmas: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(sigmas, ["0.0", "1.0", "2.0"]);
    let meta = json(&dir.path().join("scan_noise.json"));
    let summary = &meta["summary"][0];
    assert_eq!(summary["peak_non_increasing"], true);
    assert_eq!(summary["no_frequency_shift"], true);
    assert!(summary["largest_sigma_beating_sql"].is_number());

    // sigma = 0 reproduces the noiseless scan exactly
    let plain = dir.path().join("plain");
    let o = tfclock(&["scan-delta", "--n-atoms", "10", "--delta-points", "101"], &plain);
    assert_eq!(code(&o), 0);
    let dw = json(&plain.join("scan_delta_n10.json"))["metrics"]["delta_omega_min"].as_f64().unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert!((row[2].parse::<f64>().unwrap() - dw).abs() <= 1e-10 * dw);
}

#[test]
fn scan_beta_reports() {
    let dir = TempDir::new().unwrap();
    let o = tfclock(&["scan-beta", "--n-atoms", "6", "--beta", "0.1,0.02", "--delta-points", "51"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("scan_beta.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(1).unwrap().starts_with("6,0.02,"));
    let meta = json(&dir.path().join("scan_beta.json"));
    for key in ["fidelity_non_increasing", "mean_n0_non_increasing", "no_frequency_shift", "all_beat_sql"] {
        assert!(meta["summary"][0][key].is_boolean(), "{key}");
    }
}

#[test]
fn verify_analytic_warns_but_passes() {
    let dir = TempDir::new().unwrap();
    let o = tfclock(&["verify-analytic", "--n-atoms", "2,4,6", "--delta-points", "21"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(dir.path().join("verify_analytic.txt")).unwrap();
    assert!(report.contains("0 failures"));
    assert!(report.contains("[ok] n = 2: |2,0,2> amplitude"));
    assert!(report.contains("[ok] n = 1: Hong-Ou-Mandel"));
    assert!(report.contains("[WARN]"));
}
