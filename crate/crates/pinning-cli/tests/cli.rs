//! End-to-end tests of the `pinning` binary: output contracts, exit codes,
//! determinism, and config-file precedence.

use std::path::PathBuf;
use std::process::{Command, Output};

fn pinning(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pinning"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("pinning-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn curve_emits_101_rows_and_echoes_config() {
    let out = pinning(&["curve", "--alpha", "1", "--coeffs", "0.7071,0.7071", "--beta", "0:2:0.02"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("# pinning curve"));
    assert!(text.contains("# coeffs = 0.7071,0.7071"));
    assert!(text.starts_with("#"));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 101);
    assert_eq!(rows[0].len(), 6);
}

#[test]
fn curve_q1_closed_form_column_matches() {
    let out = pinning(&["curve", "--alpha", "1", "--coeffs", "0.6,0.8", "--k-infinity", "0.3", "--beta", "0:2:0.1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for row in data_rows(&text) {
        let h_c_ann: f64 = row[3].parse().unwrap();
        let closed: f64 = row[4].parse().unwrap();
        assert!((h_c_ann - closed).abs() < 1e-10);
    }
    // β = 0 row pins the transient offset h_c(0) = −log(1 − K(∞))
    let first = &data_rows(&text)[0];
    let h_c_ann: f64 = first[3].parse().unwrap();
    assert!((h_c_ann - -(0.7f64).ln()).abs() < 1e-12);
}

#[test]
fn curve_q3_leaves_closed_form_empty() {
    let out = pinning(&["curve", "--coeffs", "0.5,0.5,0.5,0.5", "--beta", "0,1"]);
    assert!(out.status.success());
    for row in data_rows(&stdout(&out)) {
        assert_eq!(row[4], "");
    }
}

#[test]
fn free_energy_surface_contract() {
    let out = pinning(&["free-energy", "--alpha", "1.5", "--beta", "0,0.8", "--h", "-0.6:0.6:0.05"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 2 * 25);
    let mut by_beta: std::collections::BTreeMap<String, Vec<(f64, f64)>> = Default::default();
    for row in &rows {
        let h: f64 = row[1].parse().unwrap();
        let eps: f64 = row[3].parse().unwrap();
        let f: f64 = row[4].parse().unwrap();
        // zero exactly at and below criticality, positive above
        if eps <= 0.0 {
            assert_eq!(f, 0.0);
        } else {
            assert!(f > 0.0);
        }
        by_beta.entry(row[0].clone()).or_default().push((h, f));
    }
    // convex in h along each β slice
    for slice in by_beta.values() {
        for w in slice.windows(3) {
            let second = w[2].1 - 2.0 * w[1].1 + w[0].1;
            assert!(second >= -1e-9, "convexity defect {second}");
        }
    }
}

#[test]
fn validate_quick_passes_and_reports_json() {
    let report = tmp("quick_report.json");
    let out = pinning(&["validate", "--quick", "--out", report.to_str().unwrap()]);
    assert!(out.status.success(), "exit: {:?}", out.status.code());
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(doc["pass"], serde_json::Value::Bool(true));
    let checks = doc["checks"].as_array().unwrap();
    assert!(checks.len() >= 20);
    for c in checks {
        assert_eq!(c["pass"], serde_json::Value::Bool(true), "failed: {}", c["name"]);
        assert!(c["name"].is_string() && c["lhs"].is_number() && c["tolerance"].is_number());
    }
}

#[test]
fn sample_is_byte_identical_across_runs() {
    let a = pinning(&["sample", "--alpha", "2", "--beta", "0.9", "--n", "2000", "--paths", "2", "--seed", "11"]);
    let b = pinning(&["sample", "--alpha", "2", "--beta", "0.9", "--n", "2000", "--paths", "2", "--seed", "11"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.contains("# inverse_mean_spacing = "));
    assert!(text.contains("density = "));
    let c = pinning(&["sample", "--alpha", "2", "--beta", "0.9", "--n", "2000", "--paths", "2", "--seed", "12"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn corrupted_mass_table_exits_2() {
    let path = tmp("bad_masses.json");
    std::fs::write(&path, r#"{"family":"table","masses":[0.4,-0.2,0.1]}"#).unwrap();
    let out = pinning(&["curve", "--mass-table", path.to_str().unwrap(), "--beta", "0,1"]);
    assert_eq!(out.status.code(), Some(2));

    let ok = tmp("ok_masses.json");
    std::fs::write(&ok, r#"{"family":"table","masses":[0.5,0.25,0.125,0.0625]}"#).unwrap();
    let out = pinning(&["curve", "--mass-table", ok.to_str().unwrap(), "--coeffs", "0.6,0.8", "--beta", "0,1"]);
    assert!(out.status.success());
}

#[test]
fn bad_inputs_exit_2() {
    assert_eq!(pinning(&["curve", "--beta", "2:0:0.1"]).status.code(), Some(2));
    assert_eq!(pinning(&["curve", "--format", "yaml"]).status.code(), Some(2));
    assert_eq!(pinning(&["curve", "--coeffs", "0.5,0.5"]).status.code(), Some(2));
    assert_eq!(pinning(&["curve", "--alpha", "-1"]).status.code(), Some(2));
    assert_eq!(pinning(&["sample", "--beta", "0:1:0.5"]).status.code(), Some(2));
    assert_eq!(pinning(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn config_file_feeds_defaults_and_flags_override() {
    let cfg = tmp("sweep.cfg");
    std::fs::write(&cfg, "alpha = 1.5\nbeta = 0:1:0.5\ncoeffs = 0.6,0.8\n").unwrap();
    let from_file = pinning(&["curve", "--config", cfg.to_str().unwrap()]);
    assert!(from_file.status.success());
    assert_eq!(data_rows(&stdout(&from_file)).len(), 3);
    assert!(stdout(&from_file).contains("# alpha = 1.5"));

    let overridden = pinning(&["curve", "--config", cfg.to_str().unwrap(), "--beta", "0,0.5,1,1.5"]);
    assert_eq!(data_rows(&stdout(&overridden)).len(), 4);

    let broken = tmp("broken.cfg");
    std::fs::write(&broken, "no_such_key = 1\n").unwrap();
    assert_eq!(pinning(&["curve", "--config", broken.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn output_is_identical_across_thread_counts() {
    let one = pinning(&["curve", "--beta", "0:1:0.05", "--threads", "1"]);
    let four = pinning(&["curve", "--beta", "0:1:0.05", "--threads", "4"]);
    assert!(one.status.success() && four.status.success());
    let strip = |out: &Output| {
        stdout(out)
            .lines()
            .filter(|l| !l.starts_with("# threads"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&one), strip(&four));
}

#[test]
fn json_format_mirrors_csv() {
    let out = pinning(&["curve", "--beta", "0,1", "--format", "json"]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["command"], "curve");
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0]["h_c_ann"].is_number());
    assert!(rows[0]["closed_form"].is_number()); // q = 2 default coeffs
    assert_eq!(doc["config"]["beta"], "0,1");

    let csv = pinning(&["curve", "--beta", "0,1"]);
    let csv_rows = data_rows(&stdout(&csv));
    let json_h: f64 = rows[1]["h_c_ann"].as_f64().unwrap();
    let csv_h: f64 = csv_rows[1][3].parse().unwrap();
    assert_eq!(json_h, csv_h);
}
