use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use augmatch::save_csv;
use augmatch::simulate::{gen_scenario, Scenario};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_augmatch"));
    c.env_remove("AUGMATCH_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(bytes)))
}

fn scenario_csv(dir: &TempDir, n: usize, seed: u64) -> PathBuf {
    let d = gen_scenario(&Scenario::table(2).unwrap(), n, seed).unwrap();
    let p = dir.path().join("d.csv");
    save_csv(&p, &d, &[]).unwrap();
    p
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn estimate_reports_finite_effect() {
    let dir = TempDir::new().unwrap();
    let input = scenario_csv(&dir, 2000, 1);
    let out = run(&[
        "estimate",
        "--input",
        path(&input),
        "--matches",
        "1",
        "--augment",
        "--split",
        "0.05",
        "--seed",
        "7",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out.stdout);
    assert_eq!(v["schema_version"], 1);
    assert!(v["psi"].as_f64().unwrap().is_finite());
    assert!(v["gain"].as_f64().unwrap() >= 0.0);
    assert!(v["fit_aug"].is_object());
    assert_eq!(v["n_eff"], 1900);
    let ci = v["ci"].as_array().unwrap();
    assert!(ci[0].as_f64().unwrap() < ci[1].as_f64().unwrap());
}

#[test]
fn estimate_without_augmentation() {
    let dir = TempDir::new().unwrap();
    let input = scenario_csv(&dir, 800, 2);
    let out = run(&["estimate", "--input", path(&input), "--no-augment"]);
    assert!(out.status.success());
    let v = json(&out.stdout);
    assert!(v["fit_aug"].is_null());
    assert_eq!(v["n_eff"], 800);
}

#[test]
fn estimate_csv_lists_matched_units() {
    let dir = TempDir::new().unwrap();
    let input = scenario_csv(&dir, 1200, 3);
    let out_path = dir.path().join("out.csv");
    let out = run(&[
        "estimate",
        "--input",
        path(&input),
        "--format",
        "csv",
        "--output",
        path(&out_path),
        "--split",
        "0.1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.ends_with(",score,h"), "{header}");
    assert_eq!(lines.count(), 1080);
}

#[test]
fn estimate_is_byte_reproducible() {
    let dir = TempDir::new().unwrap();
    let input = scenario_csv(&dir, 1000, 4);
    let args = ["estimate", "--input", path(&input), "--seed", "11"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}

#[test]
fn validation_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let input = scenario_csv(&dir, 200, 5);
    for args in [
        vec!["estimate", "--input", path(&input), "--matches", "0"],
        vec!["estimate", "--input", path(&input), "--level", "1.5"],
        vec!["estimate", "--input", "/nonexistent/file.csv"],
        vec!["simulate", "--scenario", "9"],
        vec!["simulate", "--scenario", "2", "--theta1", "2"],
        vec!["simulate", "--scenario", "2", "--n", "500", "--reps", "3"],
        vec!["releff", "--theta1-grid", "3:1:0.1"],
        vec!["bogus"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let v = json(&out.stderr);
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["error"]["kind"], "validation");
    }
}

#[test]
fn numerical_failure_exits_three() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("sep.csv");
    let mut text = String::from("a,y,x\n");
    for i in 0..40 {
        let x = f64::from(i) - 19.5;
        text += &format!("{},{},{x}\n", u8::from(x > 0.0), x);
    }
    std::fs::write(&p, text).unwrap();
    let out = run(&["estimate", "--input", path(&p), "--no-augment"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out.stderr)["error"]["kind"], "numerical");
}

#[test]
fn help_and_version_succeed() {
    assert!(run(&["--help"]).status.success());
    assert!(run(&["--version"]).status.success());
    assert!(run(&["simulate", "--help"]).status.success());
}

#[test]
fn simulate_summary_schema() {
    let dir = TempDir::new().unwrap();
    let reps = dir.path().join("reps.csv");
    let out = bin()
        .args([
            "simulate",
            "--scenario",
            "2",
            "--n",
            "400",
            "--reps",
            "4",
            "--seed",
            "1",
            "--split",
            "0",
        ])
        .args(["--reps-csv", path(&reps)])
        .env("AUGMATCH_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out.stdout);
    assert_eq!(v["schema_version"], 1);
    assert!(v["emp_var_reduction"].is_number());
    for key in ["unaugmented", "augmented"] {
        let mut fields: Vec<&str> = v[key].as_object().unwrap().keys().map(String::as_str).collect();
        fields.sort_unstable();
        assert_eq!(
            fields,
            [
                "bias",
                "coverage",
                "emp_var_scaled",
                "mc_se",
                "mean_psi",
                "mean_theor_var",
                "reps"
            ]
        );
    }
    let text = std::fs::read_to_string(reps).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "rep,psi_aug,psi_unaug,var_aug,var_unaug,ci_lo,ci_hi,covered"
    );
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn simulate_analytic_overrides() {
    let out = run(&[
        "simulate",
        "--scenario",
        "analytic",
        "--theta1",
        "-0.5",
        "--n",
        "300",
        "--reps",
        "3",
        "--estimators",
        "unaugmented",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out.stdout);
    assert_eq!(v["scenario"]["theta"][1], -0.5);
    assert!(v["augmented"].is_null());
    assert!(v["emp_var_reduction"].is_null());
}

fn releff_value(args: &[&str]) -> f64 {
    let out = run(&[&["releff"], args].concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    json(&out.stdout)["rows"][0]["relative_efficiency"].as_f64().unwrap()
}

#[test]
fn releff_edge_values() {
    assert_eq!(
        releff_value(&["--theta1", "0", "--beta2", "1", "--beta1", "1", "--gamma1", "1", "--m", "1"]),
        1.0
    );
    assert_eq!(releff_value(&["--beta2", "0"]), 1.0);
    let m1 = releff_value(&["--theta1", "1", "--matches", "1"]);
    let m4 = releff_value(&["--theta1", "1", "--matches", "4"]);
    assert!(m4 > m1 && m1 > 1.0);
}

#[test]
fn releff_sweep_is_monotone_in_abs_theta1() {
    let out = run(&["releff", "--theta1-grid", "-3:3:0.1", "--beta2", "1", "--m", "1"]);
    assert!(out.status.success());
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let mut rows: Vec<(f64, f64)> = rdr
        .deserialize::<std::collections::HashMap<String, f64>>()
        .map(|r| {
            let r = r.unwrap();
            (r["theta1"], r["relative_efficiency"])
        })
        .collect();
    assert_eq!(rows.len(), 61);
    rows.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()));
    for w in rows.windows(2) {
        assert!(w[1].1 >= w[0].1 - 1e-12, "{w:?}");
    }
}
