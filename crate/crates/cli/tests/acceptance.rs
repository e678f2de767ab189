//! Determinism criterion: identical seeds give byte-identical CLI output.

use std::process::{Command, ExitCode};

use augmatch::save_csv;
use augmatch::simulate::{gen_scenario, Scenario};
use tempfile::TempDir;

/// Runs the binary and returns stdout followed by the named output files.
fn outputs(args: &[&str], files: &[&std::path::Path]) -> Vec<Vec<u8>> {
    let out = Command::new(env!("CARGO_BIN_EXE_augmatch"))
        .args(args)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut all = vec![out.stdout];
    all.extend(files.iter().map(|p| std::fs::read(p).unwrap()));
    all
}

fn main() -> ExitCode {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("d.csv");
    save_csv(
        &input,
        &gen_scenario(&Scenario::table(2).unwrap(), 1500, 9).unwrap(),
        &[],
    )
    .unwrap();
    let reps = dir.path().join("reps.csv");
    let input_s = input.to_str().unwrap();
    let reps_s = reps.to_str().unwrap();

    let runs: [(Vec<&str>, Vec<&std::path::Path>); 4] = [
        (vec!["estimate", "--input", input_s, "--seed", "7"], vec![]),
        (
            vec!["estimate", "--input", input_s, "--seed", "7", "--format", "csv"],
            vec![],
        ),
        (
            vec![
                "simulate",
                "--scenario",
                "4",
                "--n",
                "1200",
                "--reps",
                "12",
                "--seed",
                "3",
                "--reps-csv",
                reps_s,
            ],
            vec![reps.as_path()],
        ),
        (vec!["releff", "--theta1-grid", "-2:2:0.25"], vec![]),
    ];
    let mut identical = 0;
    for (args, files) in &runs {
        if outputs(args, files) == outputs(args, files) {
            identical += 1;
        }
    }
    let pass = identical == runs.len();
    println!(
        "criterion 10 {} determinism: {identical}/{} CLI invocations byte-identical across two runs",
        if pass { "PASS" } else { "FAIL" },
        runs.len()
    );
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
