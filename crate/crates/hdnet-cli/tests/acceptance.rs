//! Release-gate counterpart of the library's acceptance target: a sweep is a
//! pure function of its flags and seed. Run with --nocapture for the
//! pass/fail line.

use std::process::Command;
use std::time::Instant;

fn run_sweep(dir: &std::path::Path, out: &str) {
    let output = Command::new(env!("CARGO_BIN_EXE_hdnet"))
        .current_dir(dir)
        .env_remove("HDNET_THREADS")
        .args([
            "sweep", "--kappa1", "0.5,2", "--depths", "0,2", "--seeds", "3", "--seed", "11",
            "--n", "400", "--beta", "1024", "--out", out,
        ])
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "sweep failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn acceptance() {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    run_sweep(tmp.path(), "first");
    run_sweep(tmp.path(), "second");

    let mut identical = true;
    let mut detail = String::new();
    for name in ["raw.csv", "aggregated.csv"] {
        let a = std::fs::read(tmp.path().join("first").join(name)).unwrap();
        let b = std::fs::read(tmp.path().join("second").join(name)).unwrap();
        if a != b {
            identical = false;
            detail = format!("{name} differs between identical invocations");
            break;
        }
    }
    let rows = std::fs::read_to_string(tmp.path().join("first/raw.csv"))
        .unwrap()
        .lines()
        .count()
        - 1;
    if identical && rows != 12 {
        identical = false;
        detail = format!("expected 12 sweep rows (4 cells x 3 seeds), found {rows}");
    }
    if identical {
        detail = format!("{rows} rows byte-identical across two runs");
    }

    let verdict = if identical { "PASS" } else { "FAIL" };
    println!(
        "criterion 09  identical sweeps yield identical tables  {verdict}  {:6.1}s  {detail}",
        start.elapsed().as_secs_f64()
    );
    assert!(identical, "criterion 09: {detail}");
}
