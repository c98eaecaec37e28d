//! Black-box contract of the command-line interface: listing, the three
//! modes, exit codes, and scenario loading by path.

use std::io::Write;
use std::process::{Command, Output};

fn polyuq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyuq")).args(args).output().expect("binary runs")
}

fn json_stdout(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

#[test]
fn listing_is_sorted_and_contains_the_benchmark_scenarios() {
    let out = polyuq(&[]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let names: Vec<&str> =
        text.lines().filter_map(|l| l.split_whitespace().next()).collect();
    let mut sorted = names.clone();
    sorted.sort_unstable();
    assert_eq!(names, sorted, "listing must be sorted");
    for required in ["ouq_g", "ouq_e_range_100_500", "ouq_e_range_0_1000"] {
        assert!(names.contains(&required), "missing {required} in {names:?}");
    }

    // every listed name loads cleanly through check mode
    for name in names {
        let check = polyuq(&["--scenario", name, "--mode", "check"]);
        assert!(check.status.success(), "builtin {name} fails its own check");
    }
}

#[test]
fn bounds_collapse_without_epistemic_quantities() {
    let out = polyuq(&["--scenario", "gaussian_margin", "--mode", "bounds", "--lines", "40"]);
    assert!(out.status.success());
    let doc = json_stdout(&out);
    let rep = &doc["results"][0];
    let lower = rep["lower"]["value"].as_f64().unwrap();
    let upper = rep["upper"]["value"].as_f64().unwrap();
    assert_eq!(lower, upper, "no optimization dimensions means a single chi value");
    let exact = 0.022750131948179195; // Phi(-2)
    assert!((upper - exact).abs() < 0.05 * exact, "{upper} vs {exact}");
}

#[test]
fn check_mode_reports_diagnostics_and_exit_one() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    write!(
        file,
        r#"
            name = "broken"
            event = "failure"

            [[quantity]]
            name = "y"
            range = [0.0, 1.0]
            classification = "epistemic"

            [[quantity.moment]]
            order = 1
            kind = "classical"
            lower = 4.0
            upper = 6.0

            [response]
            inputs = ["y"]
            [response.affine]
            coeffs = [1.0]
            offset = -0.5
        "#
    )
    .unwrap();
    let path = file.path().to_str().unwrap();

    let out = polyuq(&["--scenario", path, "--mode", "check"]);
    assert_eq!(out.status.code(), Some(1), "broken scenario must exit 1");
    let doc = json_stdout(&out);
    assert_eq!(doc["results"]["clean"], serde_json::Value::Bool(false));
    assert!(!doc["results"]["diagnostics"].as_array().unwrap().is_empty());
}

#[test]
fn infeasible_design_problems_exit_two() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    let mut text =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/toy_coupled_design.toml"))
            .unwrap();
    // an admissible failure probability no design point can reach
    let from = "p_adm = 0.0013498980316300946";
    assert!(text.contains(from), "fixture drifted: {text}");
    text = text.replace(from, "p_adm = 1e-12");
    file.write_all(text.as_bytes()).unwrap();
    let path = file.path().to_str().unwrap();

    let out = polyuq(&[
        "--scenario", path, "--mode", "rbdo", "--pop", "12", "--iters", "20", "--lines", "20",
    ]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc = json_stdout(&out);
    let rep = &doc["results"][0];
    assert_eq!(rep["feasible"], serde_json::Value::Bool(false));
    assert!(rep["best"].is_null());
}

#[test]
fn scenario_files_load_by_path() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/toy_mean_bound.toml");
    let out = polyuq(&["--scenario", path, "--mode", "bounds", "--pop", "24", "--iters", "60"]);
    assert!(out.status.success());
    let doc = json_stdout(&out);
    let upper = doc["results"][0]["upper"]["value"].as_f64().unwrap();
    assert!((upper - 0.6).abs() <= 1e-3, "sharp mean-constrained bound is 3/5, got {upper}");
}

#[test]
fn conflicting_estimator_flags_are_a_usage_error() {
    let out = polyuq(&[
        "--scenario", "gaussian_margin", "--samples", "1000", "--lines", "50",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--samples"));
}
