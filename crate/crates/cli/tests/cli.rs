use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rgscale"));
    c.env_remove("RGSCALE_WORKERS");
    c
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn classify_config(alpha_prime: f64) -> String {
    format!(
        r#"{{"analysis": {{"kind": "classify", "n": 2, "alpha_2": 1.0, "rows": [{{"l": 3, "alpha_prime": {alpha_prime}}}]}}}}"#
    )
}

#[test]
fn classify_verdicts_for_the_three_relations() {
    let dir = tempfile::tempdir().unwrap();
    for (ap, verdict) in [(2.0, "gaussian"), (1.5, "non_trivial"), (1.0, "divergent")] {
        let cfg = write_config(dir.path(), "c.json", &classify_config(ap));
        let out = dir.path().join(format!("out{ap}"));
        let o = run(&["classify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let rep: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
        assert_eq!(rep["verdict"], verdict);
        assert!(out.join("channels.csv").exists());
        let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["subcommand"], "classify");
        assert_eq!(manifest["config"]["analysis"]["rows"][0]["alpha_prime"], ap);
    }
}

const SCALE_RUN: &str = r#"{
  "model": {"kind": "exponential_cluster", "n": 1, "xi": 1.0, "max_order": 4},
  "analysis": {"kind": "scale_run", "l": 3, "gamma": 0.5, "x": [[0.0], [5.0], [10.0]],
               "r_grid": [8, 16, 32, 64],
               "sampler": {"method": "qmc", "qmc": {"samples": 16384, "replicas": 16, "seed": 7}}}
}"#;

fn read_series_values(path: &Path) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect()
}

#[test]
fn scale_run_tail_decreases() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.json", SCALE_RUN);
    let out = dir.path().join("out");
    let o = run(&["scale-run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = read_series_values(&out.join("series.csv"));
    assert_eq!(v.len(), 4);
    assert!(v.windows(2).all(|w| w[1] < w[0]), "{v:?}");
}

#[test]
fn worker_count_does_not_change_output_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.json", SCALE_RUN);
    let a = dir.path().join("w1");
    let b = dir.path().join("w8");
    let o1 = run(&["scale-run", "--workers", "1", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    let o8 = bin()
        .env("RGSCALE_WORKERS", "8")
        .args(["scale-run", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(code(&o1), 0);
    assert_eq!(code(&o8), 0);
    for f in ["series.csv", "report.json", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn overrides_apply_before_validation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &classify_config(2.0));
    let out = dir.path().join("out");
    let o = run(&[
        "classify",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "analysis.rows.0.alpha_prime=1.0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rep: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(rep["verdict"], "divergent");
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let bad = write_config(
        dir.path(),
        "bad.json",
        r#"{"analysis": {"kind": "classify", "n": 2, "alpha_2": 1.0, "rows": [], "colour": 1}}"#,
    );
    let o = run(&["classify", "--config", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("colour"), "{}", stderr(&o));
    assert_eq!(stderr(&o).trim().lines().count(), 1);

    // analysis kind must match the subcommand
    let cfg = write_config(dir.path(), "c.json", &classify_config(2.0));
    let o = run(&["scale-run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);

    // domain error from the core
    let o = run(&[
        "classify",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "analysis.rows.0.alpha_prime=9.0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("(l-1)·n"), "{}", stderr(&o));
}

#[test]
fn flagged_series_exit_two_with_outputs_written() {
    // four points in the normal regime underflow to zero at large R
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.json",
        r#"{
  "model": {"kind": "exponential_cluster", "n": 1, "xi": 1.0, "max_order": 4},
  "analysis": {"kind": "scale_run", "l": 4, "gamma": 0.5, "x": [[0.0], [5.0], [10.0], [15.0]],
               "r_grid": [8, 128],
               "sampler": {"method": "qmc", "qmc": {"samples": 1024, "replicas": 8, "seed": 1}}}
}"#,
    );
    let out = dir.path().join("out");
    let o = run(&["scale-run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(out.join("series.csv").exists());
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "flagged");
}

#[test]
fn csv_floats_have_seventeen_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "q.json",
        r#"{"analysis": {"kind": "quantum",
            "kms": {"shape": {"kind": "gaussian", "amp": 1.0, "width": 1.0}, "beta": 2.0, "t_grid": [-1.0, 0.0, 1.0]}}}"#,
    );
    let out = dir.path().join("out");
    let o = run(&["quantum", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(out.join("time_correlation.csv")).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let mantissa = row[1].split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17, "{}", row[1]);
    // C(-t) = conj C(t)
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert!((rows[0][1] - rows[2][1]).abs() < 1e-13 && (rows[0][2] + rows[2][2]).abs() < 1e-13);
}

fn fixture_series(dir: &Path) -> (PathBuf, PathBuf) {
    let a = dir.join("block.csv");
    let b = dir.join("field.csv");
    fs::write(&a, "r,value\n8,1.0\n16,0.75\n32,0.6\n64,0.55\n").unwrap();
    fs::write(&b, "r,value\n8,0.9\n16,0.8\n32,0.7\n64,0.65\n").unwrap();
    (a, b)
}

#[test]
fn plot_overlay_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = fixture_series(dir.path());
    let out = dir.path().join("plot");
    let o = run(&[
        "plot",
        "--input",
        a.to_str().unwrap(),
        "--input",
        b.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--x",
        "r",
        "--y",
        "value",
        "--log-x",
        "--title",
        "block vs field",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let svg = fs::read_to_string(out.join("plot.svg")).unwrap();
    assert!(svg.contains(">block<") && svg.contains(">field<"));
    assert_eq!(svg.matches("<polyline").count(), 2);
    let long = fs::read_to_string(out.join("plot_long.csv")).unwrap();
    assert_eq!(long.lines().count(), 9);

    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/overlay.svg");
    if !golden.exists() {
        fs::create_dir_all(golden.parent().unwrap()).unwrap();
        fs::write(&golden, &svg).unwrap();
    }
    assert_eq!(svg, fs::read_to_string(&golden).unwrap());
}

#[test]
fn plot_rejects_empty_and_malformed_input() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "r,value\n").unwrap();
    let out = dir.path().join("plot");
    let o = run(&["plot", "--input", empty.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("empty series"));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "r,value\n1,abc\n").unwrap();
    let o = run(&["plot", "--input", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("not a number"));
}
