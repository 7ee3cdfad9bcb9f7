//! End-to-end runs of the `geodesic` binary.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

struct Run {
    out: Output,
    dir: PathBuf,
}

impl Run {
    fn code(&self) -> i32 {
        self.out.status.code().expect("terminated by signal")
    }

    fn stderr(&self) -> String {
        String::from_utf8_lossy(&self.out.stderr).into_owned()
    }

    fn json(&self, name: &str) -> Value {
        let text = std::fs::read_to_string(self.dir.join(name)).unwrap();
        serde_json::from_str(&text).unwrap()
    }

    fn csv(&self, name: &str) -> (Vec<String>, Vec<Vec<String>>) {
        let text = std::fs::read_to_string(self.dir.join(name)).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap().split(',').map(String::from).collect();
        let rows = lines
            .map(|l| l.split(',').map(String::from).collect())
            .collect();
        (header, rows)
    }
}

fn run(tmp: &TempDir, cmd: &str, config: &str, extra: &[&str]) -> Run {
    let cfg = tmp.path().join(format!("{cmd}.json"));
    std::fs::write(&cfg, config).unwrap();
    let dir = tmp.path().join(format!("out_{cmd}"));
    let out = Command::new(env!("CARGO_BIN_EXE_geodesic"))
        .arg(cmd)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .args(extra)
        .output()
        .unwrap();
    Run { out, dir }
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

fn value(row: &[String], k: usize) -> f64 {
    row[k].parse().unwrap()
}

#[test]
fn sphere_orbit_closes_after_one_period() {
    let tmp = TempDir::new().unwrap();
    let cfg = format!(
        r#"{{"n": 3, "a": [4, 4, 4], "x0": [2, 0, 0], "y0": [0, 1, 0], "method": "direct", "t_end": {}}}"#,
        4.0 * PI
    );
    let r = run(&tmp, "integrate", &cfg, &[]);
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let (header, rows) = r.csv("trajectory_direct.csv");
    let (first, last) = (&rows[0], rows.last().unwrap());
    assert!((value(last, 0) - 4.0 * PI).abs() < 1e-12);
    for name in ["x_1", "x_2", "x_3", "y_1", "y_2", "y_3"] {
        let k = column(&header, name);
        assert!((value(first, k) - value(last, k)).abs() < 1e-6, "{name}");
    }
    // duplicate axes leave the F columns empty
    assert!(last[column(&header, "F_1")].is_empty());
    let drift = r.json("drift_direct.json");
    assert!(drift["max_invariant_drift"].as_f64().unwrap() < 1e-7);
}

#[test]
fn both_methods_agree_and_rows_have_constant_width() {
    let tmp = TempDir::new().unwrap();
    let r = run(
        &tmp,
        "integrate",
        r#"{"n": 3, "a": [3, 2, 1], "method": "both", "t_end": 10}"#,
        &["--seed", "7", "--emit-plot-script"],
    );
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let cmp = r.json("comparison.json");
    assert_eq!(cmp["matched_times"].as_u64(), Some(101));
    assert!(cmp["max_x_deviation"].as_f64().unwrap() < 1e-6);
    for name in ["trajectory_direct.csv", "trajectory_clebsch.csv"] {
        let (header, rows) = r.csv(name);
        assert_eq!(header.len(), 2 + 3 + 3 + 2 + 3 + 2);
        assert!(rows.len() > 10);
        assert!(rows.iter().all(|row| row.len() == header.len()), "{name}");
    }
    let (header, rows) = r.csv("trajectory_clebsch.csv");
    assert!(rows
        .iter()
        .all(|row| !row[column(&header, "tau")].is_empty()));
    assert!(r.dir.join("plot.py").exists());
    assert!(r.dir.join("drift_clebsch.json").exists());
}

#[test]
fn malformed_config_reports_location() {
    let tmp = TempDir::new().unwrap();
    let r = run(
        &tmp,
        "integrate",
        "{\n  \"n\": 3,\n  \"a\": [3, 2]\n}\n",
        &[],
    );
    assert_eq!(r.code(), 2);
    let err = r.stderr();
    assert!(err.contains("integrate.json:3"), "{err}");

    let r = run(&tmp, "integrate", "{\"n\": 3,, }", &[]);
    assert_eq!(r.code(), 2);
    assert!(r.stderr().contains("integrate.json:1"));

    let r = run(
        &tmp,
        "integrate",
        r#"{"n": 3, "a": [3, 2, 1], "speed": 2}"#,
        &[],
    );
    assert_eq!(r.code(), 2, "unknown fields are rejected");
}

#[test]
fn off_manifold_initial_point_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let r = run(
        &tmp,
        "integrate",
        r#"{"n": 2, "a": [4, 1], "x0": [1, 0], "y0": [0, 1], "method": "direct", "t_end": 1}"#,
        &[],
    );
    assert_eq!(r.code(), 2);
    assert!(
        r.stderr().contains("off the constraint manifold"),
        "{}",
        r.stderr()
    );
}

#[test]
fn verify_passes_all_checks() {
    let tmp = TempDir::new().unwrap();
    let r = run(
        &tmp,
        "verify",
        r#"{"n": 4, "a": [4, 3, 2, 1], "verify": {"samples": 200}}"#,
        &[],
    );
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let report = r.json("verify.json");
    assert_eq!(report["pass"], Value::Bool(true));
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.len() >= 10);
    for c in checks {
        assert_eq!(c["pass"], Value::Bool(true), "{c}");
        if c["name"] != "gradient_fd" {
            assert!(c["max_residual"].as_f64().unwrap() < 1e-10, "{c}");
        }
    }
}

#[test]
fn duplicate_axes_are_rejected_by_verify() {
    let tmp = TempDir::new().unwrap();
    let r = run(&tmp, "verify", r#"{"n": 3, "a": [4, 4, 4]}"#, &[]);
    assert_eq!(r.code(), 2);
    assert!(r.stderr().contains("DuplicateAxis"), "{}", r.stderr());
    let err = r.json("error.json");
    assert_eq!(err["error"], "DuplicateAxis");
}

#[test]
fn bvp_on_sphere_finds_quarter_circle() {
    let tmp = TempDir::new().unwrap();
    let r = run(
        &tmp,
        "bvp",
        r#"{"n": 3, "a": [1, 1, 1], "bvp": {"p": [1, 0, 0], "q": [0, 1, 0]}}"#,
        &[],
    );
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let sol = r.json("bvp_solution.json");
    assert!((sol["T_star"].as_f64().unwrap() - PI / 2.0).abs() < 1e-6);
    let v: Vec<f64> = sol["v_star"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert!(
        (v[0].abs() + (v[1] - 1.0).abs() + v[2].abs()) < 1e-6,
        "{v:?}"
    );
    let (header, rows) = r.csv("bvp_trajectory.csv");
    let last = rows.last().unwrap();
    assert!((value(last, column(&header, "x_2")) - 1.0).abs() < 1e-8);
}

#[test]
fn bvp_on_ellipse_finds_half_perimeter() {
    let tmp = TempDir::new().unwrap();
    let r = run(
        &tmp,
        "bvp",
        r#"{"n": 2, "a": [4, 1], "bvp": {"p": [2, 0], "q": [-2, 0], "v0": [0, 1]}}"#,
        &[],
    );
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let sol = r.json("bvp_solution.json");
    assert!((sol["T_star"].as_f64().unwrap() - 4.844224110273838).abs() < 1e-6);
}

#[test]
fn bvp_rejects_coincident_endpoints() {
    let tmp = TempDir::new().unwrap();
    let r = run(
        &tmp,
        "bvp",
        r#"{"n": 3, "a": [1, 1, 1], "bvp": {"p": [1, 0, 0], "q": [1, 0, 0]}}"#,
        &[],
    );
    assert_eq!(r.code(), 2, "{}", r.stderr());
}

#[test]
fn bvp_without_iterations_reports_no_convergence() {
    let tmp = TempDir::new().unwrap();
    let r = run(
        &tmp,
        "bvp",
        r#"{"n": 3, "a": [3, 2, 1], "bvp": {"p": [1.7320508075688772, 0, 0], "q": [0, 0, 1], "max_iter": 1}}"#,
        &[],
    );
    assert_eq!(r.code(), 3, "{}", r.stderr());
    assert_eq!(r.json("error.json")["error"], "NoConvergence");
}

#[test]
fn sample_writes_states_on_the_manifold() {
    let tmp = TempDir::new().unwrap();
    let r = run(
        &tmp,
        "sample",
        r#"{"n": 4, "a": [4, 3, 2, 1], "sample": {"count": 25, "speed": 2}}"#,
        &[],
    );
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let (header, rows) = r.csv("samples.csv");
    assert_eq!(rows.len(), 25);
    let (q0, tan) = (column(&header, "q0_res"), column(&header, "tan_res"));
    for row in &rows {
        assert!(value(row, q0).abs() < 1e-12 && value(row, tan).abs() < 1e-12);
        let speed: f64 = (1..=4)
            .map(|j| value(row, column(&header, &format!("y_{j}"))).powi(2))
            .sum();
        assert!((speed.sqrt() - 2.0).abs() < 1e-12);
    }
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn seeded_runs_are_byte_identical() {
    let cfg = r#"{"n": 3, "a": [3, 2, 1], "method": "both", "t_end": 3}"#;
    let (t1, t2) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let a = run(&t1, "integrate", cfg, &["--seed", "11"]);
    let b = run(&t2, "integrate", cfg, &["--seed", "11"]);
    assert_eq!(a.code(), 0);
    assert_eq!(snapshot(&a.dir), snapshot(&b.dir));

    let t3 = TempDir::new().unwrap();
    let c = run(&t3, "integrate", cfg, &["--seed", "12"]);
    assert_ne!(snapshot(&a.dir), snapshot(&c.dir));
}
