//! File writers. Every writer is a pure function of its inputs, so identical
//! runs produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clebsch_geodesic::conserved::{DriftReport, InvariantSnapshot};
use clebsch_geodesic::model::TrajectorySample;
use serde_json::{Map, Value};

use crate::error::CliError;

/// Seventeen significant digits, enough to round-trip any double.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |j| format!("{prefix}_{j}"))
}

fn invariant_header(n: usize) -> Vec<String> {
    let mut h = vec!["H".to_string(), "I".to_string()];
    h.extend(numbered("F", n));
    h.push("q0_res".into());
    h.push("tan_res".into());
    h
}

/// `H,I,F_1..F_n,q0_res,tan_res` fields; `F` fields are empty when the
/// integrals are undefined.
fn invariant_fields(n: usize, s: &InvariantSnapshot) -> Vec<String> {
    let mut row = vec![num(s.h_free), num(s.i)];
    match &s.f {
        Some(f) => row.extend(f.iter().map(|v| num(*v))),
        None => row.extend(std::iter::repeat_n(String::new(), n)),
    }
    row.push(num(s.q0_residual));
    row.push(num(s.tangency_residual));
    row
}

pub fn trajectory_header(n: usize) -> String {
    let mut h = vec!["t".to_string(), "tau".to_string()];
    h.extend(numbered("x", n));
    h.extend(numbered("y", n));
    h.extend(invariant_header(n));
    h.join(",")
}

pub fn trajectory_csv(n: usize, samples: &[TrajectorySample]) -> String {
    let mut out = trajectory_header(n);
    out.push('\n');
    for s in samples {
        let mut row = vec![num(s.t), s.tau.map(num).unwrap_or_default()];
        row.extend(s.x.iter().chain(&s.y).map(|v| num(*v)));
        row.extend(invariant_fields(n, &s.invariants));
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// Table of independent states: `index,x_1..x_n,y_1..y_n,H,I,F..,q0_res,tan_res`.
pub fn states_csv(n: usize, states: &[(Vec<f64>, Vec<f64>, InvariantSnapshot)]) -> String {
    let mut h = vec!["index".to_string()];
    h.extend(numbered("x", n));
    h.extend(numbered("y", n));
    h.extend(invariant_header(n));
    let mut out = h.join(",");
    out.push('\n');
    for (k, (x, y, inv)) in states.iter().enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(x.iter().chain(y).map(|v| num(*v)));
        row.extend(invariant_fields(n, inv));
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// Flat JSON object of a drift report.
pub fn drift_json(method: &str, report: &DriftReport) -> Value {
    let mut m = Map::new();
    m.insert("method".into(), method.into());
    m.insert("samples".into(), report.samples.into());
    for (k, v) in report.entries() {
        m.insert(k, v.into());
    }
    m.insert(
        "max_invariant_drift".into(),
        report.max_invariant_drift().into(),
    );
    m.insert(
        "max_constraint_residual".into(),
        report.max_constraint_residual().into(),
    );
    Value::Object(m)
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    fs::write(&path, contents).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

pub fn write_json(dir: &Path, name: &str, value: &Value) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    text.push('\n');
    write_file(dir, name, &text)
}

/// A matplotlib script plotting positions and energy drift of each CSV.
pub fn plot_script(csv_names: &[String]) -> String {
    let files = csv_names
        .iter()
        .map(|f| format!("    {f:?},"))
        .collect::<Vec<_>>()
        .join("\n");
    format!(
        r#"#!/usr/bin/env python3
"""Plot trajectories written by `geodesic`. Run from the output directory."""
import csv
import matplotlib.pyplot as plt

FILES = [
{files}
]


def load(name):
    with open(name) as fh:
        rows = list(csv.DictReader(fh))
    return {{k: [float(r[k]) if r[k] else float("nan") for r in rows] for k in rows[0]}}


for name in FILES:
    d = load(name)
    time = d.get("t") or [float(i) for i in d["index"]]
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(8, 6))
    for key in sorted(k for k in d if k.startswith("x_")):
        ax1.plot(time, d[key], label=key)
    ax1.set_ylabel("position")
    ax1.legend(loc="upper right")
    h0 = d["H"][0]
    ax2.semilogy(time, [abs(h - h0) / abs(h0) + 1e-17 for h in d["H"]], label="H drift")
    i0 = d["I"][0]
    ax2.semilogy(time, [abs(i - i0) / abs(i0) + 1e-17 for i in d["I"]], label="I drift")
    ax2.set_xlabel("t")
    ax2.legend(loc="upper right")
    fig.suptitle(name)
    fig.savefig(name.rsplit(".", 1)[0] + ".png", dpi=120)
    plt.close(fig)
"#
    )
}
