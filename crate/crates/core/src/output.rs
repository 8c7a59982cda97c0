//! File emitters: CSV traces, matrix dumps, bound curves and quick SVG plots.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::system::SignalTrace;

fn num(v: f64) -> String {
    // `-0` and `0` must print identically for byte-stable output.
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.11e}")
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `k,component_0,...` followed by one row per sample.
pub fn trace_csv(trace: &SignalTrace) -> String {
    let mut s = String::from("k");
    for i in 0..trace.dim() {
        let _ = write!(s, ",component_{i}");
    }
    s.push('\n');
    for (k, v) in trace.iter() {
        let _ = write!(s, "{k}");
        for x in v.iter() {
            let _ = write!(s, ",{}", num(*x));
        }
        s.push('\n');
    }
    s
}

pub fn emit_csv(trace: &SignalTrace, path: &Path) -> Result<()> {
    write(path, &trace_csv(trace))
}

pub fn matrix_csv(m: &Mat) -> String {
    let mut s = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| num(m[(i, j)])).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// One row per delay: `n_d` followed by each named bound.
pub fn bound_curve_csv(names: &[&str], rows: &[(usize, Vec<f64>)]) -> String {
    let mut s = format!("n_d,{}\n", names.join(","));
    for (nd, vals) in rows {
        let _ = write!(s, "{nd}");
        for v in vals {
            let _ = write!(s, ",{}", num(*v));
        }
        s.push('\n');
    }
    s
}

pub fn emit_bound_curve(names: &[&str], rows: &[(usize, Vec<f64>)], path: &Path) -> Result<()> {
    write(path, &bound_curve_csv(names, rows))
}

/// Line plot of the first component of each trace.
pub fn svg_plot(title: &str, series: &[(&str, &SignalTrace)]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 320.0;
    const PAD: f64 = 30.0;
    const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let pts: Vec<(i64, f64)> = series
        .iter()
        .flat_map(|(_, t)| t.iter().map(|(k, v)| (k, v[0])))
        .collect();
    let (kmin, kmax) = pts.iter().fold((i64::MAX, i64::MIN), |(a, b), (k, _)| {
        (a.min(*k), b.max(*k))
    });
    let (ymin, ymax) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (_, y)| {
            (a.min(*y), b.max(*y))
        });
    let kspan = ((kmax - kmin) as f64).max(1.0);
    let yspan = if ymax > ymin { ymax - ymin } else { 1.0 };
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\">\n<text x=\"{PAD}\" y=\"18\" font-size=\"12\">{title}</text>\n"
    );
    for (i, (name, t)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let line: Vec<String> = t
            .iter()
            .map(|(k, v)| {
                let x = PAD + (k - kmin) as f64 / kspan * (W - 2.0 * PAD);
                let y = H - PAD - (v[0] - ymin) / yspan * (H - 2.0 * PAD);
                format!("{x:.1},{y:.1}")
            })
            .collect();
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{color}\" points=\"{}\"/>\n<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{color}\">{name}</text>",
            line.join(" "),
            W - 120.0,
            PAD + 14.0 * i as f64
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Output directory that remembers what it wrote so a failed run can be
/// rolled back.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &[String] {
        &self.written
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<()> {
        write(&self.root.join(name), text)?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn trace(&mut self, name: &str, trace: &SignalTrace) -> Result<()> {
        self.text(name, &trace_csv(trace))
    }

    pub fn matrix(&mut self, name: &str, m: &Mat) -> Result<()> {
        self.text(name, &matrix_csv(m))
    }

    /// Delete everything this run wrote.
    pub fn discard(self) {
        for name in &self.written {
            let _ = fs::remove_file(self.root.join(name));
        }
        // Only succeeds if the directory is now empty, which is what we want.
        let _ = fs::remove_dir(&self.root);
    }
}
