//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # comment
//! mode = reconstruct
//! system.A = [0 0; 1 0]
//! system.B = [1; 0]
//! system.C = [-2 0.75]
//! system.D = [1]
//! n_d = 15
//! input = random_seeded
//! seed = 7
//! ```
//!
//! Matrices are bracketed, row-major, with `;` between rows. Instead of
//! `system.*` a SISO plant may be given as `tf.num`/`tf.den` (highest power
//! first) or as `tf.zeros`/`tf.poles`/`tf.gain`; complex entries use `a+bi`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::InitPolicy;
use crate::linalg::Mat;
use crate::partition::PathPreference;
use crate::poly::{tf_to_ss, Poly};
use crate::system::{StateSpace, DEFAULT_GRID_POINTS, DEFAULT_UC_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SystemSource {
    Matrices(StateSpace),
    TransferFunction {
        num: Poly,
        den: Poly,
    },
    ZerosPolesGain {
        zeros: Vec<Complex64>,
        poles: Vec<Complex64>,
        gain: f64,
    },
}

impl SystemSource {
    pub fn to_state_space(&self) -> Result<StateSpace> {
        match self {
            SystemSource::Matrices(s) => Ok(s.clone()),
            SystemSource::TransferFunction { num, den } => tf_to_ss(num, den),
            SystemSource::ZerosPolesGain { zeros, poles, gain } => tf_to_ss(
                &Poly::from_roots(zeros).scale(*gain),
                &Poly::from_roots(poles),
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Synthesize,
    Reconstruct,
    Track,
    TrackUc,
    BoundCurve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputSpec {
    Impulse,
    Step,
    Harmonic,
    RandomSeeded,
}

/// Desired trajectory for the tracking modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReferenceSpec {
    /// Output of the plant driven by the configured input, so exactly trackable.
    PlantOutput,
    /// `t^2 sin(5 pi t)` sampled every millisecond.
    Smooth,
    /// Sum of two slow sinusoids.
    Harmonic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rank_tol: f64,
    pub uc_tol: f64,
    pub eps: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank_tol: crate::linalg::DEFAULT_RANK_TOL,
            uc_tol: DEFAULT_UC_TOL,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub system: SystemSource,
    pub mode: Mode,
    pub n_d: usize,
    /// Explicit controller order; must agree with the controller if both are set.
    pub n_c: Option<usize>,
    pub init_policy: InitPolicy,
    pub path: PathPreference,
    pub input: InputSpec,
    pub reference: ReferenceSpec,
    pub seed: Option<u64>,
    pub steps: usize,
    pub x0: Option<Vec<f64>>,
    pub output_dir: PathBuf,
    pub controller: Option<(Poly, Poly)>,
    pub tolerances: Tolerances,
    pub grid_points: usize,
    /// Largest delay in a bound curve.
    pub nd_max: usize,
}

impl ExperimentConfig {
    pub fn new(system: SystemSource, mode: Mode) -> Self {
        Self {
            system,
            mode,
            n_d: 10,
            n_c: None,
            init_policy: InitPolicy::Zero,
            path: PathPreference::B1First,
            input: InputSpec::RandomSeeded,
            reference: ReferenceSpec::PlantOutput,
            seed: Some(0),
            steps: 200,
            x0: None,
            output_dir: PathBuf::from("out"),
            controller: None,
            tolerances: Tolerances::default(),
            grid_points: DEFAULT_GRID_POINTS,
            nd_max: 30,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| {
            Err(Error::Config {
                line: 0,
                msg: msg.into(),
            })
        };
        if self.input == InputSpec::RandomSeeded && self.seed.is_none() {
            return bad("seed is required when input = random_seeded");
        }
        if self.n_d == 0 {
            return bad("n_d must be at least 1");
        }
        if self.steps == 0 {
            return bad("steps must be positive");
        }
        if self.grid_points == 0 {
            return bad("grid_points must be positive");
        }
        if let (Some(nc), Some((_, den))) = (self.n_c, &self.controller) {
            if den.degree() != nc {
                return bad("n_c disagrees with the controller denominator degree");
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(Error::Config {
                line: line_no,
                msg: "expected `key = value`".into(),
            })?;
            let key = k.trim().to_string();
            if entries
                .insert(key.clone(), (line_no, v.trim().to_string()))
                .is_some()
            {
                return Err(Error::Config {
                    line: line_no,
                    msg: format!("duplicate key `{key}`"),
                });
            }
        }
        let mut p = Parser { entries };
        let cfg = p.build()?;
        if let Some((key, (line, _))) = p.entries.iter().next() {
            return Err(Error::Config {
                line: *line,
                msg: format!("unknown key `{key}`"),
            });
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("mode", mode_name(self.mode).into());
        match &self.system {
            SystemSource::Matrices(sys) => {
                kv("system.A", format_matrix(&sys.a));
                kv("system.B", format_matrix(&sys.b));
                kv("system.C", format_matrix(&sys.c));
                kv("system.D", format_matrix(&sys.d));
            }
            SystemSource::TransferFunction { num, den } => {
                kv("tf.num", format_list(num.coeffs()));
                kv("tf.den", format_list(den.coeffs()));
            }
            SystemSource::ZerosPolesGain { zeros, poles, gain } => {
                kv("tf.zeros", format_complex_list(zeros));
                kv("tf.poles", format_complex_list(poles));
                kv("tf.gain", format!("{gain:?}"));
            }
        }
        kv("n_d", self.n_d.to_string());
        if let Some(nc) = self.n_c {
            kv("n_c", nc.to_string());
        }
        kv("init_policy", policy_name(self.init_policy).into());
        kv("path", path_name(self.path).into());
        kv("input", input_name(self.input).into());
        kv("reference", reference_name(self.reference).into());
        if let Some(seed) = self.seed {
            kv("seed", seed.to_string());
        }
        kv("steps", self.steps.to_string());
        if let Some(x0) = &self.x0 {
            kv("x0", format_list(x0));
        }
        kv("output_dir", self.output_dir.display().to_string());
        if let Some((num, den)) = &self.controller {
            kv("controller.num", format_list(num.coeffs()));
            kv("controller.den", format_list(den.coeffs()));
        }
        kv("tol.rank", format!("{:?}", self.tolerances.rank_tol));
        kv("tol.unit_circle", format!("{:?}", self.tolerances.uc_tol));
        kv("tol.eps", format!("{:?}", self.tolerances.eps));
        kv("grid_points", self.grid_points.to_string());
        kv("nd_max", self.nd_max.to_string());
        s
    }
}

struct Parser {
    entries: BTreeMap<String, (usize, String)>,
}

impl Parser {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn take_with<T>(
        &mut self,
        key: &str,
        f: impl FnOnce(&str) -> std::result::Result<T, String>,
    ) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => f(&v).map(Some).map_err(|msg| Error::Config {
                line,
                msg: format!("{key}: {msg}"),
            }),
        }
    }

    fn build(&mut self) -> Result<ExperimentConfig> {
        let mode = self
            .take_with("mode", |v| parse_enum(v, &MODES))?
            .ok_or(Error::Config {
                line: 0,
                msg: "missing `mode`".into(),
            })?;
        let system = self.system()?;
        let mut cfg = ExperimentConfig::new(system, mode);
        // A config without a seed line has no seed; the default only serves
        // programmatic construction.
        cfg.seed = None;
        if let Some(v) = self.take_with("n_d", parse_usize)? {
            cfg.n_d = v;
        }
        cfg.n_c = self.take_with("n_c", parse_usize)?;
        if let Some(v) = self.take_with("init_policy", |v| parse_enum(v, &POLICIES))? {
            cfg.init_policy = v;
        }
        if let Some(v) = self.take_with("path", |v| parse_enum(v, &PATHS))? {
            cfg.path = v;
        }
        if let Some(v) = self.take_with("input", |v| parse_enum(v, &INPUTS))? {
            cfg.input = v;
        }
        if let Some(v) = self.take_with("reference", |v| parse_enum(v, &REFERENCES))? {
            cfg.reference = v;
        }
        cfg.seed = self.take_with("seed", |v| v.parse::<u64>().map_err(|e| e.to_string()))?;
        if let Some(v) = self.take_with("steps", parse_usize)? {
            cfg.steps = v;
        }
        cfg.x0 = self.take_with("x0", parse_list)?;
        if let Some((_, v)) = self.take("output_dir") {
            cfg.output_dir = PathBuf::from(v);
        }
        let num = self.take_with("controller.num", parse_list)?;
        let den = self.take_with("controller.den", parse_list)?;
        cfg.controller = match (num, den) {
            (Some(n), Some(d)) => Some((Poly::new(n), Poly::new(d))),
            (None, None) => None,
            _ => {
                return Err(Error::Config {
                    line: 0,
                    msg: "controller.num and controller.den must be given together".into(),
                })
            }
        };
        if let Some(v) = self.take_with("tol.rank", parse_f64)? {
            cfg.tolerances.rank_tol = v;
        }
        if let Some(v) = self.take_with("tol.unit_circle", parse_f64)? {
            cfg.tolerances.uc_tol = v;
        }
        if let Some(v) = self.take_with("tol.eps", parse_f64)? {
            cfg.tolerances.eps = v;
        }
        if let Some(v) = self.take_with("grid_points", parse_usize)? {
            cfg.grid_points = v;
        }
        if let Some(v) = self.take_with("nd_max", parse_usize)? {
            cfg.nd_max = v;
        }
        Ok(cfg)
    }

    fn system(&mut self) -> Result<SystemSource> {
        let a = self.take_with("system.A", parse_matrix)?;
        let b = self.take_with("system.B", parse_matrix)?;
        let c = self.take_with("system.C", parse_matrix)?;
        let d = self.take_with("system.D", parse_matrix)?;
        let num = self.take_with("tf.num", parse_list)?;
        let den = self.take_with("tf.den", parse_list)?;
        let zeros = self.take_with("tf.zeros", parse_complex_list)?;
        let poles = self.take_with("tf.poles", parse_complex_list)?;
        let gain = self.take_with("tf.gain", parse_f64)?;
        let cfg_err = |msg: &str| Error::Config {
            line: 0,
            msg: msg.into(),
        };
        let matrices = a.is_some() || b.is_some() || c.is_some() || d.is_some();
        let tf = num.is_some() || den.is_some();
        let zpk = zeros.is_some() || poles.is_some() || gain.is_some();
        if [matrices, tf, zpk].iter().filter(|&&x| x).count() != 1 {
            return Err(cfg_err("exactly one system source is required: system.*, tf.num/den or tf.zeros/poles/gain"));
        }
        if matrices {
            let (Some(a), Some(b), Some(c)) = (a, b, c) else {
                return Err(cfg_err("system.A, system.B and system.C are required"));
            };
            let d = d.unwrap_or_else(|| Mat::zeros(c.nrows(), b.ncols()));
            return Ok(SystemSource::Matrices(StateSpace::new(a, b, c, d)?));
        }
        if tf {
            let (Some(num), Some(den)) = (num, den) else {
                return Err(cfg_err("tf.num and tf.den are required together"));
            };
            return Ok(SystemSource::TransferFunction {
                num: Poly::new(num),
                den: Poly::new(den),
            });
        }
        Ok(SystemSource::ZerosPolesGain {
            zeros: zeros.unwrap_or_default(),
            poles: poles.unwrap_or_default(),
            gain: gain.unwrap_or(1.0),
        })
    }
}

const MODES: [(&str, Mode); 5] = [
    ("synthesize", Mode::Synthesize),
    ("reconstruct", Mode::Reconstruct),
    ("track", Mode::Track),
    ("track_uc", Mode::TrackUc),
    ("bound_curve", Mode::BoundCurve),
];
const POLICIES: [(&str, InitPolicy); 2] = [
    ("zero", InitPolicy::Zero),
    ("warm_start", InitPolicy::WarmStart),
];
const PATHS: [(&str, PathPreference); 2] = [
    ("b1_first", PathPreference::B1First),
    ("d_first", PathPreference::DFirst),
];
const INPUTS: [(&str, InputSpec); 4] = [
    ("impulse", InputSpec::Impulse),
    ("step", InputSpec::Step),
    ("harmonic", InputSpec::Harmonic),
    ("random_seeded", InputSpec::RandomSeeded),
];
const REFERENCES: [(&str, ReferenceSpec); 3] = [
    ("plant_output", ReferenceSpec::PlantOutput),
    ("smooth", ReferenceSpec::Smooth),
    ("harmonic", ReferenceSpec::Harmonic),
];

fn parse_enum<T: Copy>(v: &str, table: &[(&str, T)]) -> std::result::Result<T, String> {
    table
        .iter()
        .find(|(name, _)| *name == v)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            let names: Vec<&str> = table.iter().map(|(n, _)| *n).collect();
            format!("`{v}` is not one of {}", names.join(", "))
        })
}

fn name_of<T: PartialEq>(v: T, table: &[(&'static str, T)]) -> &'static str {
    table
        .iter()
        .find(|(_, t)| *t == v)
        .map(|(n, _)| *n)
        .expect("table is exhaustive")
}

pub fn mode_name(m: Mode) -> &'static str {
    name_of(m, &MODES)
}

fn policy_name(p: InitPolicy) -> &'static str {
    name_of(p, &POLICIES)
}

fn path_name(p: PathPreference) -> &'static str {
    name_of(p, &PATHS)
}

fn input_name(i: InputSpec) -> &'static str {
    name_of(i, &INPUTS)
}

fn reference_name(r: ReferenceSpec) -> &'static str {
    name_of(r, &REFERENCES)
}

fn parse_usize(v: &str) -> std::result::Result<usize, String> {
    v.parse::<usize>().map_err(|e| e.to_string())
}

fn parse_f64(v: &str) -> std::result::Result<f64, String> {
    let x = v.parse::<f64>().map_err(|e| format!("`{v}`: {e}"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("`{v}` is not finite"))
    }
}

fn bracketed(v: &str) -> std::result::Result<&str, String> {
    v.strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| format!("expected a bracketed literal, got `{v}`"))
}

fn tokens(row: &str) -> impl Iterator<Item = &str> {
    row.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
}

/// `[a b; c d]` into a matrix. `[]` is an empty matrix.
pub fn parse_matrix(v: &str) -> std::result::Result<Mat, String> {
    let body = bracketed(v.trim())?;
    if body.trim().is_empty() {
        return Ok(Mat::zeros(0, 0));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for row in body.split(';') {
        rows.push(
            tokens(row)
                .map(parse_f64)
                .collect::<std::result::Result<_, _>>()?,
        );
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err("rows have different lengths".into());
    }
    Ok(Mat::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn parse_list(v: &str) -> std::result::Result<Vec<f64>, String> {
    let body = bracketed(v.trim())?;
    tokens(body).map(parse_f64).collect()
}

/// Complex literal: `1.5`, `-2i`, `0.3+0.4i`, `0.3-4e-1i`.
pub fn parse_complex(t: &str) -> std::result::Result<Complex64, String> {
    let Some(body) = t.strip_suffix('i') else {
        return parse_f64(t).map(|re| Complex64::new(re, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    match split {
        Some(i) => {
            let re = parse_f64(&body[..i])?;
            let im_str = &body[i..];
            let im = match im_str {
                "+" => 1.0,
                "-" => -1.0,
                s => parse_f64(s)?,
            };
            Ok(Complex64::new(re, im))
        }
        None => {
            let im = match body {
                "" | "+" => 1.0,
                "-" => -1.0,
                s => parse_f64(s)?,
            };
            Ok(Complex64::new(0.0, im))
        }
    }
}

fn parse_complex_list(v: &str) -> std::result::Result<Vec<Complex64>, String> {
    let body = bracketed(v.trim())?;
    tokens(body).map(parse_complex).collect()
}

pub fn format_matrix(m: &Mat) -> String {
    let rows: Vec<String> = (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| format!("{:?}", m[(i, j)]))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    format!("[{}]", rows.join("; "))
}

fn format_list(v: &[f64]) -> String {
    format!(
        "[{}]",
        v.iter()
            .map(|x| format!("{x:?}"))
            .collect::<Vec<_>>()
            .join(" ")
    )
}

fn format_complex(z: &Complex64) -> String {
    if z.im == 0.0 {
        format!("{:?}", z.re)
    } else if z.im < 0.0 {
        format!("{:?}{:?}i", z.re, z.im)
    } else {
        format!("{:?}+{:?}i", z.re, z.im)
    }
}

fn format_complex_list(v: &[Complex64]) -> String {
    format!(
        "[{}]",
        v.iter().map(format_complex).collect::<Vec<_>>().join(" ")
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const CASE1: &str = "\
mode = reconstruct
# Case I plant
tf.num = [1 -2 0.75]
tf.den = [1 0 0]
n_d = 15
input = random_seeded
seed = 7
";

    #[test]
    fn parses_transfer_function_config() {
        let cfg = ExperimentConfig::parse(CASE1).unwrap();
        assert_eq!(cfg.mode, Mode::Reconstruct);
        assert_eq!(cfg.n_d, 15);
        assert_eq!(cfg.seed, Some(7));
        let sys = cfg.system.to_state_space().unwrap();
        assert_eq!(sys.c, nalgebra::dmatrix![-2.0, 0.75]);
    }

    #[test]
    fn round_trip() {
        let cfg = ExperimentConfig::parse(CASE1).unwrap();
        let again = ExperimentConfig::parse(&cfg.serialize()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn seed_required_for_random_input() {
        let text = CASE1.replace("seed = 7\n", "");
        assert!(matches!(
            ExperimentConfig::parse(&text),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn two_system_sources_rejected() {
        let text = format!("{CASE1}system.A = [0.5]\nsystem.B = [1]\nsystem.C = [1]\n");
        assert!(matches!(
            ExperimentConfig::parse(&text),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = format!("{CASE1}bogus = 1\n");
        match ExperimentConfig::parse(&text) {
            Err(Error::Config { line, .. }) => assert_eq!(line, 8),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn matrix_and_complex_literals() {
        let m = parse_matrix("[1 2; 3, 4]").unwrap();
        assert_eq!(m, nalgebra::dmatrix![1.0, 2.0; 3.0, 4.0]);
        assert!(parse_matrix("[1 2; 3]").is_err());
        assert_eq!(
            parse_complex("0.3-0.4i").unwrap(),
            Complex64::new(0.3, -0.4)
        );
        assert_eq!(parse_complex("-2i").unwrap(), Complex64::new(0.0, -2.0));
        assert_eq!(
            parse_complex("1e-3+2e-1i").unwrap(),
            Complex64::new(1e-3, 0.2)
        );
        assert_eq!(parse_complex("-1.5").unwrap(), Complex64::new(-1.5, 0.0));
    }
}
