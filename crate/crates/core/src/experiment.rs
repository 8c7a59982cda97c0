//! Config-driven runs with file output and a JSON report.

use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cases::smooth_reference;
use crate::config::{mode_name, ExperimentConfig, InputSpec, Mode, ReferenceSpec};
use crate::design::{Design, DesignOptions};
use crate::error::{Error, Result};
use crate::estimator::{self, burn_in, FirConfig, InitPolicy};
use crate::linalg::{self, Vector};
use crate::output::{svg_plot, OutputDir};
use crate::partition::{verify_zero_dynamics, ReconstructionPath};
use crate::system::{simulate, SignalTrace, StateSpace};
use crate::tracker::{track, tracking_error_bound, TrackingConfig};
use crate::uio::{residual_scale, verify_uio_conditions};
use crate::unit_circle::{
    chain_norms, chain_poles, factor_unit_circle_zeros, track_with_unit_circle, Controller,
};

/// A named quantity with an optional acceptance limit (`value <= limit`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: Option<f64>,
    pub passed: bool,
}

impl Check {
    fn limit(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit: Some(limit),
            passed: value <= limit,
        }
    }

    fn info(name: &str, value: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit: None,
            passed: value.is_finite(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroSummary {
    pub minimum_phase: Vec<Complex64>,
    pub non_minimum_phase: Vec<Complex64>,
    pub unit_circle: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: String,
    pub passed: bool,
    pub zeros: Option<ZeroSummary>,
    pub q: Option<usize>,
    pub path: Option<String>,
    pub checks: Vec<Check>,
    /// Files written by the run, relative to the output directory,
    /// including `report.json`.
    pub manifest: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Also write an SVG plot of the main traces.
    pub plot: bool,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    run_experiment_with(cfg, RunOptions::default())
}

/// Run `cfg`, writing into `cfg.output_dir`. On error every file written so
/// far is removed again.
pub fn run_experiment_with(cfg: &ExperimentConfig, opts: RunOptions) -> Result<RunReport> {
    cfg.validate()?;
    let mut out = OutputDir::create(&cfg.output_dir)?;
    match execute(cfg, opts, &mut out) {
        Ok(mut report) => {
            report.passed = report.checks.iter().all(|c| c.passed);
            report.manifest = out.manifest().to_vec();
            report.manifest.push("report.json".into());
            let json = serde_json::to_string_pretty(&report).expect("report serializes");
            if let Err(e) = out.text("report.json", &(json + "\n")) {
                out.discard();
                return Err(e);
            }
            Ok(report)
        }
        Err(e) => {
            out.discard();
            Err(e)
        }
    }
}

fn design_options(cfg: &ExperimentConfig) -> DesignOptions {
    let mut o = DesignOptions {
        rank_tol: cfg.tolerances.rank_tol,
        uc_tol: cfg.tolerances.uc_tol,
        grid_points: cfg.grid_points,
        path: cfg.path,
        ..DesignOptions::default()
    };
    o.synthesis.eps = cfg.tolerances.eps;
    o
}

fn x0_for(cfg: &ExperimentConfig, n: usize) -> Result<Vector> {
    match &cfg.x0 {
        None => Ok(Vector::zeros(n)),
        Some(v) if v.len() == n => Ok(Vector::from_column_slice(v)),
        Some(v) => Err(Error::dim(format!(
            "x0 has {} entries, plant order is {n}",
            v.len()
        ))),
    }
}

/// Input signal described by `spec`, `m` channels from index 0.
pub fn generate_input(
    spec: InputSpec,
    m: usize,
    steps: usize,
    seed: Option<u64>,
) -> Result<SignalTrace> {
    match spec {
        InputSpec::Impulse => SignalTrace::from_fn(0, m, steps, |k| {
            Vector::from_element(m, if k == 0 { 1.0 } else { 0.0 })
        }),
        InputSpec::Step => SignalTrace::from_fn(0, m, steps, |_| Vector::from_element(m, 1.0)),
        InputSpec::Harmonic => SignalTrace::from_fn(0, m, steps, |k| {
            Vector::from_fn(m, |i, _| {
                (0.05 * (i + 1) as f64 * k as f64 + i as f64).sin()
            })
        }),
        InputSpec::RandomSeeded => {
            let seed = seed.ok_or(Error::Config {
                line: 0,
                msg: "seed is required when input = random_seeded".into(),
            })?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            SignalTrace::from_fn(0, m, steps, |_| {
                Vector::from_fn(m, |_, _| rng.gen_range(-1.0..=1.0))
            })
        }
    }
}

fn reference(
    cfg: &ExperimentConfig,
    sys: &StateSpace,
) -> Result<(SignalTrace, Option<SignalTrace>)> {
    let l = sys.l();
    match cfg.reference {
        ReferenceSpec::PlantOutput => {
            let u = generate_input(cfg.input, sys.m(), cfg.steps, cfg.seed)?;
            let (_, y) = simulate(sys, &Vector::zeros(sys.n()), &u)?;
            Ok((y, Some(u)))
        }
        ReferenceSpec::Smooth => Ok((
            SignalTrace::from_fn(0, l, cfg.steps, |k| {
                Vector::from_element(l, smooth_reference(k))
            })?,
            None,
        )),
        ReferenceSpec::Harmonic => Ok((
            SignalTrace::from_fn(0, l, cfg.steps, |k| {
                let t = k as f64;
                Vector::from_element(l, (0.02 * t).sin() + 0.5 * (0.05 * t).cos())
            })?,
            None,
        )),
    }
}

fn l2_norm(t: &SignalTrace) -> f64 {
    t.samples()
        .iter()
        .map(|v| v.norm_squared())
        .sum::<f64>()
        .sqrt()
}

fn zero_summary(d: &Design) -> ZeroSummary {
    ZeroSummary {
        minimum_phase: d.zeros.mp_zeros.clone(),
        non_minimum_phase: d.zeros.nmp_zeros.clone(),
        unit_circle: d.zeros.unit_circle_zeros.clone(),
    }
}

fn path_label(d: &Design) -> String {
    match d.zero_dynamics.path {
        ReconstructionPath::B1 => "b1".into(),
        ReconstructionPath::D => "d".into(),
    }
}

fn report(cfg: &ExperimentConfig, design: Option<&Design>, checks: Vec<Check>) -> RunReport {
    RunReport {
        mode: mode_name(cfg.mode).into(),
        passed: false,
        zeros: design.map(zero_summary),
        q: design.map(Design::q),
        path: design.map(path_label),
        checks,
        manifest: Vec::new(),
    }
}

fn execute(cfg: &ExperimentConfig, opts: RunOptions, out: &mut OutputDir) -> Result<RunReport> {
    let sys = cfg.system.to_state_space()?;
    match cfg.mode {
        Mode::Synthesize => synthesize(cfg, sys, out),
        Mode::Reconstruct => reconstruct(cfg, sys, opts, out),
        Mode::Track => track_mode(cfg, sys, opts, out),
        Mode::TrackUc => track_uc(cfg, sys, opts, out),
        Mode::BoundCurve => bound_curve(cfg, sys, out),
    }
}

fn synthesize(cfg: &ExperimentConfig, sys: StateSpace, out: &mut OutputDir) -> Result<RunReport> {
    let d = Design::new(sys, design_options(cfg))?;
    let res = verify_uio_conditions(&d.gains, &d.sys);
    let scale = residual_scale(&d.gains, &d.sys);
    let zr = verify_zero_dynamics(&d.zero_dynamics, &d.zeros);
    let mut checks = vec![
        Check::limit(
            "observer_spectral_radius",
            res.spectral_radius,
            1.0 - f64::EPSILON,
        ),
        Check::limit(
            "sylvester_residual",
            res.sylvester,
            cfg.tolerances.eps * scale,
        ),
        Check::limit(
            "decoupling_residual",
            res.decoupling,
            cfg.tolerances.eps * scale,
        ),
        Check::limit(
            "zero_dynamics_spectrum",
            zr.spectrum_distance,
            1e-6 * (1.0 + linalg::sigma_max(&d.zero_dynamics.az)),
        ),
    ];
    if let Some(c) = zr.cz2_norm {
        checks.push(Check::limit("cz2_norm", c, 1e-8));
    }
    out.matrix("M.csv", &d.gains.m)?;
    out.matrix("A_hat.csv", &d.gains.a_hat)?;
    out.matrix("F.csv", &d.gains.f)?;
    out.matrix("T1.csv", &d.partition.t1)?;
    out.matrix("L.csv", &d.partition.l)?;
    out.matrix("Az.csv", &d.zero_dynamics.az)?;
    out.matrix("Bz.csv", &d.zero_dynamics.bz)?;
    Ok(report(cfg, Some(&d), checks))
}

fn reconstruct(
    cfg: &ExperimentConfig,
    sys: StateSpace,
    opts: RunOptions,
    out: &mut OutputDir,
) -> Result<RunReport> {
    let d = Design::new(sys, design_options(cfg))?;
    let x0 = x0_for(cfg, d.n())?;
    let u = generate_input(cfg.input, d.sys.m(), cfg.steps, cfg.seed)?;
    let (x, y) = simulate(&d.sys, &x0, &u)?;
    let fir = FirConfig::new(cfg.n_d, cfg.init_policy)?;
    let rec = estimator::reconstruct(&d, &y, &Vector::zeros(d.q()), fir)?;
    let (x1, x2) = split_states(&d, &x)?;
    let from = burn_in(&d.gains, d.n()) as i64;
    let e_x1 = rec.x1_hat.sub_aligned(&x1)?;
    let e_x2 = rec.x2_hat.sub_aligned(&x2)?;
    let e_u = rec.u_hat.sub_aligned(&u)?;
    let steady = |t: &SignalTrace| -> Result<f64> {
        if t.end() <= from {
            return Err(Error::InsufficientData {
                needed: from as usize + 1,
                available: t.end().max(0) as usize,
            });
        }
        Ok(t.max_norm_from(from))
    };
    let mp_err = steady(&e_x1)?;
    let mut checks = vec![Check::limit(
        "mp_state_error",
        mp_err,
        1e-6 * (1.0 + x1.max_norm()),
    )];
    if d.nmp_dim() > 0 {
        let x2_err = steady(&e_x2)?;
        let u_err = steady(&e_u)?;
        // The bounds assume the plant starts at rest and the zero far-end guess.
        if cfg.init_policy == InitPolicy::Zero && x0.norm() == 0.0 {
            let energy = l2_norm(&u);
            let bound = estimator::nmp_error_bound(
                &d.zero_dynamics,
                &d.partition,
                cfg.n_d,
                cfg.grid_points,
                cfg.tolerances.uc_tol,
            )? * energy;
            let gain =
                linalg::sigma_max(&estimator::input_error_gain(&d.partition, &d.zero_dynamics));
            checks.push(Check::limit("nmp_state_error", x2_err, bound));
            checks.push(Check::limit("input_error", u_err, gain * bound));
        } else {
            checks.push(Check::info("nmp_state_error", x2_err));
            checks.push(Check::info("input_error", u_err));
        }
        checks.push(Check::info(
            "nmp_state_relative_error",
            x2_err / x2.max_norm_from(from).max(f64::MIN_POSITIVE),
        ));
    } else {
        checks.push(Check::info("input_error", steady(&e_u)?));
    }
    out.trace("u.csv", &u)?;
    out.trace("y.csv", &y)?;
    out.trace("x1.csv", &x1)?;
    out.trace("x2.csv", &x2)?;
    out.trace("x1_hat.csv", &rec.x1_hat)?;
    out.trace("x2_hat.csv", &rec.x2_hat)?;
    out.trace("u_hat.csv", &rec.u_hat)?;
    out.trace("e_x2.csv", &e_x2)?;
    out.trace("e_u.csv", &e_u)?;
    if opts.plot {
        out.text(
            "reconstruct.svg",
            &svg_plot("input and estimate", &[("u", &u), ("u_hat", &rec.u_hat)]),
        )?;
    }
    Ok(report(cfg, Some(&d), checks))
}

fn split_states(d: &Design, x: &SignalTrace) -> Result<(SignalTrace, SignalTrace)> {
    estimator::split_states(&d.partition, x)
}

fn track_mode(
    cfg: &ExperimentConfig,
    sys: StateSpace,
    opts: RunOptions,
    out: &mut OutputDir,
) -> Result<RunReport> {
    let d = Design::new(sys, design_options(cfg))?;
    let x0 = x0_for(cfg, d.n())?;
    let (y_d, u_ref) = reference(cfg, &d.sys)?;
    let tc = TrackingConfig::new(cfg.n_d, cfg.init_policy, x0.clone())?;
    let r = track(&d, &y_d, &tc)?;
    let from = burn_in(&d.gains, d.n()) as i64;
    let err = r.e_y.max_norm_from(from.min(r.e_y.end() - 1));
    let mut checks = Vec::new();
    match u_ref {
        Some(u) if cfg.init_policy == InitPolicy::Zero && x0.norm() == 0.0 => {
            let bound = tracking_error_bound(&d, cfg.n_d)? * l2_norm(&u);
            checks.push(Check::limit("tracking_error", r.e_y.max_norm(), bound));
        }
        _ => checks.push(Check::info("tracking_error", err)),
    }
    checks.push(Check::info(
        "tracking_relative_error",
        err / y_d.max_norm().max(f64::MIN_POSITIVE),
    ));
    out.trace("y_d.csv", &y_d)?;
    out.trace("u_hat.csv", &r.u_hat)?;
    out.trace("y_actual.csv", &r.y_actual)?;
    out.trace("e_y.csv", &r.e_y)?;
    if opts.plot {
        out.text(
            "track.svg",
            &svg_plot("tracking", &[("y_d", &y_d), ("y", &r.y_actual)]),
        )?;
    }
    Ok(report(cfg, Some(&d), checks))
}

fn track_uc(
    cfg: &ExperimentConfig,
    sys: StateSpace,
    opts: RunOptions,
    out: &mut OutputDir,
) -> Result<RunReport> {
    let fact = factor_unit_circle_zeros(&sys, cfg.tolerances.uc_tol)?;
    let ctl = match &cfg.controller {
        Some((num, den)) => Controller::new(num.clone(), den.clone())?,
        None => Controller::half_sum(),
    };
    let (y_d, _) = reference(cfg, &fact.original)?;
    let tc = TrackingConfig::new(cfg.n_d, cfg.init_policy, Vector::zeros(fact.original.n()))?;
    let r = track_with_unit_circle(&fact, &ctl, &y_d, &tc, design_options(cfg))?;
    let norms = chain_norms(&r.design, &ctl, cfg.n_d, cfg.init_policy, cfg.grid_points);
    let radius = chain_poles(&r.design, &ctl, cfg.n_d, cfg.init_policy)
        .iter()
        .map(|p| p.norm())
        .fold(0.0, f64::max);
    let checks = vec![
        Check::limit("chain_pole_radius", radius, 1.0 - cfg.tolerances.uc_tol),
        Check::limit(
            "controller_error",
            r.e_c.max_norm(),
            norms.chain * l2_norm(&y_d),
        ),
        Check::info("command_peak", r.u_tilde.max_norm()),
        Check::info("tracking_error", r.e_y.max_norm()),
        Check::info("chain_norm", norms.chain),
        Check::info("plant_inverse_norm", norms.plant_inverse),
        Check::info("controller_mismatch_norm", norms.mismatch),
    ];
    out.trace("y_d.csv", &y_d)?;
    out.trace("u_tilde.csv", &r.u_tilde)?;
    out.trace("y_actual.csv", &r.y_actual)?;
    out.trace("y_hat.csv", &r.y_hat)?;
    out.trace("e_c.csv", &r.e_c)?;
    out.trace("e_y.csv", &r.e_y)?;
    if opts.plot {
        out.text(
            "track_uc.svg",
            &svg_plot(
                "tracking with unit-circle zeros",
                &[("y_d", &y_d), ("y", &r.y_actual)],
            ),
        )?;
    }
    Ok(report(cfg, Some(&r.design), checks))
}

fn bound_curve(cfg: &ExperimentConfig, sys: StateSpace, out: &mut OutputDir) -> Result<RunReport> {
    let d = Design::new(sys, design_options(cfg))?;
    let mut rows = Vec::with_capacity(cfg.nd_max);
    for nd in 1..=cfg.nd_max.max(1) {
        let nmp = estimator::nmp_error_bound(
            &d.zero_dynamics,
            &d.partition,
            nd,
            cfg.grid_points,
            cfg.tolerances.uc_tol,
        )?;
        rows.push((nd, vec![nmp, tracking_error_bound(&d, nd)?]));
    }
    let increase = rows
        .windows(2)
        .map(|w| w[1].1[0] - w[0].1[0])
        .fold(0.0, f64::max);
    let checks = vec![
        Check::limit("bound_increase", increase, 1e-12 * rows[0].1[0].max(1.0)),
        Check::info(
            "bound_at_nd_max",
            rows.last().map(|r| r.1[0]).unwrap_or(0.0),
        ),
    ];
    out.text(
        "bound_curve.csv",
        &crate::output::bound_curve_csv(&["nmp_bound", "tracking_bound"], &rows),
    )?;
    Ok(report(cfg, Some(&d), checks))
}

/// Built-in demonstration configs, output directory left at its default.
pub fn demo_config(name: &str) -> Result<ExperimentConfig> {
    let text = match name {
        "case1" => include_str!("../configs/case1.cfg"),
        "case2" => include_str!("../configs/case2.cfg"),
        "case3" => include_str!("../configs/case3.cfg"),
        "case4" => include_str!("../configs/case4.cfg"),
        other => {
            return Err(Error::Config {
                line: 0,
                msg: format!("unknown demo `{other}`, expected case1..case4"),
            })
        }
    };
    ExperimentConfig::parse(text)
}

pub fn run_demo(name: &str, out: &Path, opts: RunOptions) -> Result<RunReport> {
    let mut cfg = demo_config(name)?;
    cfg.output_dir = out.to_path_buf();
    run_experiment_with(&cfg, opts)
}
