//! Preview-based output tracking: the desired trajectory is pushed through
//! the observer, FIR and input-reconstruction stages as if it were a
//! measured output, and the resulting input drives the plant.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::design::Design;
use crate::error::{Error, Result};
use crate::estimator::{theta_at, FirConfig, InitPolicy, NmpFir, UioFilter};
use num_complex::Complex64;

use crate::linalg::{self, CMat, Vector};
use crate::partition::ReconstructionPath;
use crate::system::{hinf_norm_grid, simulate, SignalTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingConfig {
    pub n_d: usize,
    pub init_policy: InitPolicy,
    pub x0_plant: Vector,
}

impl TrackingConfig {
    pub fn new(n_d: usize, init_policy: InitPolicy, x0_plant: Vector) -> Result<Self> {
        FirConfig::new(n_d, init_policy)?;
        Ok(Self {
            n_d,
            init_policy,
            x0_plant,
        })
    }

    /// Samples of `y_d` beyond the current step needed to emit `u(k)`.
    pub fn preview(&self, n: usize) -> usize {
        n + self.n_d
    }

    fn fir(&self) -> FirConfig {
        FirConfig {
            n_d: self.n_d,
            init_policy: self.init_policy,
        }
    }
}

/// Online tracking loop. Push one desired-output sample per step; the
/// command for step `k` is released once `y_d(k + n + n_d)` has been seen.
#[derive(Debug, Clone)]
pub struct TrackingSession<'a> {
    design: &'a Design,
    uio: UioFilter,
    fir: NmpFir,
    x1: SignalTrace,
    x2: SignalTrace,
    yd: SignalTrace,
    next_theta: i64,
    next_u: i64,
    preview: usize,
    ready: VecDeque<(i64, Vector)>,
}

impl<'a> TrackingSession<'a> {
    pub fn new(design: &'a Design, cfg: &TrackingConfig, start: i64) -> Result<Self> {
        if cfg.x0_plant.len() != design.n() {
            return Err(Error::dim(format!(
                "x0_plant has dimension {}, expected {}",
                cfg.x0_plant.len(),
                design.n()
            )));
        }
        let eta0 = &design.gains.m * &cfg.x0_plant;
        let uio = UioFilter::new(&design.gains, &design.partition, eta0, start)?;
        let mut x1 = SignalTrace::empty(start, design.q());
        x1.push(uio.current().1)?;
        Ok(Self {
            design,
            fir: NmpFir::new(&design.zero_dynamics, cfg.fir()),
            uio,
            x1,
            x2: SignalTrace::empty(start, design.nmp_dim()),
            yd: SignalTrace::empty(start, design.sys.l()),
            next_theta: start,
            next_u: start,
            preview: cfg.preview(design.n()),
            ready: VecDeque::new(),
        })
    }

    /// Feed the next desired-output sample. Returns the command whose preview
    /// window this sample completes, if any.
    pub fn push(&mut self, yd: Vector) -> Result<Option<(i64, Vector)>> {
        self.yd.push(yd.clone())?;
        if let Some((_, x1)) = self.uio.push(&yd)? {
            self.x1.push(x1)?;
        }
        while let Some(theta) = theta_at(
            &self.design.zero_dynamics,
            &self.x1,
            &self.yd,
            self.next_theta,
        ) {
            if let Some((_, x2)) = self.fir.push(self.next_theta, theta)? {
                self.x2.push(x2)?;
            }
            self.next_theta += 1;
        }
        while let Some(u) = self.command(self.next_u) {
            self.ready.push_back((self.next_u, u));
            self.next_u += 1;
        }
        let newest = self.yd.end() - 1;
        match self.ready.front() {
            Some((k, _)) if *k + self.preview as i64 <= newest => Ok(self.ready.pop_front()),
            _ => Ok(None),
        }
    }

    fn command(&self, k: i64) -> Option<Vector> {
        let pr = &self.design.partition;
        let zd = &self.design.zero_dynamics;
        let x1 = self.x1.get(k)?;
        let x2 = self.x2.get(k)?;
        Some(match zd.path {
            ReconstructionPath::B1 => {
                &zd.elim_pinv * (self.x1.get(k + 1)? - &pr.a11 * x1 - &pr.a12 * x2)
            }
            ReconstructionPath::D => &zd.elim_pinv * (self.yd.get(k)? - &pr.c1 * x1 - &pr.c2 * x2),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingResult {
    pub u_hat: SignalTrace,
    pub y_actual: SignalTrace,
    pub x_actual: SignalTrace,
    pub e_y: SignalTrace,
}

/// Batch tracking over a whole desired trajectory. Commands are emitted for
/// every `k` with a full preview window, i.e. up to `end - 1 - n - n_d`.
pub fn track(design: &Design, y_d: &SignalTrace, cfg: &TrackingConfig) -> Result<TrackingResult> {
    let preview = cfg.preview(design.n());
    if y_d.len() < preview + 1 {
        return Err(Error::PreviewExhausted {
            needed: preview + 1,
            available: y_d.len(),
        });
    }
    let mut session = TrackingSession::new(design, cfg, y_d.start())?;
    let mut u_hat = SignalTrace::empty(y_d.start(), design.sys.m());
    for (_, v) in y_d.iter() {
        if let Some((_, u)) = session.push(v.clone())? {
            u_hat.push(u)?;
        }
    }
    let (x_actual, y_actual) = simulate(&design.sys, &cfg.x0_plant, &u_hat)?;
    let e_y = y_actual.sub_aligned(y_d)?;
    Ok(TrackingResult {
        u_hat,
        y_actual,
        x_actual,
        e_y,
    })
}

/// `sigma_max(Az~^nd) ||G||_inf ||gain||_2 ||(zI - A1)^{-1} B1||_inf`, the
/// worst-case tracking error for a unit-energy reference input.
pub fn tracking_error_bound(design: &Design, n_d: usize) -> Result<f64> {
    let zd = &design.zero_dynamics;
    if zd.dim() == 0 {
        return Ok(0.0);
    }
    let opts = &design.options;
    let x2_bound = crate::estimator::nmp_error_bound(
        zd,
        &design.partition,
        n_d,
        opts.grid_points,
        opts.uc_tol,
    )?;
    let g_norm = hinf_norm_grid(&design.sys, opts.grid_points, opts.uc_tol)?;
    let gain = crate::estimator::input_error_gain(&design.partition, zd);
    Ok(x2_bound * g_norm * linalg::sigma_max(&gain))
}

/// Frequency response from the reference to the issued command, `u = Inv(z) y_d`,
/// for a pipeline started from rest.
pub fn inversion_response(design: &Design, n_d: usize, policy: InitPolicy, z: Complex64) -> CMat {
    let n = design.n();
    let l = design.sys.l();
    let pr = &design.partition;
    let zd = &design.zero_dynamics;
    let g = &design.gains;
    let c = |m: &crate::linalg::Mat| linalg::to_complex(m);
    // eta = (zI - A_hat)^{-1} F sum_i E_i z^i y_d
    let mut window = CMat::zeros(g.f.nrows(), l);
    let mut zi = Complex64::new(1.0, 0.0);
    for i in 0..n {
        window += c(&g.f.columns(i * l, l).into_owned()) * zi;
        zi *= z;
    }
    let mut shifted = c(&g.a_hat).map(|v| -v);
    for i in 0..g.q {
        shifted[(i, i)] += z;
    }
    let eta = shifted
        .lu()
        .solve(&window)
        .expect("observer pole on the unit circle");
    let x1 = c(&pr.mq_inv) * eta;
    let theta = match zd.path {
        ReconstructionPath::B1 => linalg::vstack_c(&[&(&x1 * z), &x1]),
        ReconstructionPath::D => linalg::vstack_c(&[&x1, &CMat::identity(l, l)]),
    };
    let r = zd.dim();
    let mut sum = CMat::zeros(r, l);
    let mut w = c(&zd.bz_tilde);
    let mut zi = Complex64::new(1.0, 0.0);
    for _ in 0..n_d {
        sum += &w * &theta * zi;
        w = c(&zd.az_inv) * w;
        zi *= z;
    }
    let x2 = match policy {
        InitPolicy::Zero => -sum,
        InitPolicy::WarmStart => {
            let mut m = -c(&linalg::mat_pow(&zd.az_inv, n_d)) / z;
            for i in 0..r {
                m[(i, i)] += Complex64::new(1.0, 0.0);
            }
            -m.lu()
                .solve(&sum)
                .expect("warm-start recursion pole on the unit circle")
        }
    };
    let p = c(&zd.elim_pinv);
    match zd.path {
        ReconstructionPath::B1 => {
            let mut za11 = c(&pr.a11).map(|v| -v);
            for i in 0..pr.q {
                za11[(i, i)] += z;
            }
            p * (za11 * x1 - c(&pr.a12) * x2)
        }
        ReconstructionPath::D => p * (CMat::identity(l, l) - c(&pr.c1) * x1 - c(&pr.c2) * x2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::DesignOptions;
    use crate::system::StateSpace;
    use nalgebra::dmatrix;

    fn case1() -> Design {
        let sys = StateSpace::new(
            dmatrix![0.0, 0.0; 1.0, 0.0],
            dmatrix![1.0; 0.0],
            dmatrix![-2.0, 0.75],
            dmatrix![1.0],
        )
        .unwrap();
        Design::new(sys, DesignOptions::default()).unwrap()
    }

    #[test]
    fn zero_reference_gives_zero_command() {
        let d = case1();
        let cfg = TrackingConfig::new(3, InitPolicy::Zero, Vector::zeros(2)).unwrap();
        let r = track(&d, &SignalTrace::zeros(0, 1, 20), &cfg).unwrap();
        assert_eq!(r.u_hat.len(), 20 - 2 - 3);
        assert_eq!(r.u_hat.max_norm(), 0.0);
        assert_eq!(r.e_y.max_norm(), 0.0);
    }

    #[test]
    fn preview_shortage_is_reported() {
        let d = case1();
        let cfg = TrackingConfig::new(3, InitPolicy::Zero, Vector::zeros(2)).unwrap();
        assert!(matches!(
            track(&d, &SignalTrace::zeros(0, 1, 5), &cfg),
            Err(Error::PreviewExhausted {
                needed: 6,
                available: 5
            })
        ));
    }

    #[test]
    fn future_beyond_preview_is_ignored() {
        let d = case1();
        let cfg = TrackingConfig::new(4, InitPolicy::Zero, Vector::zeros(2)).unwrap();
        let base: Vec<f64> = (0..40).map(|k| (0.2 * k as f64).cos()).collect();
        let r0 = track(&d, &SignalTrace::from_scalars(&base), &cfg).unwrap();
        let k = 10usize;
        let mut bumped = base.clone();
        for v in bumped.iter_mut().skip(k + 2 + 4 + 1) {
            *v += 5.0;
        }
        let r1 = track(&d, &SignalTrace::from_scalars(&bumped), &cfg).unwrap();
        for j in 0..=k as i64 {
            assert_eq!(r0.u_hat.get(j), r1.u_hat.get(j));
        }
    }

    #[test]
    fn bound_ratio_matches_zero() {
        let d = case1();
        let b5 = tracking_error_bound(&d, 5).unwrap();
        let b6 = tracking_error_bound(&d, 6).unwrap();
        assert!((b6 / b5 - 1.0 / 1.5).abs() < 1e-12);
    }
}
