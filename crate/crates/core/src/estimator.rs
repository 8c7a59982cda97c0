//! Runtime filters: the observer for `x1`, the delayed FIR for `x2` and the
//! algebraic input reconstruction, plus the associated error bounds.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::design::Design;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::partition::{PartitionedRealization, ReconstructionPath, ZeroDynamics};
use crate::system::{state_path_norm, SignalTrace};
use crate::uio::ObserverGains;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum InitPolicy {
    /// Guess `x2 = 0` at the far end of every window.
    #[default]
    Zero,
    /// Reuse the previous estimate as the far-end guess.
    WarmStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FirConfig {
    pub n_d: usize,
    pub init_policy: InitPolicy,
}

impl FirConfig {
    pub fn new(n_d: usize, init_policy: InitPolicy) -> Result<Self> {
        if n_d == 0 {
            return Err(Error::dim("FIR delay n_d must be at least 1"));
        }
        Ok(Self { n_d, init_policy })
    }
}

/// Streaming observer. Each pushed output sample completes at most one
/// window `[y(j); ...; y(j+n-1)]` and advances the estimate to `j + 1`.
#[derive(Debug, Clone)]
pub struct UioFilter {
    a_hat: Mat,
    f: Mat,
    mq_inv: Mat,
    horizon: usize,
    l: usize,
    eta: Vector,
    index: i64,
    window: VecDeque<Vector>,
}

impl UioFilter {
    pub fn new(
        gains: &ObserverGains,
        pr: &PartitionedRealization,
        eta0: Vector,
        start: i64,
    ) -> Result<Self> {
        if eta0.len() != gains.q {
            return Err(Error::dim(format!(
                "eta0 has dimension {}, expected {}",
                eta0.len(),
                gains.q
            )));
        }
        let horizon = pr.n();
        let l = pr.d.nrows();
        Ok(Self {
            a_hat: gains.a_hat.clone(),
            f: gains.f.clone(),
            mq_inv: pr.mq_inv.clone(),
            horizon,
            l,
            eta: eta0,
            index: start,
            window: VecDeque::with_capacity(horizon),
        })
    }

    /// Index and value of the current `x1` estimate.
    pub fn current(&self) -> (i64, Vector) {
        (self.index, &self.mq_inv * &self.eta)
    }

    pub fn eta(&self) -> &Vector {
        &self.eta
    }

    pub fn push(&mut self, y: &Vector) -> Result<Option<(i64, Vector)>> {
        if y.len() != self.l {
            return Err(Error::dim(format!(
                "output sample has dimension {}, expected {}",
                y.len(),
                self.l
            )));
        }
        self.window.push_back(y.clone());
        if self.window.len() < self.horizon {
            return Ok(None);
        }
        let mut stacked = Vector::zeros(self.horizon * self.l);
        for (i, s) in self.window.iter().enumerate() {
            stacked.rows_mut(i * self.l, self.l).copy_from(s);
        }
        self.eta = &self.a_hat * &self.eta + &self.f * stacked;
        self.index += 1;
        self.window.pop_front();
        Ok(Some(self.current()))
    }
}

/// Run the observer over a whole output trace. Estimates cover
/// `[y.start, y.end - n]`, the last one needing the final output sample.
pub fn run_uio(
    gains: &ObserverGains,
    pr: &PartitionedRealization,
    y: &SignalTrace,
    eta0: &Vector,
) -> Result<SignalTrace> {
    let n = pr.n();
    if y.len() < n + 1 {
        return Err(Error::InsufficientData {
            needed: n + 1,
            available: y.len(),
        });
    }
    let mut filt = UioFilter::new(gains, pr, eta0.clone(), y.start())?;
    let mut out = SignalTrace::empty(y.start(), gains.q);
    out.push(filt.current().1)?;
    for (_, yk) in y.iter() {
        if let Some((_, x1)) = filt.push(yk)? {
            out.push(x1)?;
        }
    }
    Ok(out)
}

/// Telescoped backward recursion for `x2`:
/// `x2(j) = Az~^nd xbar - sum_{i<nd} Az~^i Bz~ theta(j+i)`.
#[derive(Debug, Clone)]
pub struct NmpFir {
    terminal: Mat,
    weights: Vec<Mat>,
    policy: InitPolicy,
    thetas: VecDeque<Vector>,
    next_index: Option<i64>,
    previous: Option<Vector>,
    dim: usize,
    theta_dim: usize,
}

impl NmpFir {
    pub fn new(zd: &ZeroDynamics, cfg: FirConfig) -> Self {
        let mut weights = Vec::with_capacity(cfg.n_d);
        let mut w = zd.bz_tilde.clone();
        for _ in 0..cfg.n_d {
            weights.push(w.clone());
            w = &zd.az_inv * w;
        }
        Self {
            terminal: linalg::mat_pow(&zd.az_inv, cfg.n_d),
            weights,
            policy: cfg.init_policy,
            thetas: VecDeque::with_capacity(cfg.n_d),
            next_index: None,
            previous: None,
            dim: zd.dim(),
            theta_dim: zd.theta_dim(),
        }
    }

    pub fn delay(&self) -> usize {
        self.weights.len()
    }

    /// Feed `theta(k)`; consecutive calls must use consecutive `k`. Returns
    /// `x2(k - n_d + 1)` once the window is full.
    pub fn push(&mut self, k: i64, theta: Vector) -> Result<Option<(i64, Vector)>> {
        if theta.len() != self.theta_dim {
            return Err(Error::dim(format!(
                "theta has dimension {}, expected {}",
                theta.len(),
                self.theta_dim
            )));
        }
        let first = *self.next_index.get_or_insert(k);
        let expected = first + self.thetas.len() as i64;
        if k != expected {
            return Err(Error::Alignment(format!(
                "theta index {k} pushed, expected {expected}"
            )));
        }
        self.thetas.push_back(theta);
        if self.thetas.len() < self.weights.len() {
            return Ok(None);
        }
        let far_end = match (self.policy, &self.previous) {
            (InitPolicy::WarmStart, Some(prev)) => prev.clone(),
            _ => Vector::zeros(self.dim),
        };
        let mut x2 = &self.terminal * far_end;
        for (w, th) in self.weights.iter().zip(&self.thetas) {
            x2 -= w * th;
        }
        let j = first;
        self.thetas.pop_front();
        self.next_index = Some(first + 1);
        self.previous = Some(x2.clone());
        Ok(Some((j, x2)))
    }
}

/// Driving vector of the zero dynamics at index `j`.
pub fn theta_at(zd: &ZeroDynamics, x1: &SignalTrace, y: &SignalTrace, j: i64) -> Option<Vector> {
    match zd.path {
        ReconstructionPath::B1 => Some(linalg::vstack_vec(&[x1.get(j + 1)?, x1.get(j)?])),
        ReconstructionPath::D => Some(linalg::vstack_vec(&[x1.get(j)?, y.get(j)?])),
    }
}

/// Delayed estimate of `x2`, covering every index whose window of
/// `theta` samples is available.
pub fn run_fir_nmp(
    zd: &ZeroDynamics,
    x1_hat: &SignalTrace,
    y: &SignalTrace,
    cfg: FirConfig,
) -> Result<SignalTrace> {
    let mut fir = NmpFir::new(zd, cfg);
    let start = x1_hat.start();
    let mut out = SignalTrace::empty(start, zd.dim());
    let mut available = 0;
    let mut k = start;
    while let Some(theta) = theta_at(zd, x1_hat, y, k) {
        available += 1;
        if let Some((_, x2)) = fir.push(k, theta)? {
            out.push(x2)?;
        }
        k += 1;
    }
    if out.is_empty() {
        return Err(Error::InsufficientData {
            needed: cfg.n_d,
            available,
        });
    }
    Ok(out)
}

/// Input estimate over the common index range of the supplied traces.
pub fn reconstruct_input(
    pr: &PartitionedRealization,
    zd: &ZeroDynamics,
    x1_hat: &SignalTrace,
    x2_hat: &SignalTrace,
    y: &SignalTrace,
) -> Result<SignalTrace> {
    let m = zd.elim_pinv.nrows();
    let lo = x1_hat.start().max(x2_hat.start());
    let mut out = SignalTrace::empty(lo, m);
    let mut k = lo;
    while let (Some(x1), Some(x2)) = (x1_hat.get(k), x2_hat.get(k)) {
        let u = match zd.path {
            ReconstructionPath::B1 => {
                let Some(x1n) = x1_hat.get(k + 1) else { break };
                &zd.elim_pinv * (x1n - &pr.a11 * x1 - &pr.a12 * x2)
            }
            ReconstructionPath::D => {
                let Some(yk) = y.get(k) else { break };
                &zd.elim_pinv * (yk - &pr.c1 * x1 - &pr.c2 * x2)
            }
        };
        out.push(u)?;
        k += 1;
    }
    if out.is_empty() {
        return Err(Error::Alignment(
            "state and output traces share no index range for input reconstruction".into(),
        ));
    }
    Ok(out)
}

/// Worst-case `x2` error for unit-energy inputs and the zero far-end guess:
/// `sigma_max(Az~^nd) * ||(zI - A1)^{-1} B1||_inf`.
pub fn nmp_error_bound(
    zd: &ZeroDynamics,
    pr: &PartitionedRealization,
    n_d: usize,
    grid_points: usize,
    uc_tol: f64,
) -> Result<f64> {
    if zd.dim() == 0 {
        return Ok(0.0);
    }
    let t = pr.transformed();
    let path = state_path_norm(&t.a, &t.b, grid_points, uc_tol)?;
    Ok(linalg::sigma_max(&linalg::mat_pow(&zd.az_inv, n_d)) * path)
}

/// Map from the `x2` error to the input error.
pub fn input_error_gain(pr: &PartitionedRealization, zd: &ZeroDynamics) -> Mat {
    match zd.path {
        ReconstructionPath::B1 => -(&zd.elim_pinv * &pr.a12),
        ReconstructionPath::D => -(&zd.elim_pinv * &pr.c2),
    }
}

/// Steps to discard before steady-state metrics: `5 n / (1 - rho(A_hat))`.
pub fn burn_in(gains: &ObserverGains, n: usize) -> usize {
    let rho = linalg::spectral_radius(&gains.a_hat).min(0.999);
    (5.0 * n as f64 / (1.0 - rho)).ceil() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub e_x2_bound: f64,
    pub e_u_gain: Mat,
    pub e_x2_trace: Option<SignalTrace>,
    pub e_u_trace: Option<SignalTrace>,
}

/// Estimates produced by the full reconstruction chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub x1_hat: SignalTrace,
    pub x2_hat: SignalTrace,
    pub u_hat: SignalTrace,
}

/// Observer, FIR and input reconstruction in sequence.
pub fn reconstruct(
    design: &Design,
    y: &SignalTrace,
    eta0: &Vector,
    cfg: FirConfig,
) -> Result<Reconstruction> {
    let x1_hat = run_uio(&design.gains, &design.partition, y, eta0)?;
    let x2_hat = run_fir_nmp(&design.zero_dynamics, &x1_hat, y, cfg)?;
    let u_hat = reconstruct_input(
        &design.partition,
        &design.zero_dynamics,
        &x1_hat,
        &x2_hat,
        y,
    )?;
    Ok(Reconstruction {
        x1_hat,
        x2_hat,
        u_hat,
    })
}

/// Split a state trace into partition coordinates `(x1, x2)`.
pub fn split_states(
    pr: &PartitionedRealization,
    x: &SignalTrace,
) -> Result<(SignalTrace, SignalTrace)> {
    let q = pr.q;
    let r = pr.nmp_dim();
    let x1 = x.map(q, |v| (&pr.t1 * v).rows(0, q).into_owned())?;
    let x2 = x.map(r, |v| (&pr.t1 * v).rows(q, r).into_owned())?;
    Ok((x1, x2))
}
