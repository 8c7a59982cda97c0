//! Tracking for SISO plants with transmission zeros on the unit circle.
//!
//! The unit-circle factor is divided out of the numerator, the remaining plant
//! is inverted as usual, and a controller whose numerator contains the same
//! factor absorbs the pole the inverse would otherwise carry. The reference is
//! therefore filtered by `H'(z) = H(z) / uc(z)`, never by `1 / uc(z)` alone.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::design::{Design, DesignOptions};
use crate::error::{Error, Result};
use crate::estimator::InitPolicy;
use crate::linalg::{self, Vector};
use crate::poly::{filter_rational, siso_tf, tf_to_ss, Poly};
use crate::system::{grid_max, simulate, SignalTrace, StateSpace};
use crate::tracker::{inversion_response, track, TrackingConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SisoFactorization {
    pub original: StateSpace,
    /// Plant with the unit-circle factors removed, same order as `original`.
    pub reduced: StateSpace,
    /// Real factors `z - r` or `z^2 - 2 Re(r) z + |r|^2`.
    pub uc_factors: Vec<Poly>,
    pub gain: f64,
    pub numerator: Poly,
    pub denominator: Poly,
    pub reduced_numerator: Poly,
}

impl SisoFactorization {
    /// Product of all unit-circle factors.
    pub fn uc_product(&self) -> Poly {
        self.uc_factors
            .iter()
            .fold(Poly::constant(1.0), |acc, f| acc.mul(f))
    }
}

pub fn factor_unit_circle_zeros(sys: &StateSpace, uc_tol: f64) -> Result<SisoFactorization> {
    let (num, den) = siso_tf(sys)?;
    if num.is_zero() {
        return Err(Error::Unsupported(
            "transfer function is identically zero".into(),
        ));
    }
    let mut factors = Vec::new();
    let mut roots = num.roots();
    roots.retain(|r| (r.norm() - 1.0).abs() <= uc_tol);
    let mut used = vec![false; roots.len()];
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let r = roots[i];
        if r.im.abs() <= uc_tol {
            factors.push(Poly::linear(r.re));
            continue;
        }
        let partner = (0..roots.len()).find(|&j| !used[j] && (roots[j] - r.conj()).norm() <= 1e-6);
        if let Some(j) = partner {
            used[j] = true;
        }
        factors.push(Poly::new(vec![1.0, -2.0 * r.re, r.norm_sqr()]));
    }
    let mut reduced_num = num.clone();
    for f in &factors {
        let (q, rem) = reduced_num.div_rem(f);
        let scale = reduced_num
            .coeffs()
            .iter()
            .fold(0.0_f64, |m, c| m.max(c.abs()));
        if rem.coeffs().iter().any(|c| c.abs() > 1e-6 * scale.max(1.0)) {
            return Err(Error::RankLoss(format!(
                "unit-circle factor {:?} does not divide the numerator",
                f.coeffs()
            )));
        }
        reduced_num = q;
    }
    let reduced = tf_to_ss(&reduced_num, &den)?;
    Ok(SisoFactorization {
        original: sys.clone(),
        reduced,
        uc_factors: factors,
        gain: num.leading() / den.leading(),
        numerator: num,
        denominator: den,
        reduced_numerator: reduced_num,
    })
}

/// Scalar controller `H(z) = numerator / denominator`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Controller {
    pub numerator: Poly,
    pub denominator: Poly,
}

impl Controller {
    pub fn new(numerator: Poly, denominator: Poly) -> Result<Self> {
        if denominator.is_zero() {
            return Err(Error::InvalidController("zero denominator".into()));
        }
        if numerator.degree() > denominator.degree() {
            return Err(Error::Improper(format!(
                "controller numerator degree {} exceeds denominator degree {}",
                numerator.degree(),
                denominator.degree()
            )));
        }
        Ok(Self {
            numerator,
            denominator,
        })
    }

    /// `(z + 1) / (2 z)`: unit DC gain, cancels a zero at `z = -1`.
    pub fn half_sum() -> Self {
        Self {
            numerator: Poly::new(vec![1.0, 1.0]),
            denominator: Poly::new(vec![2.0, 0.0]),
        }
    }

    pub fn identity() -> Self {
        Self {
            numerator: Poly::constant(1.0),
            denominator: Poly::constant(1.0),
        }
    }

    pub fn pure_delay(n_c: usize) -> Self {
        let mut den = vec![0.0; n_c + 1];
        den[0] = 1.0;
        Self {
            numerator: Poly::constant(1.0),
            denominator: Poly::new(den),
        }
    }

    /// Extra delay the controller introduces.
    pub fn n_c(&self) -> usize {
        self.denominator.degree()
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.numerator.eval(z) / self.denominator.eval(z)
    }

    /// `H / uc`, the filter actually applied to the reference.
    pub fn cancelled(&self, uc: &Poly, uc_tol: f64) -> Result<(Poly, Poly)> {
        for r in self.denominator.roots() {
            if r.norm() >= 1.0 - uc_tol {
                return Err(Error::InvalidController(format!(
                    "controller pole {r} is not strictly stable"
                )));
            }
        }
        let (q, rem) = self.numerator.div_rem(uc);
        let scale = self
            .numerator
            .coeffs()
            .iter()
            .fold(0.0_f64, |m, c| m.max(c.abs()));
        if rem.coeffs().iter().any(|c| c.abs() > 1e-9 * scale.max(1.0)) {
            return Err(Error::InvalidController(format!(
                "numerator {:?} does not contain the unit-circle factor {:?}",
                self.numerator.coeffs(),
                uc.coeffs()
            )));
        }
        if q.degree() > self.denominator.degree() {
            return Err(Error::Improper(
                "reference prefilter H'(z) is improper".into(),
            ));
        }
        Ok((q, self.denominator.clone()))
    }
}

/// Reference filtered by `H'(z) = H(z) / uc(z)`.
pub fn prefilter_desired(
    y_d: &SignalTrace,
    ctl: &Controller,
    uc: &Poly,
    uc_tol: f64,
) -> Result<SignalTrace> {
    let (num, den) = ctl.cancelled(uc, uc_tol)?;
    let out = filter_rational(&num, &den, &y_d.reindexed(0))?;
    Ok(out.reindexed(y_d.start()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct UcTrackingResult {
    /// Command applied to the original plant.
    pub u_tilde: SignalTrace,
    pub y_actual: SignalTrace,
    /// Reduced-plant output under the unfiltered inverse.
    pub y_hat: SignalTrace,
    /// `y_hat - y_actual`, the error attributable to the controller.
    pub e_c: SignalTrace,
    /// `y_actual - y_d`.
    pub e_y: SignalTrace,
    pub design: Design,
}

pub fn track_with_unit_circle(
    fact: &SisoFactorization,
    ctl: &Controller,
    y_d: &SignalTrace,
    cfg: &TrackingConfig,
    opts: DesignOptions,
) -> Result<UcTrackingResult> {
    let design = Design::new(fact.reduced.clone(), opts)?;
    let uc = fact.uc_product();
    let filtered = prefilter_desired(y_d, ctl, &uc, opts.uc_tol)?;
    let inner = TrackingConfig {
        x0_plant: Vector::zeros(design.n()),
        ..cfg.clone()
    };
    let u_tilde = track(&design, &filtered, &inner)?.u_hat;
    let (_, y_actual) = simulate(&fact.original, &cfg.x0_plant, &u_tilde)?;
    let u_ideal = track(&design, y_d, &inner)?.u_hat;
    let (_, y_hat_full) = simulate(&fact.reduced, &Vector::zeros(design.n()), &u_ideal)?;
    let y_hat = y_hat_full.window(u_tilde.start(), u_tilde.end());
    let e_c = y_hat.sub_aligned(&y_actual)?;
    let e_y = y_actual.sub_aligned(y_d)?;
    Ok(UcTrackingResult {
        u_tilde,
        y_actual,
        y_hat,
        e_c,
        e_y,
        design,
    })
}

/// Grid maximum of `|1 - H(e^{i theta})|`.
pub fn controller_mismatch_norm(ctl: &Controller, grid_points: usize) -> f64 {
    grid_max(grid_points, |z| {
        (Complex64::new(1.0, 0.0) - ctl.eval(z)).norm()
    })
}

/// Grid norms of the controller error chain `G' Inv' (1 - H)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainNorms {
    /// `max |G'(z) Inv'(z)|`.
    pub plant_inverse: f64,
    /// `max |1 - H(z)|`.
    pub mismatch: f64,
    /// `max |G'(z) Inv'(z) (1 - H(z))|`, never larger than the product above.
    pub chain: f64,
}

pub fn chain_norms(
    design: &Design,
    ctl: &Controller,
    n_d: usize,
    policy: InitPolicy,
    grid_points: usize,
) -> ChainNorms {
    let gi = |z: Complex64| {
        (design.sys.freq_response(z) * inversion_response(design, n_d, policy, z))[(0, 0)]
    };
    let one = Complex64::new(1.0, 0.0);
    ChainNorms {
        plant_inverse: grid_max(grid_points, |z| gi(z).norm()),
        mismatch: controller_mismatch_norm(ctl, grid_points),
        chain: grid_max(grid_points, |z| (gi(z) * (one - ctl.eval(z))).norm()),
    }
}

/// Poles of the realized controller error chain: reduced plant, observer,
/// warm-start recursion and the controller denominator.
pub fn chain_poles(
    design: &Design,
    ctl: &Controller,
    n_d: usize,
    policy: InitPolicy,
) -> Vec<Complex64> {
    let mut p = linalg::eigenvalues(&design.sys.a);
    p.extend(linalg::eigenvalues(&design.gains.a_hat));
    p.extend(ctl.denominator.roots());
    if policy == InitPolicy::WarmStart {
        p.extend(linalg::eigenvalues(&linalg::mat_pow(
            &design.zero_dynamics.az_inv,
            n_d,
        )));
    }
    p
}

/// `y'(k+1) = p y'(k) + y_d(k)` from `y'(start) = y0`, i.e. `Y_d / (z - p)`.
pub fn repeated_mp_prefilter(y_d: &SignalTrace, p: f64, y0: f64) -> Result<SignalTrace> {
    if p.abs() >= 1.0 {
        return Err(Error::NotMinimumPhaseFactor(p));
    }
    if y_d.dim() != 1 {
        return Err(Error::dim("repeated-zero prefilter acts on scalar traces"));
    }
    let mut out = SignalTrace::empty(y_d.start(), 1);
    let mut state = y0;
    for (_, v) in y_d.iter() {
        out.push(Vector::from_element(1, state))?;
        state = p * state + v[0];
    }
    Ok(out)
}
