//! Unknown-input observer synthesis.
//!
//! The observer `eta(k+1) = A_hat eta(k) + F Y(k)` tracks `M x(k)` whenever
//!
//! * `A_hat` is Schur stable,
//! * `A_hat M - M A + F Cn = 0`,
//! * `F Dn - M B In = 0`.
//!
//! Rows of `M` are built one target eigenvalue at a time from a left null
//! space, so each row comes with its own `F` row and a known `A_hat` entry.

use nalgebra::RowDVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, Mat};
use crate::system::{stack_block_matrices, BlockMatrices, StateSpace};
use crate::zeros::ZeroClassification;

/// Observer gains with `q` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverGains {
    pub m: Mat,
    pub a_hat: Mat,
    pub f: Mat,
    pub q: usize,
    /// Target eigenvalue attached to each row, conjugate pairs adjacent.
    pub stable_eigs: Vec<Complex64>,
}

/// Residuals of the three observer conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UioResiduals {
    pub spectral_radius: f64,
    pub sylvester: f64,
    pub decoupling: f64,
}

impl UioResiduals {
    pub fn within(&self, eps: f64) -> bool {
        self.spectral_radius < 1.0 && self.sylvester <= eps && self.decoupling <= eps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOptions {
    pub rank_tol: f64,
    /// Acceptance threshold for the condition residuals.
    pub eps: f64,
    /// Relative singular-value floor for the per-eigenvalue null spaces.
    pub null_tol: f64,
    /// Rank test used by the greedy row selection.
    pub select_tol: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            rank_tol: linalg::DEFAULT_RANK_TOL,
            eps: 1e-8,
            null_tol: 1e-9,
            select_tol: 1e-8,
        }
    }
}

/// `A - B In Dn^+ Cn`. Its spectrum is the set of transmission zeros padded
/// with zeros at the origin.
pub fn gamma_matrix(sys: &StateSpace, rank_tol: f64) -> Result<Mat> {
    sys.require_square()?;
    let bm = stack_block_matrices(sys);
    let dn_pinv = linalg::pinv(&bm.dn, rank_tol);
    Ok(&sys.a - &sys.b * &bm.in_selector * dn_pinv * &bm.cn)
}

pub fn verify_uio_conditions(g: &ObserverGains, sys: &StateSpace) -> UioResiduals {
    let bm = stack_block_matrices(sys);
    residuals_with(g, sys, &bm)
}

fn residuals_with(g: &ObserverGains, sys: &StateSpace, bm: &BlockMatrices) -> UioResiduals {
    UioResiduals {
        spectral_radius: linalg::spectral_radius(&g.a_hat),
        sylvester: (&g.a_hat * &g.m - &g.m * &sys.a + &g.f * &bm.cn).norm(),
        decoupling: (&g.f * &bm.dn - &g.m * &sys.b * &bm.in_selector).norm(),
    }
}

/// Precomputed matrices shared by every target eigenvalue.
struct Workspace {
    n: usize,
    gamma: Mat,
    /// `I - P^+ P`, projector onto the null space of `P = Pi Cn`.
    p_null: Mat,
    p_pinv: Mat,
    /// `I - Dn Dn^+`.
    pi: Mat,
    /// `B In (I - Dn^+ Dn)`: directions `m` must annihilate for exact input decoupling.
    w: Mat,
    /// `B In Dn^+`.
    b_in_dpinv: Mat,
}

impl Workspace {
    fn new(sys: &StateSpace, bm: &BlockMatrices, rank_tol: f64) -> Self {
        let n = sys.n();
        let nl = bm.dn.nrows();
        let nm = bm.dn.ncols();
        let dn_pinv = linalg::pinv(&bm.dn, rank_tol);
        let b_in = &sys.b * &bm.in_selector;
        let b_in_dpinv = &b_in * &dn_pinv;
        let gamma = &sys.a - &b_in_dpinv * &bm.cn;
        let pi = Mat::identity(nl, nl) - &bm.dn * &dn_pinv;
        let p = &pi * &bm.cn;
        // P is exactly zero whenever Dn has full row rank; a relative cut-off
        // would promote round-off to a huge pseudo-inverse.
        let floor = rank_tol * linalg::sigma_max(&bm.cn).max(1.0);
        let p_pinv = linalg::pinv_abs(&p, floor);
        let p_null = Mat::identity(n, n) - &p_pinv * &p;
        let w = &b_in * (Mat::identity(nm, nm) - &dn_pinv * &bm.dn);
        Self {
            n,
            gamma,
            p_null,
            p_pinv,
            pi,
            w,
            b_in_dpinv,
        }
    }

    fn shifted(&self, lambda: Complex64) -> CMat {
        let mut g = linalg::to_complex(&self.gamma);
        for i in 0..self.n {
            g[(i, i)] -= lambda;
        }
        g
    }

    /// Candidate `M` rows for `lambda`, pure left eigenvectors first.
    fn candidates(&self, lambda: Complex64, null_tol: f64) -> Vec<RowDVector<Complex64>> {
        let shifted = self.shifted(lambda);
        let w = linalg::to_complex(&self.w);
        let pure = linalg::hstack_c(&[&shifted, &w]);
        let projected = linalg::hstack_c(&[&(&shifted * linalg::to_complex(&self.p_null)), &w]);
        let mut out = Vec::new();
        for k in [pure, projected] {
            let thr = null_tol * linalg::sigma_max_c(&k).max(1.0);
            out.extend(linalg::left_null_space(&k, thr));
        }
        out
    }

    /// `F` row paired with a (complex) `M` row.
    fn f_row(&self, m: &RowDVector<Complex64>, lambda: Complex64) -> RowDVector<Complex64> {
        let k = m * self.shifted(lambda) * linalg::to_complex(&self.p_pinv);
        m * linalg::to_complex(&self.b_in_dpinv) + k * linalg::to_complex(&self.pi)
    }
}

/// Unit 2-norm with the largest-magnitude entry positive. Returns the applied
/// divisor so paired quantities can be rescaled consistently.
fn normalize_row(row: &RowDVector<f64>) -> (RowDVector<f64>, f64) {
    let norm = row.norm();
    let pivot = row
        .iter()
        .copied()
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(0.0);
    let c = if pivot < 0.0 { -norm } else { norm };
    (row / c, c)
}

/// Rotate a complex row so its largest entry is real.
fn realign(m: &RowDVector<Complex64>) -> Complex64 {
    let pivot = m
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(Complex64::new(1.0, 0.0));
    if pivot.norm() == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        pivot.conj() / pivot.norm()
    }
}

struct Selection {
    rows: Vec<RowDVector<f64>>,
    f_rows: Vec<RowDVector<f64>>,
    /// Each entry is `(row index, value)` or a 2x2 block at a row index.
    blocks: Vec<AhatBlock>,
    eigs: Vec<Complex64>,
}

enum AhatBlock {
    Real(f64),
    Pair([[f64; 2]; 2]),
}

impl Selection {
    fn rank_with(&self, extra: &[&RowDVector<f64>], tol: f64) -> usize {
        let all: Vec<Mat> = self
            .rows
            .iter()
            .chain(extra.iter().copied())
            .map(|r| Mat::from_row_slice(1, r.len(), r.as_slice()))
            .collect();
        let refs: Vec<&Mat> = all.iter().collect();
        linalg::rank(&linalg::vstack(&refs), tol)
    }
}

/// Target eigenvalues with multiplicity: minimum-phase zeros first, then
/// zeros at the origin for the padding.
fn targets(zc: &ZeroClassification) -> Vec<Complex64> {
    let mut t = zc.mp_zeros.clone();
    t.extend(std::iter::repeat_n(
        Complex64::new(0.0, 0.0),
        zc.padding_count,
    ));
    t
}

pub fn synthesize_uio(
    sys: &StateSpace,
    zc: &ZeroClassification,
    opts: &SynthesisOptions,
) -> Result<ObserverGains> {
    sys.require_square()?;
    sys.check_minimal(opts.rank_tol)?;
    if zc.has_unit_circle_zeros() {
        return Err(Error::UnitCircleZeros(zc.unit_circle_zeros.clone()));
    }
    let n = sys.n();
    let required = n - zc.nmp_count().min(n);
    let targets = targets(zc);
    if targets.is_empty() || required == 0 {
        return Err(Error::AllNonMinimumPhase);
    }
    let bm = stack_block_matrices(sys);
    let ws = Workspace::new(sys, &bm, opts.rank_tol);

    let mut unique: Vec<Complex64> = Vec::new();
    for &t in &targets {
        if t.im < -1e-12 {
            continue;
        }
        if !unique.iter().any(|u| (u - t).norm() < 1e-8) {
            unique.push(t);
        }
    }

    let mut sel = Selection {
        rows: Vec::new(),
        f_rows: Vec::new(),
        blocks: Vec::new(),
        eigs: Vec::new(),
    };
    for lambda in unique {
        let multiplicity = targets
            .iter()
            .filter(|t| (*t - lambda).norm() < 1e-8)
            .count();
        let complex = lambda.im.abs() > 1e-12;
        let mut taken = 0;
        for cand in ws.candidates(lambda, opts.null_tol) {
            if taken >= multiplicity || sel.rows.len() >= required {
                break;
            }
            let f = ws.f_row(&cand, lambda);
            if complex {
                if sel.rows.len() + 2 > required {
                    break;
                }
                let mr = cand.map(|c| c.re);
                let mi = cand.map(|c| c.im);
                if sel.rank_with(&[&mr, &mi], opts.select_tol) < sel.rows.len() + 2 {
                    continue;
                }
                let (r1, c1) = normalize_row(&mr);
                let (r2, c2) = normalize_row(&mi);
                let (a, b) = (lambda.re, lambda.im);
                sel.rows.push(r1);
                sel.rows.push(r2);
                sel.f_rows.push(f.map(|c| c.re) / c1);
                sel.f_rows.push(f.map(|c| c.im) / c2);
                sel.blocks
                    .push(AhatBlock::Pair([[a, -b * c2 / c1], [b * c1 / c2, a]]));
                sel.eigs.push(lambda);
                sel.eigs.push(lambda.conj());
            } else {
                let phase = realign(&cand);
                let mr = (&cand * phase).map(|c| c.re);
                if sel.rank_with(&[&mr], opts.select_tol) <= sel.rows.len() {
                    continue;
                }
                let (r, c) = normalize_row(&mr);
                sel.rows.push(r);
                sel.f_rows.push((f * phase).map(|c| c.re) / c);
                sel.blocks.push(AhatBlock::Real(lambda.re));
                sel.eigs.push(Complex64::new(lambda.re, 0.0));
            }
            taken += 1;
        }
    }

    let q = sel.rows.len();
    if q < required {
        return Err(Error::DegenerateZeros {
            achieved: q,
            required,
        });
    }
    let mut m = Mat::zeros(q, n);
    let mut f = Mat::zeros(q, bm.cn.nrows());
    for i in 0..q {
        m.set_row(i, &sel.rows[i]);
        f.set_row(i, &sel.f_rows[i]);
    }
    let mut a_hat = Mat::zeros(q, q);
    let mut i = 0;
    for b in &sel.blocks {
        match b {
            AhatBlock::Real(v) => {
                a_hat[(i, i)] = *v;
                i += 1;
            }
            AhatBlock::Pair(p) => {
                for r in 0..2 {
                    for c in 0..2 {
                        a_hat[(i + r, i + c)] = p[r][c];
                    }
                }
                i += 2;
            }
        }
    }
    let gains = ObserverGains {
        m,
        a_hat,
        f,
        q,
        stable_eigs: sel.eigs,
    };
    let res = residuals_with(&gains, sys, &bm);
    let scale = residual_scale(&gains, sys);
    if !(res.spectral_radius < 1.0
        && res.sylvester <= opts.eps * scale
        && res.decoupling <= opts.eps * scale)
    {
        return Err(Error::RankLoss(format!(
            "synthesized gains miss the observer conditions (rho {:.3e}, sylvester {:.3e}, decoupling {:.3e})",
            res.spectral_radius, res.sylvester, res.decoupling
        )));
    }
    Ok(gains)
}

/// Magnitude the condition residuals are measured against.
pub fn residual_scale(g: &ObserverGains, sys: &StateSpace) -> f64 {
    let bm = stack_block_matrices(sys);
    1.0 + linalg::sigma_max(&sys.a) + linalg::sigma_max(&g.f) * linalg::sigma_max(&bm.cn)
}
