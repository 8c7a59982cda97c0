//! Coordinates that split the state into an observer-reconstructible part
//! `x1` and a remainder `x2`, plus the zero dynamics that drive `x2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::system::StateSpace;
use crate::uio::ObserverGains;
use crate::zeros::ZeroClassification;

/// Realization in the coordinates `x' = T1 x`, where the first `q`
/// coordinates are exactly recoverable as `Mq^{-1} M x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionedRealization {
    pub t1: Mat,
    pub l: Mat,
    pub mq: Mat,
    pub mq_inv: Mat,
    pub a11: Mat,
    pub a12: Mat,
    pub a21: Mat,
    pub a22: Mat,
    pub b1: Mat,
    pub b2: Mat,
    pub c1: Mat,
    pub c2: Mat,
    pub d: Mat,
    pub q: usize,
}

impl PartitionedRealization {
    pub fn n(&self) -> usize {
        self.t1.nrows()
    }

    /// Dimension of the remainder `x2`.
    pub fn nmp_dim(&self) -> usize {
        self.n() - self.q
    }

    /// The whole system in the new coordinates.
    pub fn transformed(&self) -> StateSpace {
        let top = linalg::hstack(&[&self.a11, &self.a12]);
        let bottom = linalg::hstack(&[&self.a21, &self.a22]);
        StateSpace {
            a: linalg::vstack(&[&top, &bottom]),
            b: linalg::vstack(&[&self.b1, &self.b2]),
            c: linalg::hstack(&[&self.c1, &self.c2]),
            d: self.d.clone(),
        }
    }
}

/// Full orthogonal factorization `M = [Mq 0] T1` with `diag(Mq) > 0`.
pub fn partition_states(
    g: &ObserverGains,
    sys: &StateSpace,
    rank_tol: f64,
) -> Result<PartitionedRealization> {
    let n = sys.n();
    let q = g.m.nrows();
    if g.m.ncols() != n {
        return Err(Error::dim(format!(
            "M has {} columns, system order is {n}",
            g.m.ncols()
        )));
    }
    if q == 0 || q > n {
        return Err(Error::dim(format!("observer rank {q} outside 1..={n}")));
    }
    // QR of the zero-padded square M^T yields a complete orthogonal Q.
    let mut padded = Mat::zeros(n, n);
    padded.view_mut((0, 0), (n, q)).copy_from(&g.m.transpose());
    let qmat = padded.qr().q();
    let mut t1 = qmat.transpose();
    let l0 = &g.m * t1.transpose();
    for i in 0..q {
        if l0[(i, i)] < 0.0 {
            t1.row_mut(i).neg_mut();
        }
    }
    for i in q..n {
        let pivot = t1
            .row(i)
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(0.0);
        if pivot < 0.0 {
            t1.row_mut(i).neg_mut();
        }
    }
    let l = &g.m * t1.transpose();
    let mq = l.columns(0, q).into_owned();
    let mq_inv = linalg::try_inverse(&mq, rank_tol)
        .ok_or_else(|| Error::RankLoss("Mq is numerically singular; M lost row rank".into()))?;
    let sys1 = sys.transform_orthogonal(&t1);
    let r = n - q;
    Ok(PartitionedRealization {
        a11: sys1.a.view((0, 0), (q, q)).into_owned(),
        a12: sys1.a.view((0, q), (q, r)).into_owned(),
        a21: sys1.a.view((q, 0), (r, q)).into_owned(),
        a22: sys1.a.view((q, q), (r, r)).into_owned(),
        b1: sys1.b.rows(0, q).into_owned(),
        b2: sys1.b.rows(q, r).into_owned(),
        c1: sys1.c.columns(0, q).into_owned(),
        c2: sys1.c.columns(q, r).into_owned(),
        d: sys1.d,
        t1,
        l,
        mq,
        mq_inv,
        q,
    })
}

/// Which algebraic relation eliminates the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReconstructionPath {
    /// `u = B1^+ (x1(k+1) - A11 x1(k) - A12 x2(k))`, driven by `[x1(k+1); x1(k)]`.
    B1,
    /// `u = D^+ (y(k) - C1 x1(k) - C2 x2(k))`, driven by `[x1(k); y(k)]`.
    D,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PathPreference {
    #[default]
    B1First,
    DFirst,
}

/// Forward zero dynamics `x2(k+1) = Az x2(k) + Bz theta(k)` and the
/// backward form `x2(k) = Az^{-1} x2(k+1) - Az^{-1} Bz theta(k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroDynamics {
    pub path: ReconstructionPath,
    pub az: Mat,
    pub bz: Mat,
    /// Output map of the B1 form: `y = Cz1 theta + Cz2 x2`.
    pub cz1: Option<Mat>,
    pub cz2: Option<Mat>,
    pub az_inv: Mat,
    pub bz_tilde: Mat,
    /// Pseudo-inverse of `B1` or `D`, whichever the path uses.
    pub elim_pinv: Mat,
}

impl ZeroDynamics {
    pub fn dim(&self) -> usize {
        self.az.nrows()
    }

    /// Length of the driving vector `theta`.
    pub fn theta_dim(&self) -> usize {
        self.bz.ncols()
    }
}

fn full_column_rank(m: &Mat, rank_tol: f64) -> bool {
    m.ncols() == 0 || (m.nrows() >= m.ncols() && linalg::rank(m, rank_tol) == m.ncols())
}

pub fn zero_dynamics(
    pr: &PartitionedRealization,
    rank_tol: f64,
    pref: PathPreference,
) -> Result<ZeroDynamics> {
    let b1_ok = full_column_rank(&pr.b1, rank_tol);
    let d_ok = full_column_rank(&pr.d, rank_tol);
    let path = match (pref, b1_ok, d_ok) {
        (PathPreference::B1First, true, _) | (PathPreference::DFirst, true, false) => {
            ReconstructionPath::B1
        }
        (_, _, true) => ReconstructionPath::D,
        (_, false, false) => return Err(Error::NotReconstructible),
    };
    let r = pr.nmp_dim();
    let (az, bz, cz1, cz2, elim_pinv) = match path {
        ReconstructionPath::B1 => {
            let b1p = linalg::pinv(&pr.b1, rank_tol);
            let b2b1p = &pr.b2 * &b1p;
            let az = &pr.a22 - &b2b1p * &pr.a12;
            let bz = linalg::hstack(&[&b2b1p, &(&pr.a21 - &b2b1p * &pr.a11)]);
            let db1p = &pr.d * &b1p;
            let cz1 = linalg::hstack(&[&db1p, &(&pr.c1 - &db1p * &pr.a11)]);
            let cz2 = &pr.c2 - &db1p * &pr.a12;
            (az, bz, Some(cz1), Some(cz2), b1p)
        }
        ReconstructionPath::D => {
            let dp = linalg::pinv(&pr.d, rank_tol);
            let b2dp = &pr.b2 * &dp;
            let az = &pr.a22 - &b2dp * &pr.c2;
            let bz = linalg::hstack(&[&(&pr.a21 - &b2dp * &pr.c1), &b2dp]);
            (az, bz, None, None, dp)
        }
    };
    debug_assert_eq!(az.shape(), (r, r));
    debug_assert_eq!(bz.nrows(), r);
    let az_inv = linalg::try_inverse(&az, rank_tol).ok_or(Error::SingularZeroDynamics)?;
    let bz_tilde = &az_inv * &bz;
    Ok(ZeroDynamics {
        path,
        az,
        bz,
        cz1,
        cz2,
        az_inv,
        bz_tilde,
        elim_pinv,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroDynamicsReport {
    /// Matching distance between `eig(Az)` and the non-minimum-phase zeros.
    pub spectrum_distance: f64,
    pub cz2_norm: Option<f64>,
    pub az_inv_radius: f64,
}

pub fn verify_zero_dynamics(zd: &ZeroDynamics, zc: &ZeroClassification) -> ZeroDynamicsReport {
    ZeroDynamicsReport {
        spectrum_distance: linalg::multiset_distance(&linalg::eigenvalues(&zd.az), &zc.nmp_zeros),
        cz2_norm: zd.cz2.as_ref().map(|c| c.norm()),
        az_inv_radius: linalg::spectral_radius(&zd.az_inv),
    }
}
