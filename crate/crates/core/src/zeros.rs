//! Transmission zeros by structural deflation of the system pencil.
//!
//! Each pass row-compresses `D`; output combinations that do not see the input
//! directly constrain the state, so those state directions are removed and the
//! constraint is carried into the next pass. Doing the same on the dual system
//! leaves a reduced system with invertible feedthrough whose zeros are the
//! eigenvalues of `A - B D^{-1} C`. No generalized eigenvalue solver is needed.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::system::StateSpace;

/// Finite transmission zeros split by modulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroClassification {
    pub mp_zeros: Vec<Complex64>,
    pub nmp_zeros: Vec<Complex64>,
    pub unit_circle_zeros: Vec<Complex64>,
    /// `n` minus the number of finite zeros.
    pub padding_count: usize,
    pub uc_tol: f64,
}

impl ZeroClassification {
    pub fn classify(zeros: &[Complex64], n: usize, uc_tol: f64) -> Self {
        let mut mp = Vec::new();
        let mut nmp = Vec::new();
        let mut uc = Vec::new();
        for &z in zeros {
            let r = z.norm();
            if r < 1.0 - uc_tol {
                mp.push(z);
            } else if r > 1.0 + uc_tol {
                nmp.push(z);
            } else {
                uc.push(z);
            }
        }
        Self {
            mp_zeros: mp,
            nmp_zeros: nmp,
            unit_circle_zeros: uc,
            padding_count: n.saturating_sub(zeros.len()),
            uc_tol,
        }
    }

    pub fn all(&self) -> Vec<Complex64> {
        let mut v: Vec<Complex64> = self
            .mp_zeros
            .iter()
            .chain(&self.nmp_zeros)
            .chain(&self.unit_circle_zeros)
            .copied()
            .collect();
        linalg::sort_complex(&mut v);
        v
    }

    /// Number of non-minimum-phase zeros, counted with multiplicity.
    pub fn nmp_count(&self) -> usize {
        self.nmp_zeros.len()
    }

    pub fn has_unit_circle_zeros(&self) -> bool {
        !self.unit_circle_zeros.is_empty()
    }

    /// Zeros padded with `padding_count` zeros at the origin.
    pub fn padded_spectrum(&self) -> Vec<Complex64> {
        let mut v = self.all();
        v.extend(std::iter::repeat_n(
            Complex64::new(0.0, 0.0),
            self.padding_count,
        ));
        v
    }
}

struct Quad {
    a: Mat,
    b: Mat,
    c: Mat,
    d: Mat,
}

impl Quad {
    fn dual(self) -> Quad {
        Quad {
            a: self.a.transpose(),
            b: self.c.transpose(),
            c: self.b.transpose(),
            d: self.d.transpose(),
        }
    }
}

/// Deflate until `D` has full row rank.
fn reduce(mut q: Quad, rank_tol: f64) -> Quad {
    loop {
        let n = q.a.nrows();
        let p = q.d.nrows();
        if p == 0 {
            return q;
        }
        let (u, s) = linalg::full_left_svd(&q.d);
        let dscale = s.first().copied().unwrap_or(0.0).max(1.0);
        let rho = s.iter().filter(|&&x| x > rank_tol * dscale).count();
        if rho == p {
            return q;
        }
        let ut = u.transpose();
        let ct = &ut * &q.c;
        let dt = &ut * &q.d;
        let c1 = ct.rows(0, rho).into_owned();
        let c2 = ct.rows(rho, p - rho).into_owned();
        let d1 = dt.rows(0, rho).into_owned();
        if n == 0 {
            return Quad { c: c1, d: d1, ..q };
        }
        let pencil_scale = {
            let top = linalg::hstack(&[&q.a, &q.b]);
            let bottom = linalg::hstack(&[&q.c, &q.d]);
            linalg::sigma_max(&linalg::vstack(&[&top, &bottom])).max(1.0)
        };
        let (v, s2) = linalg::full_right_svd(&c2);
        let nu = s2.iter().filter(|&&x| x > rank_tol * pencil_scale).count();
        if nu == 0 {
            return Quad { c: c1, d: d1, ..q };
        }
        // Reverse the column order so the trailing `nu` columns span the
        // row space of C2 and the leading ones its null space.
        let vr = Mat::from_fn(n, n, |i, j| v[(i, n - 1 - j)]);
        let at = vr.transpose() * &q.a * &vr;
        let bt = vr.transpose() * &q.b;
        let c1t = &c1 * &vr;
        let k = n - nu;
        let a11 = at.view((0, 0), (k, k)).into_owned();
        let a21 = at.view((k, 0), (nu, k)).into_owned();
        let b1 = bt.rows(0, k).into_owned();
        let b2 = bt.rows(k, nu).into_owned();
        q = Quad {
            a: a11,
            b: b1,
            c: linalg::vstack(&[&c1t.columns(0, k).into_owned(), &a21]),
            d: linalg::vstack(&[&d1, &b2]),
        };
    }
}

/// Finite transmission zeros of a square system.
pub fn finite_zeros(sys: &StateSpace, rank_tol: f64) -> Result<Vec<Complex64>> {
    sys.require_square()?;
    let q = Quad {
        a: sys.a.clone(),
        b: sys.b.clone(),
        c: sys.c.clone(),
        d: sys.d.clone(),
    };
    let q = reduce(q, rank_tol);
    let q = reduce(q.dual(), rank_tol).dual();
    if q.a.nrows() == 0 {
        return Ok(Vec::new());
    }
    if q.d.nrows() != q.d.ncols() {
        return Err(Error::RankLoss(format!(
            "system pencil is degenerate (reduced feedthrough is {}x{})",
            q.d.nrows(),
            q.d.ncols()
        )));
    }
    let dinv = linalg::try_inverse(&q.d, rank_tol).ok_or_else(|| {
        Error::RankLoss("system pencil is degenerate (normal rank deficient)".into())
    })?;
    let core = &q.a - &q.b * dinv * &q.c;
    let mut z = linalg::eigenvalues(&core);
    clean_conjugates(&mut z);
    linalg::sort_complex(&mut z);
    Ok(z)
}

/// Transmission zeros classified against the unit circle.
pub fn transmission_zeros(sys: &StateSpace, uc_tol: f64) -> Result<ZeroClassification> {
    let z = finite_zeros(sys, linalg::DEFAULT_RANK_TOL)?;
    Ok(ZeroClassification::classify(&z, sys.n(), uc_tol))
}

fn clean_conjugates(z: &mut [Complex64]) {
    for v in z.iter_mut() {
        if v.im.abs() <= 1e-10 * v.norm().max(1.0) {
            v.im = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{tf_to_ss, Poly};
    use nalgebra::dmatrix;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn case1_zeros() {
        let sys = tf_to_ss(
            &Poly::new(vec![1.0, -2.0, 0.75]),
            &Poly::new(vec![1.0, 0.0, 0.0]),
        )
        .unwrap();
        let zc = transmission_zeros(&sys, 1e-6).unwrap();
        assert!(linalg::multiset_distance(&zc.all(), &[c(1.5), c(0.5)]) < 1e-12);
        assert_eq!(zc.padding_count, 0);
        assert_eq!(zc.nmp_count(), 1);
    }

    #[test]
    fn strictly_proper_siso() {
        // (z - 0.3) / (z^3 - 0.1 z) has one finite zero and relative degree 2.
        let sys = tf_to_ss(
            &Poly::new(vec![1.0, -0.3]),
            &Poly::new(vec![1.0, 0.0, -0.1, 0.0]),
        )
        .unwrap();
        let zc = transmission_zeros(&sys, 1e-6).unwrap();
        assert!(linalg::multiset_distance(&zc.all(), &[c(0.3)]) < 1e-12);
        assert_eq!(zc.padding_count, 2);
    }

    #[test]
    fn case3_zeros() {
        let sys = StateSpace::new(
            dmatrix![0.6, -0.3, 0.0, 0.0; 0.1, 1.0, 0.0, 0.0; -0.4, -1.5, 0.4, -0.3; 0.3, 1.1, 0.2, 0.9],
            dmatrix![0.0, 0.4; 0.0, 0.0; 0.0, -0.1; 0.1, 0.1],
            dmatrix![1.0, 2.0, 3.0, 4.0; 2.0, 1.0, 5.0, 6.0],
            Mat::zeros(2, 2),
        )
        .unwrap();
        let zc = transmission_zeros(&sys, 1e-6).unwrap();
        assert_eq!(zc.padding_count, 2);
        assert!(linalg::multiset_distance(&zc.all(), &[c(1.9928), c(0.6072)]) < 1e-4);
    }

    #[test]
    fn non_square_rejected() {
        let sys = StateSpace::new(
            Mat::identity(2, 2) * 0.5,
            Mat::identity(2, 2),
            dmatrix![1.0, 0.0],
            dmatrix![0.0, 0.0],
        )
        .unwrap();
        assert!(matches!(
            transmission_zeros(&sys, 1e-6),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn classification_buckets() {
        let zc = ZeroClassification::classify(&[c(-1.0), c(-3.0), c(0.5), c(-0.5)], 4, 1e-6);
        assert_eq!(zc.unit_circle_zeros.len(), 1);
        assert_eq!(zc.nmp_zeros, vec![c(-3.0)]);
        assert_eq!(zc.mp_zeros.len(), 2);
        assert_eq!(zc.padding_count, 0);
    }
}
