//! Real polynomials (highest power first) and SISO transfer-function helpers.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::system::{self, SignalTrace, StateSpace};

/// Real polynomial, coefficients ordered from the highest power down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly(Vec<f64>);

impl Poly {
    /// Leading zeros are trimmed; the zero polynomial is `[0]`.
    pub fn new(coeffs: Vec<f64>) -> Self {
        let first = coeffs.iter().position(|&c| c != 0.0);
        match first {
            Some(i) => Poly(coeffs[i..].to_vec()),
            None => Poly(vec![0.0]),
        }
    }

    pub fn constant(c: f64) -> Self {
        Poly(vec![c])
    }

    /// `z - r` for a real root.
    pub fn linear(root: f64) -> Self {
        Poly(vec![1.0, -root])
    }

    /// Monic polynomial with the given roots. Roots must be closed under
    /// conjugation; the tiny imaginary residue of the expansion is dropped.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut c = vec![Complex64::new(1.0, 0.0)];
        for &r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
            for (i, &ci) in c.iter().enumerate() {
                next[i] += ci;
                next[i + 1] -= ci * r;
            }
            c = next;
        }
        Poly(c.into_iter().map(|x| x.re).collect())
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn leading(&self) -> f64 {
        self.0[0]
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.0
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn scale(&self, s: f64) -> Self {
        Poly::new(self.0.iter().map(|c| c * s).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    /// Long division, returning quotient and remainder.
    pub fn div_rem(&self, divisor: &Poly) -> (Poly, Poly) {
        assert!(!divisor.is_zero(), "division by the zero polynomial");
        let dd = divisor.degree();
        if self.degree() < dd {
            return (Poly::constant(0.0), self.clone());
        }
        let mut rem = self.0.clone();
        let qlen = self.degree() - dd + 1;
        let mut q = vec![0.0; qlen];
        for i in 0..qlen {
            let f = rem[i] / divisor.0[0];
            q[i] = f;
            for (j, dc) in divisor.0.iter().enumerate() {
                rem[i + j] -= f * dc;
            }
        }
        let r = if dd == 0 {
            vec![0.0]
        } else {
            rem[qlen..].to_vec()
        };
        (Poly::new(q), Poly::new(r))
    }

    /// Roots from the eigenvalues of the companion matrix.
    pub fn roots(&self) -> Vec<Complex64> {
        let d = self.degree();
        if d == 0 {
            return Vec::new();
        }
        let lead = self.0[0];
        let mut comp = Mat::zeros(d, d);
        for j in 0..d {
            comp[(0, j)] = -self.0[j + 1] / lead;
        }
        for i in 1..d {
            comp[(i, i - 1)] = 1.0;
        }
        let mut r = linalg::eigenvalues(&comp);
        linalg::sort_complex(&mut r);
        r
    }
}

/// Controllable canonical realization of a proper `num/den`: companion `A`
/// with the denominator in its first row and `B = e1`.
pub fn tf_to_ss(num: &Poly, den: &Poly) -> Result<StateSpace> {
    if den.is_zero() {
        return Err(Error::Improper("zero denominator".into()));
    }
    if num.degree() > den.degree() {
        return Err(Error::Improper(format!(
            "numerator degree {} exceeds denominator degree {}",
            num.degree(),
            den.degree()
        )));
    }
    let n = den.degree();
    let lead = den.leading();
    let a_coef: Vec<f64> = den.coeffs().iter().map(|c| c / lead).collect();
    // Numerator padded to degree n and normalized by the same leading factor.
    let mut b_coef = vec![0.0; n + 1 - num.coeffs().len()];
    b_coef.extend(num.coeffs().iter().map(|c| c / lead));
    let d0 = b_coef[0];
    let mut a = Mat::zeros(n, n);
    for j in 0..n {
        a[(0, j)] = -a_coef[j + 1];
    }
    for i in 1..n {
        a[(i, i - 1)] = 1.0;
    }
    let mut b = Mat::zeros(n, 1);
    if n > 0 {
        b[(0, 0)] = 1.0;
    }
    let mut c = Mat::zeros(1, n);
    for j in 0..n {
        c[(0, j)] = b_coef[j + 1] - d0 * a_coef[j + 1];
    }
    StateSpace::new(a, b, c, Mat::from_element(1, 1, d0))
}

/// Numerator and denominator of a SISO system. The denominator is the
/// characteristic polynomial of `A`; the numerator follows exactly from the
/// Markov parameters, so no root finding enters it.
pub fn siso_tf(sys: &StateSpace) -> Result<(Poly, Poly)> {
    if sys.m() != 1 || sys.l() != 1 {
        return Err(Error::Unsupported(format!(
            "expected a SISO system, got {} inputs and {} outputs",
            sys.m(),
            sys.l()
        )));
    }
    let n = sys.n();
    let den = Poly::from_roots(&linalg::eigenvalues(&sys.a));
    let mut markov = Vec::with_capacity(n + 1);
    markov.push(sys.d[(0, 0)]);
    let mut cak = sys.c.clone();
    for _ in 0..n {
        markov.push((&cak * &sys.b)[(0, 0)]);
        cak *= &sys.a;
    }
    let a = den.coeffs();
    let num: Vec<f64> = (0..=n)
        .map(|j| (0..=j).map(|i| a[i] * markov[j - i]).sum())
        .collect();
    // Round-off below the scale of the data is treated as an exact zero so the
    // degree of the numerator is not inflated.
    let scale = num.iter().fold(0.0_f64, |m, c| m.max(c.abs())).max(1e-300);
    let cleaned = num
        .into_iter()
        .map(|c| if c.abs() <= 1e-12 * scale { 0.0 } else { c })
        .collect();
    Ok((Poly::new(cleaned), den))
}

/// Filter a scalar trace through `num/den` from rest.
pub fn filter_rational(num: &Poly, den: &Poly, u: &SignalTrace) -> Result<SignalTrace> {
    if u.dim() != 1 {
        return Err(Error::dim("rational filters act on scalar traces"));
    }
    let ss = tf_to_ss(num, den)?;
    let (_, y) = system::simulate(&ss, &Vector::zeros(ss.n()), u)?;
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn from_roots_and_eval() {
        let p = Poly::from_roots(&[Complex64::new(1.5, 0.0), Complex64::new(0.5, 0.0)]);
        assert_eq!(p.coeffs(), &[1.0, -2.0, 0.75]);
        assert!(p.eval(Complex64::new(1.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn division_by_linear_factor() {
        let p = Poly::new(vec![1.0, 1.0]);
        let (q, r) = p.div_rem(&Poly::linear(-1.0));
        assert_eq!(q.coeffs(), &[1.0]);
        assert!(r.is_zero());
        let (q, r) = Poly::new(vec![1.0, 0.0, 2.0]).div_rem(&Poly::linear(1.0));
        assert_eq!(q.coeffs(), &[1.0, 1.0]);
        assert_eq!(r.coeffs(), &[3.0]);
    }

    #[test]
    fn roots_of_quadratic() {
        let r = Poly::new(vec![1.0, -1.0, 0.5]).roots();
        assert!((r[0] - Complex64::new(0.5, 0.5)).norm() < 1e-12);
        assert!((r[1] - Complex64::new(0.5, -0.5)).norm() < 1e-12);
    }

    #[test]
    fn canonical_form_of_case1() {
        let ss = tf_to_ss(
            &Poly::new(vec![1.0, -2.0, 0.75]),
            &Poly::new(vec![1.0, 0.0, 0.0]),
        )
        .unwrap();
        assert_eq!(ss.a, nalgebra::dmatrix![0.0, 0.0; 1.0, 0.0]);
        assert_eq!(ss.b, nalgebra::dmatrix![1.0; 0.0]);
        assert_eq!(ss.c, nalgebra::dmatrix![-2.0, 0.75]);
        assert_eq!(ss.d, nalgebra::dmatrix![1.0]);
    }

    #[test]
    fn tf_round_trip() {
        let num = Poly::new(vec![2.0, 0.3, -0.1]);
        let den = Poly::new(vec![1.0, -0.4, 0.2, 0.05]);
        let ss = tf_to_ss(&num, &den).unwrap();
        let (n2, d2) = siso_tf(&ss).unwrap();
        assert_eq!(n2.degree(), 2);
        for (a, b) in n2.coeffs().iter().zip(num.coeffs()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in d2.coeffs().iter().zip(den.coeffs()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn improper_rejected() {
        assert!(matches!(
            tf_to_ss(&Poly::new(vec![1.0, 0.0]), &Poly::constant(1.0)),
            Err(Error::Improper(_))
        ));
    }

    #[test]
    fn delay_filter() {
        let y = filter_rational(
            &Poly::constant(0.5),
            &Poly::new(vec![1.0, 0.0]),
            &SignalTrace::from_scalars(&[1.0, 0.0, 0.0]),
        )
        .unwrap();
        assert_eq!(
            y.samples(),
            &[
                DVector::from_element(1, 0.0),
                DVector::from_element(1, 0.5),
                DVector::from_element(1, 0.0)
            ]
        );
    }
}
