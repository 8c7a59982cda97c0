//! Dense linear-algebra helpers on top of nalgebra, with faer doing the SVDs.
//!
//! Everything here works on dynamically sized matrices. Rank decisions are
//! always made from singular values so that the same threshold semantics hold
//! for pseudo-inverses, null spaces and rank tests.

use nalgebra::linalg::Schur;
use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;
pub type CMat = DMatrix<Complex64>;

/// Default relative threshold for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Scalars the SVD backend accepts.
trait SvdScalar: nalgebra::Scalar + faer::traits::ComplexField<Real = f64> + Copy {
    fn modulus(self) -> f64;
}

impl SvdScalar for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl SvdScalar for Complex64 {
    fn modulus(self) -> f64 {
        self.norm()
    }
}

/// Full SVD `m = U diag(s) V^H` with `U` and `V` square and `s` descending.
///
/// nalgebra's bidiagonal SVD loses digits on some mildly conditioned
/// Toeplitz blocks (recomposition errors near 1e-3), so the decomposition
/// is delegated to faer and copied back.
fn full_svd<T: SvdScalar>(m: &DMatrix<T>) -> (DMatrix<T>, Vec<f64>, DMatrix<T>) {
    let (r, c) = m.shape();
    let fm = faer::Mat::<T>::from_fn(r, c, |i, j| m[(i, j)]);
    let svd = fm.svd().expect("SVD did not converge");
    let u = svd.U();
    let v = svd.V();
    let s = svd
        .S()
        .column_vector()
        .iter()
        .map(|x| x.modulus())
        .collect();
    (
        DMatrix::from_fn(r, r, |i, j| u[(i, j)]),
        s,
        DMatrix::from_fn(c, c, |i, j| v[(i, j)]),
    )
}

fn singular_values_of<T: SvdScalar>(m: &DMatrix<T>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let fm = faer::Mat::<T>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    let mut s = fm.singular_values().expect("SVD did not converge");
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Singular values in descending order. Empty matrices have none.
pub fn singular_values(m: &Mat) -> Vec<f64> {
    singular_values_of(m)
}

pub fn sigma_max(m: &Mat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn sigma_max_c(m: &CMat) -> f64 {
    singular_values_of(m).first().copied().unwrap_or(0.0)
}

/// Numerical rank with threshold `rank_tol * sigma_max`.
pub fn rank(m: &Mat, rank_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&smax) if smax > 0.0 => s.iter().filter(|&&x| x > rank_tol * smax).count(),
        _ => 0,
    }
}

/// Number of singular values strictly above an absolute threshold.
pub fn rank_abs(m: &Mat, threshold: f64) -> usize {
    singular_values(m)
        .iter()
        .filter(|&&x| x > threshold)
        .count()
}

/// Moore–Penrose pseudo-inverse. Singular values above `rank_tol * sigma_max`
/// are reciprocated, the rest are treated as zero.
pub fn pinv(m: &Mat, rank_tol: f64) -> Mat {
    let smax = sigma_max(m);
    pinv_abs(m, rank_tol * smax)
}

/// Pseudo-inverse with an absolute singular-value cut-off.
pub fn pinv_abs(m: &Mat, threshold: f64) -> Mat {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Mat::zeros(c, r);
    }
    let (u, s, v) = full_svd(m);
    let mut out = Mat::zeros(c, r);
    for (i, &s) in s.iter().enumerate() {
        if s > threshold && s > 0.0 {
            // out += v_i * (1/s) * u_i^T
            out += (v.column(i) * u.column(i).transpose()) / s;
        }
    }
    out
}

/// Orthonormal basis of `{ v : v * m = 0 }` for a complex matrix, returned as
/// row vectors. Singular values at or below `threshold` count as zero.
pub fn left_null_space(m: &CMat, threshold: f64) -> Vec<RowDVector<Complex64>> {
    let (rows, cols) = m.shape();
    if rows == 0 {
        return Vec::new();
    }
    if cols == 0 {
        return (0..rows)
            .map(|i| {
                let mut r = RowDVector::zeros(rows);
                r[i] = Complex64::new(1.0, 0.0);
                r
            })
            .collect();
    }
    // v m = 0  <=>  m^H v^H = 0, and V of m^H is a full right basis.
    let (_, s, v) = full_svd(&m.adjoint());
    let kept = s.iter().filter(|&&x| x > threshold).count();
    (kept..rows).map(|i| v.column(i).adjoint()).collect()
}

/// Full orthogonal left factor `U` (rows × rows) and the singular values of `m`.
pub fn full_left_svd(m: &Mat) -> (Mat, Vec<f64>) {
    let (rows, cols) = m.shape();
    if rows == 0 {
        return (Mat::zeros(0, 0), Vec::new());
    }
    if cols == 0 {
        return (Mat::identity(rows, rows), Vec::new());
    }
    let (u, s, _) = full_svd(m);
    (u, s)
}

/// Full orthogonal right factor `V` (cols × cols), so that `m * V` has its
/// dominant directions first, and the singular values of `m`.
pub fn full_right_svd(m: &Mat) -> (Mat, Vec<f64>) {
    let (u, s) = full_left_svd(&m.transpose());
    (u, s)
}

/// Eigenvalues via real Schur. The unshifted QR iteration can stall on
/// exactly structured inputs (the nilpotent shift matrix is the classic
/// case), so a stalled attempt is retried on an orthogonally similar matrix.
pub fn eigenvalues(m: &Mat) -> Vec<Complex64> {
    const MAX_ITER: usize = 10_000;
    if m.is_empty() {
        return Vec::new();
    }
    let n = m.nrows();
    if let Some(s) = Schur::try_new(m.clone(), f64::EPSILON, MAX_ITER) {
        return s.complex_eigenvalues().iter().copied().collect();
    }
    for attempt in 1..=8u32 {
        // Deterministic orthogonal factor from a fixed, full-rank seed matrix.
        let seed = Mat::from_fn(n, n, |i, j| {
            ((attempt as f64 + 1.0) * (i as f64 + 1.3) * (j as f64 + 0.7)).sin()
        });
        let q = seed.qr().q();
        let rotated = q.transpose() * m * &q;
        if let Some(s) = Schur::try_new(rotated, f64::EPSILON, MAX_ITER) {
            return s.complex_eigenvalues().iter().copied().collect();
        }
    }
    panic!("Schur iteration failed to converge on a {n}x{n} matrix");
}

pub fn spectral_radius(m: &Mat) -> f64 {
    eigenvalues(m).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn mat_pow(m: &Mat, k: usize) -> Mat {
    let n = m.nrows();
    let mut out = Mat::identity(n, n);
    let mut base = m.clone();
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            out = &out * &base;
        }
        base = &base * &base;
        e >>= 1;
    }
    out
}

pub fn to_complex(m: &Mat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Inverse of a square matrix, `None` if it is numerically singular.
pub fn try_inverse(m: &Mat, rank_tol: f64) -> Option<Mat> {
    if m.nrows() != m.ncols() {
        return None;
    }
    if m.is_empty() {
        return Some(Mat::zeros(0, 0));
    }
    if rank(m, rank_tol) < m.nrows() {
        return None;
    }
    m.clone().try_inverse()
}

/// Stack matrices vertically. All blocks must share a column count.
pub fn vstack(blocks: &[&Mat]) -> Mat {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack column mismatch");
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(*b);
        r += b.nrows();
    }
    out
}

/// Stack matrices horizontally. All blocks must share a row count.
pub fn hstack(blocks: &[&Mat]) -> Mat {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hstack row mismatch");
        out.view_mut((0, c), (rows, b.ncols())).copy_from(*b);
        c += b.ncols();
    }
    out
}

/// Horizontal concatenation of complex matrices.
pub fn hstack_c(blocks: &[&CMat]) -> CMat {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        out.view_mut((0, c), (rows, b.ncols())).copy_from(*b);
        c += b.ncols();
    }
    out
}

/// Vertical concatenation of complex matrices.
pub fn vstack_c(blocks: &[&CMat]) -> CMat {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(*b);
        r += b.nrows();
    }
    out
}

pub fn vstack_vec(parts: &[&Vector]) -> Vector {
    let len = parts.iter().map(|p| p.len()).sum();
    let mut out = Vector::zeros(len);
    let mut i = 0;
    for p in parts {
        out.rows_mut(i, p.len()).copy_from(*p);
        i += p.len();
    }
    out
}

/// Largest distance in an optimal one-to-one matching of two multisets of
/// complex numbers. Returns `f64::INFINITY` when the sizes differ.
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    if a.is_empty() {
        return 0.0;
    }
    if a.len() <= 7 {
        let mut idx: Vec<usize> = (0..b.len()).collect();
        let mut best = f64::INFINITY;
        permute(&mut idx, 0, &mut |perm| {
            let d = a
                .iter()
                .zip(perm.iter())
                .map(|(x, &j)| (x - b[j]).norm())
                .fold(0.0, f64::max);
            if d < best {
                best = d;
            }
        });
        return best;
    }
    // Greedy matching for larger sets.
    let mut remaining: Vec<Complex64> = b.to_vec();
    let mut worst: f64 = 0.0;
    for x in a {
        let (j, d) = remaining
            .iter()
            .enumerate()
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .expect("non-empty");
        worst = worst.max(d);
        remaining.swap_remove(j);
    }
    worst
}

fn permute(idx: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == idx.len() {
        f(idx);
        return;
    }
    for i in k..idx.len() {
        idx.swap(k, i);
        permute(idx, k + 1, f);
        idx.swap(k, i);
    }
}

/// Sort complex values by descending real part, then descending imaginary part.
pub fn sort_complex(v: &mut [Complex64]) {
    v.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
}
