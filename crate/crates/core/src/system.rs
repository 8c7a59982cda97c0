//! State-space models, time-indexed traces and the stacked block matrices
//! used by the observer design.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, Mat, Vector};

/// Default unit-circle tolerance for pole and zero classification.
pub const DEFAULT_UC_TOL: f64 = 1e-6;
/// Default frequency grid size for H-infinity estimates.
pub const DEFAULT_GRID_POINTS: usize = 4096;

/// Discrete-time system `x(k+1) = A x(k) + B u(k)`, `y(k) = C x(k) + D u(k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
}

impl StateSpace {
    pub fn new(a: Mat, b: Mat, c: Mat, d: Mat) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::dim(format!(
                "A must be square, got {}x{}",
                n,
                a.ncols()
            )));
        }
        if b.nrows() != n {
            return Err(Error::dim(format!(
                "B has {} rows, expected {n}",
                b.nrows()
            )));
        }
        if c.ncols() != n {
            return Err(Error::dim(format!(
                "C has {} columns, expected {n}",
                c.ncols()
            )));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::dim(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            )));
        }
        let all = a.iter().chain(b.iter()).chain(c.iter()).chain(d.iter());
        if all.into_iter().any(|x| !x.is_finite()) {
            return Err(Error::dim("system matrices contain non-finite entries"));
        }
        Ok(Self { a, b, c, d })
    }

    /// Order of the state.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Number of inputs.
    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// Number of outputs.
    pub fn l(&self) -> usize {
        self.c.nrows()
    }

    pub fn is_square(&self) -> bool {
        self.m() == self.l()
    }

    pub fn require_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::Unsupported(format!(
                "{} inputs but {} outputs; only square systems are supported",
                self.m(),
                self.l()
            )))
        }
    }

    pub fn controllability_rank(&self, rank_tol: f64) -> usize {
        let n = self.n();
        let mut blocks = Vec::with_capacity(n);
        let mut cur = self.b.clone();
        for _ in 0..n {
            blocks.push(cur.clone());
            cur = &self.a * cur;
        }
        let refs: Vec<&Mat> = blocks.iter().collect();
        linalg::rank(&linalg::hstack(&refs), rank_tol)
    }

    pub fn observability_rank(&self, rank_tol: f64) -> usize {
        linalg::rank(&observability_matrix(self), rank_tol)
    }

    /// Minimality check through the ranks of the controllability and
    /// observability matrices.
    pub fn check_minimal(&self, rank_tol: f64) -> Result<()> {
        let n = self.n();
        let ctrb = self.controllability_rank(rank_tol);
        let obsv = self.observability_rank(rank_tol);
        if ctrb == n && obsv == n {
            Ok(())
        } else {
            Err(Error::NotMinimal { ctrb, obsv, n })
        }
    }

    pub fn poles(&self) -> Vec<Complex64> {
        linalg::eigenvalues(&self.a)
    }

    /// `C (zI - A)^{-1} B + D`.
    pub fn freq_response(&self, z: Complex64) -> CMat {
        let resolvent_b = resolvent_times(&self.a, &self.b, z);
        linalg::to_complex(&self.c) * resolvent_b + linalg::to_complex(&self.d)
    }

    /// Static gain system `y = D u`.
    pub fn static_gain(d: Mat) -> Self {
        let (l, m) = d.shape();
        Self {
            a: Mat::zeros(0, 0),
            b: Mat::zeros(0, m),
            c: Mat::zeros(l, 0),
            d,
        }
    }

    /// Similarity transform `x' = T x`, with `T` orthogonal.
    pub fn transform_orthogonal(&self, t: &Mat) -> Self {
        let tt = t.transpose();
        Self {
            a: t * &self.a * &tt,
            b: t * &self.b,
            c: &self.c * &tt,
            d: self.d.clone(),
        }
    }
}

/// `(zI - A)^{-1} X` for a complex frequency `z`.
pub fn resolvent_times(a: &Mat, x: &Mat, z: Complex64) -> CMat {
    let n = a.nrows();
    if n == 0 {
        return CMat::zeros(0, x.ncols());
    }
    let mut pencil = linalg::to_complex(a).map(|v| -v);
    for i in 0..n {
        pencil[(i, i)] += z;
    }
    let xc = linalg::to_complex(x);
    match pencil.clone().lu().solve(&xc) {
        Some(s) => s,
        None => CMat::from_element(n, x.ncols(), Complex64::new(f64::INFINITY, 0.0)),
    }
}

fn observability_matrix(sys: &StateSpace) -> Mat {
    let n = sys.n();
    let mut blocks = Vec::with_capacity(n);
    let mut cur = sys.c.clone();
    for _ in 0..n {
        blocks.push(cur.clone());
        cur *= &sys.a;
    }
    let refs: Vec<&Mat> = blocks.iter().collect();
    if refs.is_empty() {
        return Mat::zeros(0, 0);
    }
    linalg::vstack(&refs)
}

/// Time-indexed sequence of equally sized real vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalTrace {
    start: i64,
    dim: usize,
    samples: Vec<Vector>,
}

impl SignalTrace {
    pub fn new(start: i64, dim: usize, samples: Vec<Vector>) -> Result<Self> {
        if let Some((i, s)) = samples.iter().enumerate().find(|(_, s)| s.len() != dim) {
            return Err(Error::dim(format!(
                "sample {i} has dimension {}, trace dimension is {dim}",
                s.len()
            )));
        }
        Ok(Self {
            start,
            dim,
            samples,
        })
    }

    pub fn empty(start: i64, dim: usize) -> Self {
        Self {
            start,
            dim,
            samples: Vec::new(),
        }
    }

    pub fn zeros(start: i64, dim: usize, len: usize) -> Self {
        Self {
            start,
            dim,
            samples: vec![Vector::zeros(dim); len],
        }
    }

    /// Scalar trace starting at index 0.
    pub fn from_scalars(values: &[f64]) -> Self {
        Self {
            start: 0,
            dim: 1,
            samples: values.iter().map(|&v| Vector::from_element(1, v)).collect(),
        }
    }

    pub fn from_fn(
        start: i64,
        dim: usize,
        len: usize,
        mut f: impl FnMut(i64) -> Vector,
    ) -> Result<Self> {
        let samples = (0..len as i64).map(|i| f(start + i)).collect();
        Self::new(start, dim, samples)
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    /// One past the last index.
    pub fn end(&self) -> i64 {
        self.start + self.samples.len() as i64
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Vector] {
        &self.samples
    }

    pub fn contains(&self, k: i64) -> bool {
        k >= self.start && k < self.end()
    }

    pub fn get(&self, k: i64) -> Option<&Vector> {
        if self.contains(k) {
            Some(&self.samples[(k - self.start) as usize])
        } else {
            None
        }
    }

    /// Sample at index `k`, or an alignment error naming `what`.
    pub fn at(&self, k: i64, what: &str) -> Result<&Vector> {
        self.get(k).ok_or_else(|| {
            Error::Alignment(format!(
                "{what}: index {k} outside [{}, {})",
                self.start,
                self.end()
            ))
        })
    }

    pub fn push(&mut self, v: Vector) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::dim(format!(
                "pushed sample has dimension {}, trace dimension is {}",
                v.len(),
                self.dim
            )));
        }
        self.samples.push(v);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &Vector)> {
        self.samples
            .iter()
            .enumerate()
            .map(move |(i, v)| (self.start + i as i64, v))
    }

    /// Sub-trace covering `[from, to)` intersected with this trace.
    pub fn window(&self, from: i64, to: i64) -> Self {
        let lo = from.max(self.start);
        let hi = to.min(self.end()).max(lo);
        let a = (lo - self.start) as usize;
        let b = (hi - self.start) as usize;
        Self {
            start: lo,
            dim: self.dim,
            samples: self.samples[a..b].to_vec(),
        }
    }

    pub fn component(&self, i: usize) -> Vec<f64> {
        self.samples.iter().map(|v| v[i]).collect()
    }

    /// Index-aligned difference `self - other` over the common index range.
    pub fn sub_aligned(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::dim("traces differ in dimension"));
        }
        let lo = self.start.max(other.start);
        let hi = self.end().min(other.end()).max(lo);
        let samples = (lo..hi)
            .map(|k| self.get(k).unwrap() - other.get(k).unwrap())
            .collect();
        Ok(Self {
            start: lo,
            dim: self.dim,
            samples,
        })
    }

    /// Same samples at a different start index.
    pub fn reindexed(&self, start: i64) -> Self {
        Self {
            start,
            dim: self.dim,
            samples: self.samples.clone(),
        }
    }

    pub fn map(&self, dim: usize, f: impl Fn(&Vector) -> Vector) -> Result<Self> {
        Self::new(self.start, dim, self.samples.iter().map(f).collect())
    }

    /// Largest 2-norm over samples with index `>= from`.
    pub fn max_norm_from(&self, from: i64) -> f64 {
        self.iter()
            .filter(|(k, _)| *k >= from)
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max)
    }

    pub fn max_norm(&self) -> f64 {
        self.max_norm_from(i64::MIN)
    }
}

/// Stacked observability matrix `Cn`, lower block-Toeplitz impulse matrix
/// `Dn` and the first-block selector `[I 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrices {
    pub cn: Mat,
    pub dn: Mat,
    pub in_selector: Mat,
}

pub fn stack_block_matrices(sys: &StateSpace) -> BlockMatrices {
    let (n, m, l) = (sys.n(), sys.m(), sys.l());
    let mut cn = Mat::zeros(n * l, n);
    let mut markov = Vec::with_capacity(n);
    let mut c_ak = sys.c.clone();
    for i in 0..n {
        cn.view_mut((i * l, 0), (l, n)).copy_from(&c_ak);
        // Markov parameter C A^i B, used on the (i+1)-th subdiagonal.
        markov.push(&c_ak * &sys.b);
        c_ak *= &sys.a;
    }
    let mut dn = Mat::zeros(n * l, n * m);
    for i in 0..n {
        for j in 0..=i {
            let block = if i == j { &sys.d } else { &markov[i - j - 1] };
            dn.view_mut((i * l, j * m), (l, m)).copy_from(block);
        }
    }
    let mut in_selector = Mat::zeros(m, n * m);
    if n > 0 {
        in_selector.view_mut((0, 0), (m, m)).fill_with_identity();
    }
    BlockMatrices {
        cn,
        dn,
        in_selector,
    }
}

/// Simulate from `x0` over the samples of `u`. The state trace has one more
/// sample than `u` (the final state); outputs are aligned with `u`.
pub fn simulate(
    sys: &StateSpace,
    x0: &Vector,
    u: &SignalTrace,
) -> Result<(SignalTrace, SignalTrace)> {
    if x0.len() != sys.n() {
        return Err(Error::dim(format!(
            "x0 has dimension {}, expected {}",
            x0.len(),
            sys.n()
        )));
    }
    if u.dim() != sys.m() {
        return Err(Error::dim(format!(
            "input dimension {} but system has {} inputs",
            u.dim(),
            sys.m()
        )));
    }
    let mut x = x0.clone();
    let mut states = Vec::with_capacity(u.len() + 1);
    let mut outputs = Vec::with_capacity(u.len());
    for uk in u.samples() {
        outputs.push(&sys.c * &x + &sys.d * uk);
        let next = &sys.a * &x + &sys.b * uk;
        states.push(std::mem::replace(&mut x, next));
    }
    states.push(x);
    Ok((
        SignalTrace::new(u.start(), sys.n(), states)?,
        SignalTrace::new(u.start(), sys.l(), outputs)?,
    ))
}

/// Grid angles `2 pi k / N`. Refining `N` by an integer factor keeps every
/// previous angle.
pub fn unit_circle_grid(grid_points: usize) -> impl Iterator<Item = Complex64> {
    let n = grid_points.max(1);
    (0..n)
        .map(move |k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64))
}

/// Maximum of `f(e^{i theta})` over the uniform unit-circle grid.
pub fn grid_max(grid_points: usize, f: impl Fn(Complex64) -> f64) -> f64 {
    unit_circle_grid(grid_points).map(f).fold(0.0, f64::max)
}

fn check_poles_off_circle(a: &Mat, uc_tol: f64) -> Result<()> {
    for p in linalg::eigenvalues(a) {
        if (p.norm() - 1.0).abs() <= uc_tol {
            return Err(Error::PoleOnUnitCircle(p));
        }
    }
    Ok(())
}

/// Grid estimate of the H-infinity norm. This is a lower bound of the true
/// norm that tightens as `grid_points` grows.
pub fn hinf_norm_grid(sys: &StateSpace, grid_points: usize, uc_tol: f64) -> Result<f64> {
    check_poles_off_circle(&sys.a, uc_tol)?;
    Ok(grid_max(grid_points, |z| {
        linalg::sigma_max_c(&sys.freq_response(z))
    }))
}

/// Grid norm of the state path `(zI - A)^{-1} B`.
pub fn state_path_norm(a: &Mat, b: &Mat, grid_points: usize, uc_tol: f64) -> Result<f64> {
    check_poles_off_circle(a, uc_tol)?;
    Ok(grid_max(grid_points, |z| {
        linalg::sigma_max_c(&resolvent_times(a, b, z))
    }))
}

/// Block-diagonal concatenation.
pub fn block_diag(a: &Mat, b: &Mat) -> Mat {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut(a.shape(), b.shape()).copy_from(b);
    out
}
