#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uiotrack::linalg::{self, Mat};
use uiotrack::system::StateSpace;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

/// A random plant together with its zeros computed by a closed-form route
/// that does not touch the library's zero solver.
pub struct Plant {
    pub sys: StateSpace,
    /// Finite zeros padded with origin zeros to `n` entries.
    pub padded_zeros: Vec<Complex64>,
}

/// Two families keep the oracle elementary:
/// * `D` invertible: zeros are `eig(A - B D^-1 C)`, no padding.
/// * `D = 0`, `CB` invertible: `eig((I - B (CB)^-1 C) A)` is the zero set
///   plus `m` origin zeros, which is exactly the padded spectrum.
pub fn oracle_zeros(sys: &StateSpace) -> Option<Vec<Complex64>> {
    let n = sys.n();
    if sys.d.norm() > 0.0 {
        let dinv = sys.d.clone().try_inverse()?;
        Some(linalg::eigenvalues(&(&sys.a - &sys.b * dinv * &sys.c)))
    } else {
        let cb = &sys.c * &sys.b;
        let cbinv = cb.try_inverse()?;
        let proj = Mat::identity(n, n) - &sys.b * cbinv * &sys.c;
        Some(linalg::eigenvalues(&(proj * &sys.a)))
    }
}

pub struct Filter {
    pub max_zero_modulus: f64,
    pub uc_band: f64,
    pub require_nmp: bool,
    /// Minimum spacing between minimum-phase zeros, so they are simple.
    pub mp_separation: f64,
}

impl Default for Filter {
    fn default() -> Self {
        Self {
            max_zero_modulus: 5.0,
            uc_band: 0.05,
            require_nmp: false,
            mp_separation: 1e-3,
        }
    }
}

/// Stable random square plant (`rho(A) = 0.9`) with order in `2..=max_n`.
pub fn random_plant(rng: &mut ChaCha8Rng, max_n: usize, filter: &Filter) -> Plant {
    loop {
        let n = rng.gen_range(2..=max_n);
        let m = rng.gen_range(1..=2.min(n));
        let mut a = random_matrix(rng, n, n);
        let rho = linalg::spectral_radius(&a);
        if rho < 1e-3 {
            continue;
        }
        a *= 0.9 / rho;
        let b = random_matrix(rng, n, m);
        let c = random_matrix(rng, m, n);
        let d = if rng.gen_bool(0.5) {
            random_matrix(rng, m, m)
        } else {
            Mat::zeros(m, m)
        };
        let sys = StateSpace::new(a, b, c, d).unwrap();
        if sys.check_minimal(1e-8).is_err() {
            continue;
        }
        let Some(z) = oracle_zeros(&sys) else {
            continue;
        };
        if z.iter()
            .any(|z| z.norm() > filter.max_zero_modulus || (z.norm() - 1.0).abs() < filter.uc_band)
        {
            continue;
        }
        // Origin zeros from the D = 0 family are padding, not synthesis targets.
        let padding = if sys.d.norm() > 0.0 { 0 } else { m };
        let mut by_modulus = z.clone();
        by_modulus.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        let mp: Vec<_> = by_modulus[padding..]
            .iter()
            .filter(|z| z.norm() < 1.0)
            .collect();
        let simple = mp.iter().enumerate().all(|(i, a)| {
            mp[i + 1..]
                .iter()
                .all(|b| (*a - *b).norm() > filter.mp_separation)
        });
        if !simple {
            continue;
        }
        let nmp = z.iter().filter(|z| z.norm() > 1.0).count();
        if filter.require_nmp && (nmp == 0 || nmp == n) {
            continue;
        }
        return Plant {
            sys,
            padded_zeros: z,
        };
    }
}

/// Uniform input scaled to unit l2 energy.
pub fn unit_energy_input(
    rng: &mut ChaCha8Rng,
    m: usize,
    len: usize,
) -> uiotrack::system::SignalTrace {
    let raw: Vec<_> = (0..len)
        .map(|_| uiotrack::linalg::Vector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0)))
        .collect();
    let energy: f64 = raw.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt();
    let scaled = raw.into_iter().map(|v| v / energy).collect();
    uiotrack::system::SignalTrace::new(0, m, scaled).unwrap()
}
