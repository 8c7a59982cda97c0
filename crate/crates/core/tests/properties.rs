mod common;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

use common::{random_matrix, random_plant, rng, Filter};
use uiotrack::config::{ExperimentConfig, InputSpec, Mode, SystemSource};
use uiotrack::linalg::{self, Mat, Vector};
use uiotrack::partition::{partition_states, zero_dynamics, PathPreference};
use uiotrack::poly::{tf_to_ss, Poly};
use uiotrack::system::{hinf_norm_grid, simulate, SignalTrace};
use uiotrack::uio::{gamma_matrix, synthesize_uio, verify_uio_conditions, SynthesisOptions};
use uiotrack::zeros::transmission_zeros;

fn random_trace(r: &mut rand_chacha::ChaCha8Rng, dim: usize, len: usize) -> SignalTrace {
    SignalTrace::from_fn(0, dim, len, |_| {
        Vector::from_fn(dim, |_, _| r.gen_range(-1.0..1.0))
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn simulate_is_linear(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_plant(&mut r, 5, &Filter::default());
        let (n, m) = (p.sys.n(), p.sys.m());
        let x0 = Vector::from_fn(n, |_, _| r.gen_range(-1.0..1.0));
        let u1 = random_trace(&mut r, m, 40);
        let u2 = random_trace(&mut r, m, 40);
        let sum = SignalTrace::new(0, m, u1.samples().iter().zip(u2.samples()).map(|(a, b)| a + b).collect()).unwrap();
        let (_, y12) = simulate(&p.sys, &x0, &sum).unwrap();
        let (_, y1) = simulate(&p.sys, &x0, &u1).unwrap();
        let (_, y2) = simulate(&p.sys, &Vector::zeros(n), &u2).unwrap();
        for ((a, b), c) in y12.samples().iter().zip(y1.samples()).zip(y2.samples()) {
            prop_assert!((a - b - c).norm() <= 1e-10 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn siso_zeros_are_numerator_roots(seed in any::<u64>()) {
        let mut r = rng(seed);
        let separated = |roots: &[Complex64], z: Complex64| roots.iter().all(|w| (w - z).norm() > 0.1);
        let mut zeros: Vec<Complex64> = Vec::new();
        let target = r.gen_range(1..=4usize);
        while zeros.len() < target {
            let re = r.gen_range(-3.0..3.0);
            let z = if target - zeros.len() >= 2 && r.gen_bool(0.3) {
                Complex64::new(re, r.gen_range(0.2..2.0))
            } else {
                Complex64::new(re, 0.0)
            };
            if (z.norm() - 1.0).abs() < 0.05 || !separated(&zeros, z) || !separated(&zeros, z.conj()) {
                continue;
            }
            zeros.push(z);
            if z.im != 0.0 {
                zeros.push(z.conj());
            }
        }
        let den_degree = zeros.len() + r.gen_range(0..=1usize);
        let mut poles: Vec<Complex64> = Vec::new();
        while poles.len() < den_degree {
            let p = Complex64::new(r.gen_range(-0.9..0.9), 0.0);
            if separated(&zeros, p) && separated(&poles, p) {
                poles.push(p);
            }
        }
        let gain = r.gen_range(0.5..2.0);
        let sys = tf_to_ss(&Poly::from_roots(&zeros).scale(gain), &Poly::from_roots(&poles)).unwrap();
        let zc = transmission_zeros(&sys, 1e-6).unwrap();
        let mut found = zc.mp_zeros.clone();
        found.extend(&zc.nmp_zeros);
        prop_assert_eq!(found.len(), zeros.len());
        prop_assert!(linalg::multiset_distance(&found, &zeros) <= 1e-8);
    }

    #[test]
    fn hinf_grid_refinement_is_monotone(seed in any::<u64>(), base in 8usize..200, factor in 2usize..5) {
        let mut r = rng(seed);
        let p = random_plant(&mut r, 4, &Filter::default());
        let coarse = hinf_norm_grid(&p.sys, base, 1e-6).unwrap();
        let fine = hinf_norm_grid(&p.sys, base * factor, 1e-6).unwrap();
        prop_assert!(fine >= coarse * (1.0 - 1e-12));
    }

    #[test]
    fn gamma_spectrum_is_padded_zero_set(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_plant(&mut r, 6, &Filter::default());
        let g = gamma_matrix(&p.sys, 1e-10).unwrap();
        let d = linalg::multiset_distance(&linalg::eigenvalues(&g), &p.padded_zeros);
        prop_assert!(d <= 1e-6, "distance {d}");
    }

    #[test]
    fn synthesized_gains_meet_observer_conditions(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_plant(&mut r, 6, &Filter { require_nmp: true, ..Filter::default() });
        let zc = transmission_zeros(&p.sys, 1e-6).unwrap();
        let g = synthesize_uio(&p.sys, &zc, &SynthesisOptions::default()).unwrap();
        prop_assert_eq!(linalg::rank(&g.m, 1e-10), p.sys.n() - zc.nmp_count());
        let res = verify_uio_conditions(&g, &p.sys);
        prop_assert!(res.spectral_radius < 1.0);
        prop_assert!(res.sylvester <= 1e-8 && res.decoupling <= 1e-8, "{res:?}");

        // Rescaling one row of M together with the matching rows of A_hat and
        // F is still a solution.
        let mut scaled = g.clone();
        let i = r.gen_range(0..g.q);
        let s = r.gen_range(0.5..3.0);
        scaled.m.row_mut(i).scale_mut(s);
        scaled.f.row_mut(i).scale_mut(s);
        scaled.a_hat.row_mut(i).scale_mut(s);
        scaled.a_hat.column_mut(i).scale_mut(1.0 / s);
        let res2 = verify_uio_conditions(&scaled, &p.sys);
        prop_assert!(res2.sylvester <= 1e-8 * s && res2.decoupling <= 1e-8 * s);
    }

    #[test]
    fn partition_preserves_transfer_function(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_plant(&mut r, 6, &Filter { require_nmp: true, ..Filter::default() });
        let zc = transmission_zeros(&p.sys, 1e-6).unwrap();
        let g = synthesize_uio(&p.sys, &zc, &SynthesisOptions::default()).unwrap();
        let pr = partition_states(&g, &p.sys, 1e-10).unwrap();
        let t = pr.transformed();
        for _ in 0..64 {
            let z = Complex64::from_polar(r.gen_range(0.5..2.0), r.gen_range(0.0..std::f64::consts::TAU));
            let d = (p.sys.freq_response(z) - t.freq_response(z)).norm();
            prop_assert!(d <= 1e-9 * (1.0 + p.sys.freq_response(z).norm()));
        }
        // [C2 D; A12 B1] has dependent columns.
        let stacked = linalg::vstack(&[&linalg::hstack(&[&pr.c2, &pr.d]), &linalg::hstack(&[&pr.a12, &pr.b1])]);
        let sv = linalg::singular_values(&stacked);
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(sv.len() < stacked.ncols() || smin <= 1e-8 * sv[0]);
        // When both eliminations are available they agree.
        let m = p.sys.m();
        if linalg::rank(&pr.b1, 1e-10) == m && linalg::rank(&pr.d, 1e-10) == m {
            let b1 = zero_dynamics(&pr, 1e-10, PathPreference::B1First).unwrap();
            let dd = zero_dynamics(&pr, 1e-10, PathPreference::DFirst).unwrap();
            let lhs = &b1.elim_pinv * &pr.a12;
            let rhs = &dd.elim_pinv * &pr.c2;
            prop_assert!((&lhs - &rhs).norm() <= 1e-8 * (1.0 + lhs.norm()));
        }
    }

    #[test]
    fn config_round_trip(seed in any::<u64>(), nd in 1usize..40, steps in 1usize..5000, policy in 0u8..2) {
        let mut r = rng(seed);
        let p = random_plant(&mut r, 4, &Filter::default());
        let mut cfg = ExperimentConfig::new(SystemSource::Matrices(p.sys), Mode::Reconstruct);
        cfg.n_d = nd;
        cfg.steps = steps;
        cfg.seed = Some(seed);
        cfg.input = InputSpec::RandomSeeded;
        cfg.init_policy = if policy == 0 { uiotrack::estimator::InitPolicy::Zero } else { uiotrack::estimator::InitPolicy::WarmStart };
        cfg.tolerances.uc_tol = r.gen_range(1e-9..1e-3);
        cfg.controller = Some((Poly::new(vec![1.0, r.gen_range(-1.0..1.0)]), Poly::new(vec![2.0, 0.0])));
        let once = ExperimentConfig::parse(&cfg.serialize()).unwrap();
        prop_assert_eq!(&once, &cfg);
        prop_assert_eq!(ExperimentConfig::parse(&once.serialize()).unwrap(), once);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn pinv_satisfies_penrose_conditions(seed in any::<u64>(), rows in 1usize..7, cols in 1usize..7, rank in 0usize..7) {
        let mut r = rng(seed);
        let k = rank.min(rows).min(cols);
        let m: Mat = if k == 0 { DMatrix::zeros(rows, cols) } else { random_matrix(&mut r, rows, k) * random_matrix(&mut r, k, cols) };
        let x = linalg::pinv(&m, 1e-10);
        let (nm, nx) = (m.norm(), x.norm());
        let tol = |scale: f64| 1e-10 * (1.0 + scale);
        prop_assert!((&m * &x * &m - &m).norm() <= tol(nm * nm * nx));
        prop_assert!((&x * &m * &x - &x).norm() <= tol(nx * nx * nm));
        let mx = &m * &x;
        let xm = &x * &m;
        prop_assert!((mx.transpose() - &mx).norm() <= tol(nm * nx));
        prop_assert!((xm.transpose() - &xm).norm() <= tol(nm * nx));
    }
}
