//! Reference plants used by the demos and the regression tests.

use nalgebra::dmatrix;

use crate::linalg::Mat;
use crate::poly::{tf_to_ss, Poly};
use crate::system::StateSpace;

/// `(z - 1.5)(z - 0.5) / z^2` in controllable canonical form.
pub fn case1() -> StateSpace {
    tf_to_ss(&case1_numerator(), &Poly::new(vec![1.0, 0.0, 0.0])).expect("fixed fixture")
}

pub fn case1_numerator() -> Poly {
    Poly::new(vec![1.0, -2.0, 0.75])
}

/// Four-state, two-input MIMO plant with zeros near 0.6072 and 1.9928.
pub fn case3() -> StateSpace {
    StateSpace::new(
        dmatrix![
            0.6, -0.3, 0.0, 0.0;
            0.1, 1.0, 0.0, 0.0;
            -0.4, -1.5, 0.4, -0.3;
            0.3, 1.1, 0.2, 0.9
        ],
        dmatrix![0.0, 0.4; 0.0, 0.0; 0.0, -0.1; 0.1, 0.1],
        dmatrix![1.0, 2.0, 3.0, 4.0; 2.0, 1.0, 5.0, 6.0],
        Mat::zeros(2, 2),
    )
    .expect("fixed fixture")
}

/// Reference observer matrix for [`case3`], four decimals.
pub fn case3_reference_m() -> Mat {
    dmatrix![
        0.0488, 0.9650, 0.2063, -0.1547;
        0.2523, 0.0953, 0.6205, 0.7364;
        0.2013, 0.3012, 0.5700, 0.7375
    ]
}

/// Reference similarity transform for [`case3`], four decimals.
pub fn case3_reference_t1() -> Mat {
    dmatrix![
        -0.0488, -0.9650, -0.2063, 0.1547;
        0.2483, -0.0190, 0.6003, 0.7600;
        -0.4645, 0.2474, -0.5833, 0.6187;
        -0.8487, -0.0855, 0.5067, -0.1252
    ]
}

/// Reference zero-dynamics input matrix for [`case3`], four decimals.
pub fn case3_reference_bz() -> Mat {
    dmatrix![-0.2463, -2.0822, 2.4171, 5.3035, -0.0678, -2.3507]
}

/// `(z + 1)(z + 3)(z + 0.5)(z - 0.5) / (z^2 (z^2 - z + 0.5))`.
pub fn case4() -> StateSpace {
    tf_to_ss(&case4_numerator(), &case4_denominator()).expect("fixed fixture")
}

pub fn case4_numerator() -> Poly {
    Poly::new(vec![1.0, 1.0])
        .mul(&Poly::new(vec![1.0, 3.0]))
        .mul(&Poly::new(vec![1.0, 0.0, -0.25]))
}

pub fn case4_denominator() -> Poly {
    Poly::new(vec![1.0, 0.0, 0.0]).mul(&Poly::new(vec![1.0, -1.0, 0.5]))
}

/// Sampling period used to evaluate the smooth reference `t^2 sin(5 pi t)`.
/// The expression vanishes identically at integer `t`, so it is read as a
/// function of continuous time sampled every millisecond.
pub const SMOOTH_REFERENCE_PERIOD: f64 = 1e-3;

pub fn smooth_reference(k: i64) -> f64 {
    smooth_reference_sampled(k, SMOOTH_REFERENCE_PERIOD)
}

pub fn smooth_reference_sampled(k: i64, period: f64) -> f64 {
    let t = k as f64 * period;
    t * t * (5.0 * std::f64::consts::PI * t).sin()
}
