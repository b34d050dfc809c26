//! Two-vehicle platoon benchmark.
//!
//! States are the spacing error and the two velocity errors, inputs the two
//! normalized accelerations (offset by the friction at cruise speed). The
//! continuous dynamics are Euler-discretized with step `TAU`.

use nalgebra::{DMatrix, DVector};

use crate::dataset::{self, DisturbanceSet, ExperimentData};
use crate::error::Result;
use crate::polyhedra::HPolyhedron;

/// Friction of the leading vehicle.
pub const GAMMA1: f64 = 0.005;
/// Friction of the following vehicle.
pub const GAMMA2: f64 = 0.01;
/// Sampling time.
pub const TAU: f64 = 0.01;

/// Input amplitude used when generating experiment data.
pub const INPUT_AMPLITUDE: f64 = 5.0;

pub const N: usize = 3;
pub const M: usize = 2;

pub fn continuous_a() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        3,
        3,
        &[0.0, 1.0, -1.0, 0.0, -GAMMA1, 0.0, 0.0, 0.0, -GAMMA2],
    )
}

pub fn continuous_b() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0])
}

/// `(I + TAU A_ct, TAU B_ct)`.
pub fn system() -> (DMatrix<f64>, DMatrix<f64>) {
    let a = DMatrix::identity(3, 3) + continuous_a() * TAU;
    let b = continuous_b() * TAU;
    (a, b)
}

pub fn state_matrix() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        6,
        3,
        &[
            0.9165, 0.1900, -0.1762, //
            1.4250, 0.0661, -0.0769, //
            -0.0322, 0.1925, 0.2165, //
            -0.9165, -0.1900, 0.1762, //
            -1.4250, -0.0661, 0.0769, //
            0.0322, -0.1925, -0.2165,
        ],
    )
}

/// `{x : S x <= 1}`.
pub fn state_set() -> HPolyhedron {
    HPolyhedron::unit_rhs(state_matrix()).expect("constant data")
}

/// Box disturbance rows `±e_i`.
pub fn disturbance_matrix() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        6,
        3,
        &[
            1.0, 0.0, 0.0, //
            -1.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, //
            0.0, -1.0, 0.0, //
            0.0, 0.0, 1.0, //
            0.0, 0.0, -1.0,
        ],
    )
}

pub fn disturbance_set(delta: f64) -> Result<DisturbanceSet> {
    DisturbanceSet::new(disturbance_matrix(), delta)
}

/// One open-loop experiment from the origin: inputs uniform on
/// `[-5, 5]`, disturbances uniform on `[-delta, delta]`, both from `seed`.
pub fn generate_data(t: usize, delta: f64, seed: u64) -> Result<ExperimentData> {
    let (a, b) = system();
    let u = dataset::random_inputs(M, t, -INPUT_AMPLITUDE, INPUT_AMPLITUDE, seed)?;
    let d = dataset::random_box_disturbances(N, delta, t, seed)?;
    dataset::simulate_experiment(&a, &b, &DVector::zeros(N), &u, &d)
}
