//! Shared fixtures for unit tests: the benchmark systems exercised across
//! modules and seeded random system generators.

use nalgebra::DMatrix;
use rand::prelude::*;

use crate::systems::{DescriptorSystem, HigherOrderSystem};

/// 3-state descriptor benchmark with singular E and one input.
pub fn benchmark_3state() -> DescriptorSystem {
    let e = DMatrix::from_row_slice(3, 3, &[1.8, 0.0, 0.0, 0.0, 0.34, 0.0, 0.0, 0.0, 0.0]);
    let a = DMatrix::from_row_slice(
        3,
        3,
        &[2.0, -0.91, -0.088, 0.19, 0.25, 0.51, 0.64, 0.31, -0.59],
    );
    let b = DMatrix::from_row_slice(3, 1, &[-0.63, 0.53, -0.58]);
    DescriptorSystem::new(e, a, b).unwrap()
}

/// Parametric 3-state family whose `[E B]` rank hinges on `delta`.
pub fn param_family(delta: f64) -> DescriptorSystem {
    let e = DMatrix::from_row_slice(3, 3, &[0.0, 2.1, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let a = DMatrix::from_row_slice(3, 3, &[1.0, 3.0, 0.0, 2.0, 1.0, 1.0, 3.0, 1.0, 5.0]);
    let b = DMatrix::from_row_slice(3, 1, &[1.0, 0.0, delta]);
    DescriptorSystem::new(e, a, b).unwrap()
}

/// RLC circuit in descriptor form; states are the capacitor voltages and
/// the branch currents.
pub fn circuit_system(c1: f64, c2: f64, l: f64, r: f64) -> DescriptorSystem {
    let e = DMatrix::from_row_slice(
        4,
        4,
        &[
            c1, 0.0, 0.0, 0.0, //
            0.0, c2, 0.0, 0.0, //
            0.0, 0.0, -l, 0.0, //
            0.0, 0.0, 0.0, 0.0,
        ],
    );
    let a = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, 0.0, 0.0, 1.0, //
            0.0, 0.0, 1.0, 0.0, //
            -1.0, 1.0, 0.0, 0.0, //
            1.0, 0.0, 0.0, r,
        ],
    );
    let b = DMatrix::from_row_slice(4, 1, &[0.0, 0.0, 0.0, -1.0]);
    DescriptorSystem::new(e, a, b).unwrap()
}

/// Stiffness matrix of the drum-brake model at friction coefficient `mu`
/// (disc mass 5, stiffness scale 1, contact angle pi/100).
pub fn brake_stiffness(mu: f64) -> DMatrix<f64> {
    let k = 1.0;
    let gamma = std::f64::consts::PI / 100.0;
    let (sg, cg) = (gamma.sin(), gamma.cos());
    k * DMatrix::from_row_slice(
        2,
        2,
        &[
            (sg + mu * cg) * sg,
            -mu - (sg + mu * cg) * cg,
            (mu * sg - cg) * sg,
            1.0 + (mu * sg + cg) * cg,
        ],
    )
}

/// Second-order drum-brake model `M x'' + K(mu) x = b u`.
pub fn brake_system(mu: f64) -> HigherOrderSystem {
    let m = DMatrix::from_row_slice(2, 2, &[5.0, 0.0, 0.0, 5.0]);
    let p1 = DMatrix::zeros(2, 2);
    let k = brake_stiffness(mu);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    HigherOrderSystem::new(vec![m, p1, k], b).unwrap()
}

/// Random descriptor system with entries in (-1, 1); with `degenerate` the
/// last row of E is zeroed so the pencil has eigenvalues at infinity.
pub fn random_descriptor(
    rng: &mut impl Rng,
    n: usize,
    m: usize,
    degenerate: bool,
) -> DescriptorSystem {
    let mut e = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    if degenerate {
        for j in 0..n {
            e[(n - 1, j)] = 0.0;
        }
    }
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let b = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
    DescriptorSystem::new(e, a, b).unwrap()
}

/// Random order-`d` model with entries in (-1, 1).
pub fn random_higher_order(
    rng: &mut impl Rng,
    d: usize,
    state_dim: usize,
    input_dim: usize,
) -> HigherOrderSystem {
    let coeffs = (0..=d)
        .map(|_| DMatrix::from_fn(state_dim, state_dim, |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    let b = DMatrix::from_fn(state_dim, input_dim, |_, _| rng.random_range(-1.0..1.0));
    HigherOrderSystem::new(coeffs, b).unwrap()
}
