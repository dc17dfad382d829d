#![allow(dead_code)]

use infotherm::measurement::MeasurementModel;
use infotherm::memory::MemoryLayout;
use infotherm::operator::{random_instance, random_simplex, RandomKind};
use infotherm::{CMatrix, DensityOperator};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random POVM with `outcomes` outcomes of `per_outcome` operators each, cut
/// from the first `dim` columns of a Haar unitary, so `Σ M†M = 1` holds by
/// construction.
pub fn random_povm(seed: u64, dim: usize, outcomes: usize, per_outcome: usize) -> MeasurementModel {
    let blocks = outcomes * per_outcome;
    let u = random_instance(seed, dim * blocks, RandomKind::Unitary);
    let ops = (0..outcomes)
        .map(|k| {
            (0..per_outcome)
                .map(|i| {
                    let row0 = (k * per_outcome + i) * dim;
                    CMatrix::from_fn(dim, dim, |r, c| u[(row0 + r, c)])
                })
                .collect()
        })
        .collect();
    MeasurementModel::new(dim, ops).expect("isometry blocks form a POVM")
}

/// Orthogonal projectors onto groups of columns of a Haar unitary.
pub fn random_projectors(seed: u64, dim: usize, groups: usize) -> Vec<CMatrix> {
    let u = random_instance(seed, dim, RandomKind::Unitary);
    (0..groups)
        .map(|g| {
            let cols: Vec<usize> = (0..dim).filter(|c| c % groups == g).collect();
            CMatrix::from_fn(dim, dim, |r, c| {
                cols.iter().map(|&j| u[(r, j)] * u[(c, j)].conj()).sum::<Complex64>()
            })
        })
        .collect()
}

pub fn diagonal_state(p: &[f64]) -> DensityOperator {
    DensityOperator::from_diagonal(p).expect("valid distribution")
}

/// A permutation coupling on `S ⊗ M ⊗ B` with dimensions up to 4 each, a
/// diagonal system state, and a diagonal memory+bath state with some zero
/// weights.
pub struct PermutationInstance {
    pub u: CMatrix,
    pub rho_s: DensityOperator,
    pub rho_mb: DensityOperator,
    pub layout: MemoryLayout,
    pub bath_dim: usize,
}

pub fn random_permutation_instance(seed: u64) -> PermutationInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d_s = rng.random_range(1..=4);
    let d_m = rng.random_range(2..=4);
    let d_b = rng.random_range(1..=4);
    let outcomes = rng.random_range(2..=d_m);
    let mut branches = vec![Vec::new(); outcomes];
    for m in 0..d_m {
        branches[m % outcomes].push(rng.random_range(0.0..2.0));
    }
    let layout = MemoryLayout::new(branches).expect("nonempty branches");
    let q = random_simplex(&mut rng, d_s);
    let mut r = random_simplex(&mut rng, d_m * d_b);
    for x in r.iter_mut() {
        if rng.random_bool(0.2) {
            *x = 0.0;
        }
    }
    if r.iter().all(|&x| x == 0.0) {
        r[0] = 1.0;
    }
    let total: f64 = r.iter().sum();
    r.iter_mut().for_each(|x| *x /= total);
    PermutationInstance {
        u: random_instance(rng.random(), d_s * d_m * d_b, RandomKind::Permutation),
        rho_s: diagonal_state(&q),
        rho_mb: diagonal_state(&r),
        layout,
        bath_dim: d_b,
    }
}
