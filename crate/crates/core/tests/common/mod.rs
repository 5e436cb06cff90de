#![allow(dead_code)]

use ddmec_core::datagen::{collect_experiments, seeded_stream, Dataset, SampleDist};
use ddmec_core::ddctrl::HorizonPlan;
use ddmec_core::lti::{controllability_matrix, ControlProblem, LtiSystem};
use ddmec_core::{Matrix, Vector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub struct Instance {
    pub sys: LtiSystem,
    pub ds: Dataset,
    pub plan: HorizonPlan,
    pub prob: ControlProblem,
}

pub fn gaussian_vector(len: usize, rng: &mut ChaCha8Rng) -> Vector {
    Vector::from_iterator(len, (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_iterator(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)),
    )
}

/// Random system, 1..=3 sets with horizons 1..=4 and `N_i = m T_i + n + extra`,
/// a random plan of 1..=4 segments and a reachable problem.
pub fn random_instance(seed: u64, max_n: usize, extra: usize) -> Instance {
    let mut rng = seeded_stream(seed, &[0xc0ffee]);
    let n = rng.random_range(1..=max_n);
    let m = rng.random_range(1..=3);
    let sys = LtiSystem::random(n, m, &mut rng).unwrap();
    let sets = rng.random_range(1..=3);
    let horizons: Vec<usize> = (0..sets).map(|_| rng.random_range(1..=4)).collect();
    let counts: Vec<usize> = horizons.iter().map(|&t| m * t + n + extra).collect();
    let ds = collect_experiments(&sys, &horizons, &counts, seed, SampleDist::Normal).unwrap();
    let len = rng.random_range(1..=4);
    let indices: Vec<usize> = (0..len).map(|_| rng.random_range(0..sets)).collect();
    let plan = HorizonPlan::for_dataset(indices, &ds).unwrap();
    let prob = reachable_problem(&sys, plan.total_horizon(), &mut rng);
    Instance { sys, ds, plan, prob }
}

/// `x0` standard normal, `xf = A^T x0 + C_T w` for standard normal `w`.
pub fn reachable_problem(sys: &LtiSystem, horizon: usize, rng: &mut ChaCha8Rng) -> ControlProblem {
    let x0 = gaussian_vector(sys.n(), rng);
    let w = gaussian_vector(sys.m() * horizon, rng);
    let xf = sys.transition(horizon) * &x0 + controllability_matrix(sys, horizon) * w;
    ControlProblem::new(x0, xf, horizon).unwrap()
}

pub fn rel_gap(a: &Vector, b: &Vector) -> f64 {
    (a - b).norm() / (1.0 + b.norm())
}
