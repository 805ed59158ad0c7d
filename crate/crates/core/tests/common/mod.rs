//! Random instance generators shared by the integration tests.
#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uslice::{DiscreteMeasure, Measure1D};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` atoms uniform in `[0, 1]^d` with weights uniform in `[lo, hi]`.
pub fn cloud(rng: &mut ChaCha8Rng, n: usize, d: usize, lo: f64, hi: f64) -> DiscreteMeasure {
    let pts = Array2::from_shape_fn((n, d), |_| rng.random::<f64>());
    let w = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
    DiscreteMeasure::new(pts, w).unwrap()
}

pub fn scale_to_mass(m: &DiscreteMeasure, mass: f64) -> DiscreteMeasure {
    let s = mass / m.mass();
    m.reweight(&vec![s; m.len()]).unwrap()
}

/// Sorted random 1D measure.
pub fn line(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Measure1D {
    let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    x.sort_by(f64::total_cmp);
    let w = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
    Measure1D::new(x, w).unwrap()
}

/// Rescales `nu` so that its mass equals that of `mu`.
pub fn match_mass(mu: &Measure1D, nu: &Measure1D) -> Measure1D {
    let s = mu.mass() / nu.mass();
    Measure1D::new(nu.positions().to_vec(), nu.weights().iter().map(|w| w * s).collect()).unwrap()
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-12)
}

/// Two-dimensional Gaussian cluster of `n` atoms with weight `w` each, plus
/// an optional far outlier of weight `w_out` at `(1, 1)`.
pub fn outlier_toy(seed: u64) -> (DiscreteMeasure, DiscreteMeasure) {
    use rand_distr::{Distribution, Normal};
    let mut r = rng(seed);
    let normal = Normal::new(0.0, 0.1).unwrap();
    let mut a_rows = Vec::new();
    for _ in 0..19 {
        a_rows.push(vec![normal.sample(&mut r), normal.sample(&mut r)]);
    }
    // the cluster scale is 0.1; the outlier sits at distance ~10 times that
    a_rows.push(vec![1.0, 1.0]);
    let mut b_rows = Vec::new();
    for _ in 0..20 {
        b_rows.push(vec![normal.sample(&mut r) + 0.3, normal.sample(&mut r) + 0.2]);
    }
    (
        DiscreteMeasure::from_rows(&a_rows, vec![0.05; 20]).unwrap(),
        DiscreteMeasure::from_rows(&b_rows, vec![0.05; 20]).unwrap(),
    )
}
