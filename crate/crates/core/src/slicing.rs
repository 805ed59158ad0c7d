//! Random directions on the unit sphere and projections onto the line.
//!
//! Directions are `g/‖g‖` with `g` a vector of i.i.d. standard normals drawn
//! from a `ChaCha8Rng` seeded with `seed_from_u64(seed)`. The draw is
//! sequential, so `(d, K, seed)` determines the set bit-for-bit.

use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measures::{argsort, DiscreteMeasure, Measure1D};

/// `K` unit directions `θ_k` defining the empirical slicing measure `(1/K) Σ δ_{θ_k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSet {
    directions: Array2<f64>,
    seed: u64,
}

impl ProjectionSet {
    /// Wraps caller-supplied directions; every row must have unit norm.
    pub fn from_directions(directions: Array2<f64>, seed: u64) -> Result<Self> {
        if directions.ncols() == 0 {
            return Err(Error::InvalidParameter("directions have dimension 0".into()));
        }
        for (k, row) in directions.rows().into_iter().enumerate() {
            let norm = row.dot(&row).sqrt();
            if norm.is_nan() || (norm - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("direction {k} has norm {norm}")));
            }
        }
        Ok(Self { directions, seed })
    }

    pub fn len(&self) -> usize {
        self.directions.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.directions.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn direction(&self, k: usize) -> ArrayView1<'_, f64> {
        self.directions.row(k)
    }

    pub fn directions(&self) -> &Array2<f64> {
        &self.directions
    }
}

/// Draws `k` directions uniformly on `S^{d−1}`.
pub fn sample_directions(d: usize, k: usize, seed: u64) -> Result<ProjectionSet> {
    if d == 0 || k == 0 {
        return Err(Error::InvalidParameter(format!("need d >= 1 and K >= 1, got d={d}, K={k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut directions = Array2::zeros((k, d));
    let mut g = vec![0.0; d];
    for mut row in directions.rows_mut() {
        let norm = loop {
            for x in g.iter_mut() {
                *x = rng.sample(StandardNormal);
            }
            let n = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-300 {
                break n;
            }
        };
        for (dst, x) in row.iter_mut().zip(&g) {
            *dst = x / norm;
        }
    }
    Ok(ProjectionSet { directions, seed })
}

/// A projected measure in ascending order, with `perm[k]` the original atom
/// index sitting at sorted position `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedProjection {
    pub measure: Measure1D,
    pub perm: Vec<usize>,
}

impl SortedProjection {
    /// Sorted positions of the projected atoms.
    pub fn positions(&self) -> &[f64] {
        self.measure.positions()
    }

    /// Reads original-order weights into sorted order.
    pub fn gather(&self, original: &[f64], out: &mut [f64]) {
        for (dst, &i) in out.iter_mut().zip(&self.perm) {
            *dst = original[i];
        }
    }

    /// Writes sorted-order values back to original atom indices.
    pub fn scatter(&self, sorted: &[f64], out: &mut [f64]) {
        for (&v, &i) in sorted.iter().zip(&self.perm) {
            out[i] = v;
        }
    }
}

/// Push-forward `θ*_♯ m` with `θ*(x) = ⟨θ, x⟩`, sorted ascending (stable).
pub fn project(m: &DiscreteMeasure, theta: ArrayView1<'_, f64>) -> Result<SortedProjection> {
    if theta.len() != m.dim() {
        return Err(Error::DimensionMismatch { expected: m.dim(), found: theta.len() });
    }
    let raw = m.points().dot(&theta).to_vec();
    let perm = argsort(&raw);
    let positions = perm.iter().map(|&i| raw[i]).collect();
    let weights = perm.iter().map(|&i| m.weights()[i]).collect();
    Ok(SortedProjection { measure: Measure1D::from_sorted_unchecked(positions, weights), perm })
}

/// The two projected supports of one slice.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedPair {
    pub alpha: SortedProjection,
    pub beta: SortedProjection,
}

/// Projects both measures on every direction, in parallel across slices.
pub fn project_pair(
    alpha: &DiscreteMeasure,
    beta: &DiscreteMeasure,
    dirs: &ProjectionSet,
) -> Result<Vec<ProjectedPair>> {
    if dirs.is_empty() {
        return Err(Error::EmptyProjectionSet);
    }
    if alpha.dim() != beta.dim() {
        return Err(Error::DimensionMismatch { expected: alpha.dim(), found: beta.dim() });
    }
    (0..dirs.len())
        .into_par_iter()
        .map(|k| {
            let theta = dirs.direction(k);
            Ok(ProjectedPair { alpha: project(alpha, theta)?, beta: project(beta, theta)? })
        })
        .collect()
}
