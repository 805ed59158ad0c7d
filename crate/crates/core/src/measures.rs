//! Discrete positive measures on R^d and on the real line.
//!
//! Weights are stored in the linear domain. Zero-weight atoms are kept so
//! that potential vectors stay index-aligned with the inputs.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// A weighted point cloud `Σ_i w_i δ_{x_i}` in R^d.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    points: Array2<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Builds a measure from an `n × d` point array and `n` weights.
    ///
    /// Rejects empty supports, non-finite coordinates, negative or
    /// non-finite weights and measures whose weights are all zero.
    pub fn new(points: Array2<f64>, weights: Vec<f64>) -> Result<Self> {
        let m = Self::new_allow_zero_mass(points, weights)?;
        if !m.weights.iter().any(|&w| w > 0.0) {
            return Err(Error::InvalidMeasure("all weights are zero".into()));
        }
        Ok(m)
    }

    fn new_allow_zero_mass(points: Array2<f64>, weights: Vec<f64>) -> Result<Self> {
        let (n, d) = points.dim();
        if n == 0 {
            return Err(Error::InvalidMeasure("empty support".into()));
        }
        if d == 0 {
            return Err(Error::InvalidMeasure("points have dimension 0".into()));
        }
        if weights.len() != n {
            return Err(Error::ShapeMismatch(format!("{n} points but {} weights", weights.len())));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite coordinate".into()));
        }
        check_weights(&weights)?;
        Ok(Self { points, weights })
    }

    /// Builds a measure from row vectors.
    pub fn from_rows(rows: &[Vec<f64>], weights: Vec<f64>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::ShapeMismatch("ragged point rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let points = Array2::from_shape_vec((rows.len(), d), flat).map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        Self::new(points, weights)
    }

    /// Uniform weights `1/n` on the given points.
    pub fn uniform(points: Array2<f64>) -> Result<Self> {
        let n = points.nrows();
        Self::new(points, vec![1.0 / n.max(1) as f64; n])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.row(i)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Total mass `m(α) = Σ_i w_i`.
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Same support with weights `w_i · factors_i`. The result may have zero mass.
    pub fn reweight(&self, factors: &[f64]) -> Result<Self> {
        if factors.len() != self.len() {
            return Err(Error::ShapeMismatch(format!("{} factors for {} atoms", factors.len(), self.len())));
        }
        if let Some(bad) = factors.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::InvalidParameter(format!("reweighting factor {bad} is negative or non-finite")));
        }
        let weights = self.weights.iter().zip(factors).map(|(w, f)| w * f).collect();
        Ok(Self { points: self.points.clone(), weights })
    }

    /// Same support with the given weights; zero total mass is allowed.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new_allow_zero_mass(self.points.clone(), weights)
    }

    /// Rescales the weights so that the total mass is 1.
    pub fn normalize_to_probability(&self) -> Result<Self> {
        let m = self.mass();
        if m <= 0.0 {
            return Err(Error::ZeroMass);
        }
        let weights = self.weights.iter().map(|w| w / m).collect();
        Ok(Self { points: self.points.clone(), weights })
    }

    pub(crate) fn require_positive_mass(&self) -> Result<f64> {
        let m = self.mass();
        if m > 0.0 {
            Ok(m)
        } else {
            Err(Error::ZeroMass)
        }
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    match weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        Some(w) => Err(Error::InvalidMeasure(format!("weight {w} is negative or non-finite"))),
        None => Ok(()),
    }
}

/// A discrete measure on the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure1D {
    positions: Vec<f64>,
    weights: Vec<f64>,
    sorted: bool,
}

impl Measure1D {
    pub fn new(positions: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidMeasure("empty support".into()));
        }
        if positions.len() != weights.len() {
            return Err(Error::ShapeMismatch(format!("{} positions but {} weights", positions.len(), weights.len())));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite position".into()));
        }
        check_weights(&weights)?;
        let sorted = positions.windows(2).all(|w| w[0] <= w[1]);
        Ok(Self { positions, weights, sorted })
    }

    /// Unit-mass Dirac at `x`.
    pub fn dirac(x: f64) -> Self {
        Self { positions: vec![x], weights: vec![1.0], sorted: true }
    }

    pub(crate) fn from_sorted_unchecked(positions: Vec<f64>, weights: Vec<f64>) -> Self {
        debug_assert!(positions.windows(2).all(|w| w[0] <= w[1]));
        Self { positions, weights, sorted: true }
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn is_sorted(&self) -> bool {
        self.sorted
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Stable ascending sort. Returns the sorted measure and `perm`, where
    /// `perm[k]` is the input index of the atom at sorted position `k`.
    pub fn sorted(&self) -> (Measure1D, Vec<usize>) {
        let perm = argsort(&self.positions);
        let positions = perm.iter().map(|&i| self.positions[i]).collect();
        let weights = perm.iter().map(|&i| self.weights[i]).collect();
        (Measure1D::from_sorted_unchecked(positions, weights), perm)
    }
}

/// Stable argsort; ties keep input order.
pub(crate) fn argsort(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    idx
}
