//! USOT barycenters on a fixed support by accelerated mirror descent.
//!
//! The barycenter minimises `β ↦ Σ_b ω_b USOT(α_b, β)` over probability
//! vectors on a fixed grid. Each outer iteration `t = 1, 2, …` uses
//! `γ = 2/(t+1)` and three sequences on the simplex:
//!
//! ```text
//! β  = (1−γ) β̂ + γ β̃
//! β̃ ← β̃ · exp(−lr/γ · ∇) / normaliser        (∇ evaluated at β)
//! β̂ = (1−γ) β̂ + γ β̃
//! ```
//!
//! The gradient of `USOT(α, ·)` with respect to the weights of `β` is
//! `φ°2(g)` at the recentred dual potential `g`. Directions are redrawn at
//! every outer iteration with seed `params.seed ^ t`. Cells whose weight
//! reaches exactly zero stay at zero.

use ndarray::Array2;
use rayon::prelude::*;

use crate::divergences::{phi_circ_kl, UnbalancedParams};
use crate::error::{Error, Result};
use crate::fw::Potentials;
use crate::measures::DiscreteMeasure;
use crate::numeric::clamp_exponent;
use crate::slicing::{sample_directions, ProjectionSet};
use crate::usot::usot;

const SIMPLEX_TOL: f64 = 1e-9;

/// A probability vector on a fixed support.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    measure: DiscreteMeasure,
}

impl GridMeasure {
    pub fn new(points: Array2<f64>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::NotOnSimplex(format!("weights sum to {total}")));
        }
        Ok(Self { measure: DiscreteMeasure::new(points, weights)? })
    }

    pub fn uniform(points: Array2<f64>) -> Result<Self> {
        let n = points.nrows();
        Self::new(points, vec![1.0 / n as f64; n])
    }

    /// Pixel centres of a `rows × cols` raster, `((r+½)/s, (c+½)/s)` with
    /// `s = max(rows, cols)`, carrying uniform weights.
    pub fn raster(rows: usize, cols: usize) -> Result<Self> {
        Self::uniform(raster_points(rows, cols)?)
    }

    pub fn from_measure(m: &DiscreteMeasure) -> Result<Self> {
        Self::new(m.points().to_owned(), m.weights().to_vec())
    }

    pub fn points(&self) -> ndarray::ArrayView2<'_, f64> {
        self.measure.points()
    }

    pub fn weights(&self) -> &[f64] {
        self.measure.weights()
    }

    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.measure.dim()
    }

    pub fn as_measure(&self) -> &DiscreteMeasure {
        &self.measure
    }

    /// Same support, new weights (must lie on the simplex).
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(self.measure.points().to_owned(), weights)
    }

    /// `½ Σ |w_i − v_i|` against a measure on the same support.
    pub fn tv_distance(&self, other: &[f64]) -> f64 {
        0.5 * self.weights().iter().zip(other).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

/// Row-major pixel centres of a `rows × cols` raster scaled into the unit square.
pub fn raster_points(rows: usize, cols: usize) -> Result<Array2<f64>> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidParameter(format!("empty raster {rows}x{cols}")));
    }
    let s = rows.max(cols) as f64;
    Ok(Array2::from_shape_fn((rows * cols, 2), |(k, axis)| {
        let idx = if axis == 0 { k / cols } else { k % cols };
        (idx as f64 + 0.5) / s
    }))
}

/// `∇_β USOT(α, β)`, one entry per grid cell.
pub fn usot_gradient_wrt_beta(
    alpha: &DiscreteMeasure,
    beta: &GridMeasure,
    dirs: &ProjectionSet,
    params: &UnbalancedParams,
) -> Result<Vec<f64>> {
    Ok(value_and_gradient(alpha, beta.as_measure(), dirs, params)?.1)
}

fn value_and_gradient(
    alpha: &DiscreteMeasure,
    beta: &DiscreteMeasure,
    dirs: &ProjectionSet,
    params: &UnbalancedParams,
) -> Result<(f64, Vec<f64>)> {
    let (_, rho2) = params.fw_rhos()?;
    let (value, state) = usot(alpha, beta, dirs, params)?;
    let Potentials::Averaged(pot) = state.potentials else { unreachable!("usot returns averaged potentials") };
    Ok((value, pot.g.iter().map(|&g| phi_circ_kl(rho2, g)).collect()))
}

/// Weighted inputs, a support with its initial weights, and solver settings.
#[derive(Debug, Clone)]
pub struct BarycenterProblem {
    pub inputs: Vec<DiscreteMeasure>,
    pub omegas: Vec<f64>,
    /// Fixed support; its weights initialise the iteration.
    pub grid: GridMeasure,
    /// Inner USOT settings; `ρ1` penalises the inputs, `ρ2` the barycenter.
    pub params: UnbalancedParams,
    pub lr: f64,
    pub iters: usize,
}

impl BarycenterProblem {
    /// Defaults: uniform initialisation, `lr = 1`, 500 iterations.
    pub fn new(inputs: Vec<DiscreteMeasure>, omegas: Vec<f64>, grid: GridMeasure, params: UnbalancedParams) -> Self {
        Self { inputs, omegas, grid, params, lr: 1.0, iters: 500 }
    }

    fn validate(&self) -> Result<()> {
        self.params.fw_rhos()?;
        if self.inputs.is_empty() {
            return Err(Error::InvalidParameter("no input measures".into()));
        }
        if self.omegas.len() != self.inputs.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} weights for {} inputs",
                self.omegas.len(),
                self.inputs.len()
            )));
        }
        let total: f64 = self.omegas.iter().sum();
        if self.omegas.iter().any(|w| w.is_nan() || *w < 0.0) || (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::NotOnSimplex(format!("barycentric weights {:?}", self.omegas)));
        }
        for m in &self.inputs {
            if m.dim() != self.grid.dim() {
                return Err(Error::DimensionMismatch { expected: self.grid.dim(), found: m.dim() });
            }
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::InvalidParameter(format!("lr must be > 0, got {}", self.lr)));
        }
        if self.iters == 0 {
            return Err(Error::InvalidParameter("iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// The three iterates of one outer step, passed to observers.
#[derive(Debug, Clone)]
pub struct BarycenterStep<'a> {
    pub iteration: usize,
    /// Point where the gradient was taken.
    pub beta: &'a [f64],
    pub beta_tilde: &'a [f64],
    pub beta_hat: &'a [f64],
    /// `Σ_b ω_b USOT(α_b, β)` at `beta`.
    pub objective: f64,
}

/// Final barycenter and the objective recorded at every iteration.
#[derive(Debug, Clone)]
pub struct BarycenterResult {
    pub barycenter: GridMeasure,
    pub trace: Vec<f64>,
}

/// Runs the mirror-descent iteration and returns the final `β̂`.
pub fn barycenter(problem: &BarycenterProblem) -> Result<GridMeasure> {
    Ok(barycenter_with(problem, |_| {})?.barycenter)
}

/// As [`barycenter`], calling `observer` after every outer iteration.
pub fn barycenter_with<F>(problem: &BarycenterProblem, mut observer: F) -> Result<BarycenterResult>
where
    F: FnMut(&BarycenterStep<'_>),
{
    problem.validate()?;
    let grid = &problem.grid;
    let g = grid.len();
    let mut tilde = grid.weights().to_vec();
    let mut hat = tilde.clone();
    let mut beta = vec![0.0; g];
    let mut trace = Vec::with_capacity(problem.iters);
    for t in 1..=problem.iters {
        let gamma = 2.0 / (t as f64 + 1.0);
        for ((b, h), w) in beta.iter_mut().zip(&hat).zip(&tilde) {
            *b = (1.0 - gamma) * h + gamma * w;
        }
        let beta_measure = grid.as_measure().with_weights(beta.clone())?;
        let dirs = sample_directions(grid.dim(), problem.params.n_projections, problem.params.seed ^ t as u64)?;
        let parts = problem
            .inputs
            .par_iter()
            .map(|alpha| value_and_gradient(alpha, &beta_measure, &dirs, &problem.params))
            .collect::<Result<Vec<_>>>()?;
        let mut grad = vec![0.0; g];
        let mut objective = 0.0;
        for ((value, part), &w) in parts.iter().zip(&problem.omegas) {
            objective += w * value;
            grad.iter_mut().zip(part).for_each(|(acc, x)| *acc += w * x);
        }
        mirror_step(&mut tilde, &grad, problem.lr / gamma);
        for (h, w) in hat.iter_mut().zip(&tilde) {
            *h = (1.0 - gamma) * *h + gamma * w;
        }
        trace.push(objective);
        observer(&BarycenterStep { iteration: t, beta: &beta, beta_tilde: &tilde, beta_hat: &hat, objective });
    }
    Ok(BarycenterResult { barycenter: grid.with_weights(hat)?, trace })
}

/// `w ← w · exp(−step · grad)`, renormalised, computed in the log domain.
fn mirror_step(w: &mut [f64], grad: &[f64], step: f64) {
    let logs: Vec<f64> =
        w.iter().zip(grad).map(|(&x, &d)| if x > 0.0 { x.ln() - step * d } else { f64::NEG_INFINITY }).collect();
    let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (x, l) in w.iter_mut().zip(&logs) {
        *x = clamp_exponent(l - shift).exp();
        if *l == f64::NEG_INFINITY {
            *x = 0.0;
        }
        total += *x;
    }
    w.iter_mut().for_each(|x| *x /= total);
}
