//! Unbalanced sliced OT: one global marginal relaxation, followed by sliced
//! OT between the relaxed measures.
//!
//! Frank-Wolfe runs on a single potential pair `(f_avg, g_avg)` indexed by
//! the original atoms. Each step reweights `(α, β)` by the current
//! potentials, solves balanced 1D OT on every slice, maps the slice duals
//! back to the atoms through the sort permutation and averages them.

use rayon::prelude::*;

use crate::divergences::UnbalancedParams;
use crate::error::{Error, Result};
use crate::fw::{converged, norm, step_in_place, step_size, FwState, Potentials, Reweighter};
use crate::measures::DiscreteMeasure;
use crate::ot1d::{north_west_duals, DualPotentials};
use crate::slicing::{project_pair, sample_directions, ProjectedPair, ProjectionSet};

/// Slices reduced together by one worker. Fixed so that the summation
/// order, and thus the result, does not depend on the thread count.
const CHUNK: usize = 16;

/// Averages per-slice potentials given in sorted order back onto the
/// original atoms: `out[perm_k[r]] += v_k[r] / K`.
pub fn avg_pot(per_slice: &[Vec<f64>], perms: &[Vec<usize>]) -> Result<Vec<f64>> {
    if per_slice.len() != perms.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} potential vectors for {} permutations",
            per_slice.len(),
            perms.len()
        )));
    }
    let Some(first) = per_slice.first() else {
        return Err(Error::EmptyProjectionSet);
    };
    let n = first.len();
    if per_slice.iter().zip(perms).any(|(v, p)| v.len() != n || p.len() != n) {
        return Err(Error::ShapeMismatch("slices disagree on the atom count".into()));
    }
    let k = per_slice.len() as f64;
    let mut out = vec![0.0; n];
    for (v, perm) in per_slice.iter().zip(perms) {
        for (&x, &i) in v.iter().zip(perm) {
            out[i] += x;
        }
    }
    out.iter_mut().for_each(|x| *x /= k);
    Ok(out)
}

/// USOT between `alpha` and `beta` on the fixed directions `dirs`.
///
/// Returns `Σ φ°1(f_avg) α + Σ φ°2(g_avg) β` at the final, recentred
/// potentials and the solver state.
pub fn usot(
    alpha: &DiscreteMeasure,
    beta: &DiscreteMeasure,
    dirs: &ProjectionSet,
    params: &UnbalancedParams,
) -> Result<(f64, FwState)> {
    params.fw_rhos()?;
    alpha.require_positive_mass()?;
    beta.require_positive_mass()?;
    let slices = project_pair(alpha, beta, dirs)?;
    usot_projected(alpha.weights(), beta.weights(), &slices, params)
}

/// USOT on already projected slices; `a` and `b` are the original weights.
pub fn usot_projected(
    a: &[f64],
    b: &[f64],
    slices: &[ProjectedPair],
    params: &UnbalancedParams,
) -> Result<(f64, FwState)> {
    let (rho1, rho2) = params.fw_rhos()?;
    if slices.is_empty() {
        return Err(Error::EmptyProjectionSet);
    }
    let (n, m) = (a.len(), b.len());
    if slices.iter().any(|s| s.alpha.perm.len() != n || s.beta.perm.len() != m) {
        return Err(Error::ShapeMismatch("slices do not match the atom counts".into()));
    }
    let mut iter = UsotIteration::new(a, b, rho1, rho2, params.p)?;
    let mut trace = Vec::with_capacity(params.fw_iters);
    for t in 0..params.fw_iters {
        trace.push(iter.step(slices, t)?);
        if converged(&trace, params.fw_tol) {
            break;
        }
    }
    Ok(iter.finish(trace))
}

/// Stochastic USOT: a fresh set of `params.n_projections` directions,
/// seeded with `params.seed ^ t`, at every iteration `t`.
pub fn usot_stochastic(
    alpha: &DiscreteMeasure,
    beta: &DiscreteMeasure,
    params: &UnbalancedParams,
) -> Result<(f64, FwState)> {
    let (rho1, rho2) = params.fw_rhos()?;
    alpha.require_positive_mass()?;
    beta.require_positive_mass()?;
    if alpha.dim() != beta.dim() {
        return Err(Error::DimensionMismatch { expected: alpha.dim(), found: beta.dim() });
    }
    let mut iter = UsotIteration::new(alpha.weights(), beta.weights(), rho1, rho2, params.p)?;
    let mut trace = Vec::with_capacity(params.fw_iters);
    for t in 0..params.fw_iters {
        let dirs = sample_directions(alpha.dim(), params.n_projections, params.seed ^ t as u64)?;
        let slices = project_pair(alpha, beta, &dirs)?;
        trace.push(iter.step(&slices, t)?);
        if converged(&trace, params.fw_tol) {
            break;
        }
    }
    Ok(iter.finish(trace))
}

/// The global marginals `(e^{−f_avg/ρ1} α, e^{−g_avg/ρ2} β)`.
pub fn usot_marginals(
    state: &FwState,
    alpha: &DiscreteMeasure,
    beta: &DiscreteMeasure,
    params: &UnbalancedParams,
) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    let (rho1, rho2) = params.fw_rhos()?;
    let Potentials::Averaged(pot) = &state.potentials else {
        return Err(Error::StateMismatch("expected averaged potentials".into()));
    };
    if pot.f.len() != alpha.len() || pot.g.len() != beta.len() {
        return Err(Error::StateMismatch("potential lengths differ from atom counts".into()));
    }
    norm(alpha, beta, &pot.f, &pot.g, rho1, rho2)
}

struct UsotIteration {
    rw: Reweighter,
    p: f64,
    f: Vec<f64>,
    g: Vec<f64>,
    pi1: Vec<f64>,
    pi2: Vec<f64>,
    value: f64,
    lambda: f64,
}

impl UsotIteration {
    fn new(a: &[f64], b: &[f64], rho1: f64, rho2: f64, p: f64) -> Result<Self> {
        let mut it = Self {
            rw: Reweighter::new(a, b, rho1, rho2),
            p,
            f: vec![0.0; a.len()],
            g: vec![0.0; b.len()],
            pi1: vec![0.0; a.len()],
            pi2: vec![0.0; b.len()],
            value: 0.0,
            lambda: 0.0,
        };
        it.refresh()?;
        Ok(it)
    }

    /// Recomputes `(π1, π2)`, the objective and `λ*` at the current potentials.
    fn refresh(&mut self) -> Result<()> {
        (self.value, self.lambda) = self.rw.apply(&self.f, &self.g, &mut self.pi1, &mut self.pi2)?;
        Ok(())
    }

    fn step(&mut self, slices: &[ProjectedPair], t: usize) -> Result<f64> {
        let (r, s) = sliced_duals(&self.pi1, &self.pi2, slices, self.p);
        let gamma = step_size(t);
        step_in_place(&mut self.f, &r, gamma);
        step_in_place(&mut self.g, &s, gamma);
        self.refresh()?;
        Ok(self.value)
    }

    fn finish(self, trace: Vec<f64>) -> (f64, FwState) {
        let pot = DualPotentials {
            f: self.f.iter().map(|x| x + self.lambda).collect(),
            g: self.g.iter().map(|x| x - self.lambda).collect(),
        };
        let state = FwState { potentials: Potentials::Averaged(pot), iteration: trace.len(), trace };
        (state.value(), state)
    }
}

/// Per-slice balanced duals between the projections of `(π1, π2)`,
/// averaged onto the original atoms.
fn sliced_duals(pi1: &[f64], pi2: &[f64], slices: &[ProjectedPair], p: f64) -> (Vec<f64>, Vec<f64>) {
    let (n, m) = (pi1.len(), pi2.len());
    let partials: Vec<(Vec<f64>, Vec<f64>)> = slices
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc_f = vec![0.0; n];
            let mut acc_g = vec![0.0; m];
            let mut wa = vec![0.0; n];
            let mut wb = vec![0.0; m];
            let mut r = vec![0.0; n];
            let mut s = vec![0.0; m];
            for slice in chunk {
                slice.alpha.gather(pi1, &mut wa);
                slice.beta.gather(pi2, &mut wb);
                north_west_duals(slice.alpha.positions(), &wa, slice.beta.positions(), &wb, p, &mut r, &mut s);
                for (&v, &i) in r.iter().zip(&slice.alpha.perm) {
                    acc_f[i] += v;
                }
                for (&v, &j) in s.iter().zip(&slice.beta.perm) {
                    acc_g[j] += v;
                }
            }
            (acc_f, acc_g)
        })
        .collect();
    let k = slices.len() as f64;
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    for (pf, pg) in &partials {
        f.iter_mut().zip(pf).for_each(|(x, y)| *x += y);
        g.iter_mut().zip(pg).for_each(|(x, y)| *x += y);
    }
    f.iter_mut().for_each(|x| *x /= k);
    g.iter_mut().for_each(|x| *x /= k);
    (f, g)
}
