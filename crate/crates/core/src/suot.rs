//! Sliced unbalanced OT: an independent 1D unbalanced problem per slice,
//! solved by Frank-Wolfe, then averaged over slices.

use rayon::prelude::*;

use crate::divergences::UnbalancedParams;
use crate::error::{Error, Result};
use crate::fw::{converged, norm, FwState, LineSolver, Potentials};
use crate::measures::DiscreteMeasure;
use crate::numeric::pairwise_sum;
use crate::ot1d::DualPotentials;
use crate::slicing::{project_pair, ProjectedPair, ProjectionSet};

/// SUOT between `alpha` and `beta` on the directions `dirs`.
///
/// Returns the mean over slices of the per-slice dual objective and the
/// final per-slice potentials.
pub fn suot(
    alpha: &DiscreteMeasure,
    beta: &DiscreteMeasure,
    dirs: &ProjectionSet,
    params: &UnbalancedParams,
) -> Result<(f64, FwState)> {
    params.fw_rhos()?;
    alpha.require_positive_mass()?;
    beta.require_positive_mass()?;
    let slices = project_pair(alpha, beta, dirs)?;
    suot_projected(&slices, params)
}

/// SUOT on already projected slices.
///
/// Any provider of sorted 1D pairs can be plugged in here, e.g. projections
/// other than linear ones; the potentials in the returned state are indexed
/// through each slice's permutation.
pub fn suot_projected(slices: &[ProjectedPair], params: &UnbalancedParams) -> Result<(f64, FwState)> {
    let (rho1, rho2) = params.fw_rhos()?;
    if slices.is_empty() {
        return Err(Error::EmptyProjectionSet);
    }
    let mut solvers: Vec<LineSolver<'_>> = slices
        .iter()
        .map(|s| {
            LineSolver::new(
                s.alpha.positions(),
                s.alpha.measure.weights(),
                s.beta.positions(),
                s.beta.measure.weights(),
                params.p,
                rho1,
                rho2,
            )
        })
        .collect::<Result<_>>()?;
    let k = slices.len() as f64;
    let mut trace = Vec::with_capacity(params.fw_iters);
    for t in 0..params.fw_iters {
        let values = solvers.par_iter_mut().map(|s| s.step(t)).collect::<Result<Vec<f64>>>()?;
        trace.push(pairwise_sum(&values) / k);
        if converged(&trace, params.fw_tol) {
            break;
        }
    }
    let potentials = solvers
        .par_iter()
        .zip(slices)
        .map(|(solver, slice)| {
            let sorted = solver.recentred();
            let mut pot = DualPotentials::zeros(sorted.f.len(), sorted.g.len());
            slice.alpha.scatter(&sorted.f, &mut pot.f);
            slice.beta.scatter(&sorted.g, &mut pot.g);
            pot
        })
        .collect();
    let state = FwState { potentials: Potentials::PerSlice(potentials), iteration: trace.len(), trace };
    Ok((state.value(), state))
}

/// Optimal marginals of every slice, `(e^{−f_θ/ρ1} α, e^{−g_θ/ρ2} β)`,
/// on the original atoms.
pub fn suot_marginals(
    state: &FwState,
    alpha: &DiscreteMeasure,
    beta: &DiscreteMeasure,
    dirs: &ProjectionSet,
    params: &UnbalancedParams,
) -> Result<Vec<(DiscreteMeasure, DiscreteMeasure)>> {
    let (rho1, rho2) = params.fw_rhos()?;
    let per_slice = match &state.potentials {
        Potentials::PerSlice(v) => v,
        Potentials::Averaged(_) => return Err(Error::StateMismatch("expected per-slice potentials".into())),
    };
    if per_slice.len() != dirs.len() {
        return Err(Error::StateMismatch(format!("{} slices in state, {} directions", per_slice.len(), dirs.len())));
    }
    per_slice
        .par_iter()
        .map(|pot| {
            if pot.f.len() != alpha.len() || pot.g.len() != beta.len() {
                return Err(Error::StateMismatch("potential lengths differ from atom counts".into()));
            }
            norm(alpha, beta, &pot.f, &pot.g, rho1, rho2)
        })
        .collect()
}

/// Slice-wise average of [`suot_marginals`].
pub fn mean_marginals(marginals: &[(DiscreteMeasure, DiscreteMeasure)]) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    let (first_a, first_b) = marginals.first().ok_or(Error::EmptyProjectionSet)?;
    let k = marginals.len() as f64;
    let mut wa = vec![0.0; first_a.len()];
    let mut wb = vec![0.0; first_b.len()];
    for (a, b) in marginals {
        for (acc, w) in wa.iter_mut().zip(a.weights()) {
            *acc += w / k;
        }
        for (acc, w) in wb.iter_mut().zip(b.weights()) {
            *acc += w / k;
        }
    }
    Ok((first_a.with_weights(wa)?, first_b.with_weights(wb)?))
}
