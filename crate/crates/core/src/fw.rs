//! Frank-Wolfe building blocks for the KL setting.
//!
//! The unbalanced dual is concave in `(f, g)`. Along the translation
//! `(f + λ, g − λ)` its maximiser has the closed form
//!
//! ```text
//! λ*(f, g) = ρ1ρ2/(ρ1+ρ2) · ( log Σ_i a_i e^{−f_i/ρ1} − log Σ_j b_j e^{−g_j/ρ2} ),
//! ```
//!
//! and the linear oracle of the translated objective is a balanced OT
//! problem between `ā = e^{−(f+λ*)/ρ1} a` and `b̄ = e^{−(g−λ*)/ρ2} b`, which
//! have equal masses.

use crate::divergences::{phi_circ_kl, UnbalancedParams};
use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, Measure1D};
use crate::numeric::{exp_clamped, log_sum_exp_weighted};
use crate::ot1d::{north_west_duals, DualPotentials};

/// Potentials held by a Frank-Wolfe run.
#[derive(Debug, Clone, PartialEq)]
pub enum Potentials {
    /// One pair per slice (SUOT), on original atom indices.
    PerSlice(Vec<DualPotentials>),
    /// A single averaged pair (USOT), on original atom indices.
    Averaged(DualPotentials),
}

/// Final state of a Frank-Wolfe run.
///
/// Potentials are stored recentred, i.e. already translated by `λ*`, so the
/// dual objective is `Σ φ°1(f) a + Σ φ°2(g) b` directly.
#[derive(Debug, Clone, PartialEq)]
pub struct FwState {
    pub potentials: Potentials,
    /// Number of Frank-Wolfe steps taken.
    pub iteration: usize,
    /// Dual objective after each step.
    pub trace: Vec<f64>,
}

impl FwState {
    /// Objective at the final iterate.
    pub fn value(&self) -> f64 {
        self.trace.last().copied().unwrap_or(0.0)
    }
}

/// Optimal translation `λ*` of `(f + λ, g − λ)` for weights `a`, `b`.
pub fn lambda_star(f: &[f64], a: &[f64], g: &[f64], b: &[f64], rho1: f64, rho2: f64) -> Result<f64> {
    check_len(f, a, "f")?;
    check_len(g, b, "g")?;
    let la = log_sum_exp_weighted(f.iter().map(|&x| -x / rho1).zip(a.iter().copied()));
    let lb = log_sum_exp_weighted(g.iter().map(|&x| -x / rho2).zip(b.iter().copied()));
    if la == f64::NEG_INFINITY || lb == f64::NEG_INFINITY {
        return Err(Error::ZeroMass);
    }
    Ok(rho1 * rho2 / (rho1 + rho2) * (la - lb))
}

fn check_len(v: &[f64], w: &[f64], name: &str) -> Result<()> {
    if v.len() != w.len() {
        return Err(Error::ShapeMismatch(format!("{name} has {} entries for {} atoms", v.len(), w.len())));
    }
    Ok(())
}

/// Writes `e^{−(f+λ*)/ρ1} a` and `e^{−(g−λ*)/ρ2} b` into the output buffers
/// and returns `λ*`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn norm_weights(
    f: &[f64],
    a: &[f64],
    g: &[f64],
    b: &[f64],
    rho1: f64,
    rho2: f64,
    out_a: &mut [f64],
    out_b: &mut [f64],
) -> Result<f64> {
    let lambda = lambda_star(f, a, g, b, rho1, rho2)?;
    for ((o, &fi), &ai) in out_a.iter_mut().zip(f).zip(a) {
        *o = ai * exp_clamped(-(fi + lambda) / rho1);
    }
    for ((o, &gj), &bj) in out_b.iter_mut().zip(g).zip(b) {
        *o = bj * exp_clamped(-(gj - lambda) / rho2);
    }
    Ok(lambda)
}

/// Reweights `(α, β)` into the mass-matched pair `(ᾱ, β̄)`.
pub fn norm(
    alpha: &DiscreteMeasure,
    beta: &DiscreteMeasure,
    f: &[f64],
    g: &[f64],
    rho1: f64,
    rho2: f64,
) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    let mut wa = vec![0.0; alpha.len()];
    let mut wb = vec![0.0; beta.len()];
    norm_weights(f, alpha.weights(), g, beta.weights(), rho1, rho2, &mut wa, &mut wb)?;
    Ok((alpha.with_weights(wa)?, beta.with_weights(wb)?))
}

/// Step size `γ_t = 2/(t + 3)` for the step taken at iteration `t ≥ 0`.
pub fn step_size(t: usize) -> f64 {
    2.0 / (t as f64 + 3.0)
}

/// Convex Frank-Wolfe step `((1−γ)f + γr, (1−γ)g + γs)` with `γ = step_size(t)`.
pub fn fw_step(f: &[f64], g: &[f64], r: &[f64], s: &[f64], t: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len(r, f, "r")?;
    check_len(s, g, "s")?;
    let mut f = f.to_vec();
    let mut g = g.to_vec();
    step_in_place(&mut f, r, step_size(t));
    step_in_place(&mut g, s, step_size(t));
    Ok((f, g))
}

pub(crate) fn step_in_place(f: &mut [f64], r: &[f64], gamma: f64) {
    for (fi, ri) in f.iter_mut().zip(r) {
        *fi = (1.0 - gamma) * *fi + gamma * ri;
    }
}

/// Dual objective at the translated potentials, `Σ φ°1(f+λ*) a + Σ φ°2(g−λ*) b`.
/// Returns the value together with `λ*`.
pub fn dual_objective(f: &[f64], a: &[f64], g: &[f64], b: &[f64], rho1: f64, rho2: f64) -> Result<(f64, f64)> {
    let lambda = lambda_star(f, a, g, b, rho1, rho2)?;
    let va: f64 = f.iter().zip(a).map(|(&x, &w)| w * phi_circ_kl(rho1, x + lambda)).sum();
    let vb: f64 = g.iter().zip(b).map(|(&x, &w)| w * phi_circ_kl(rho2, x - lambda)).sum();
    Ok((va + vb, lambda))
}

/// Fused Norm step and dual objective for fixed weights `a`, `b`.
///
/// One pass per side computes the log-sum-exp for `λ*`, the reweighted
/// measures and, since `φ°(f+λ*)·a = ρ(a − ā)`, the objective itself.
#[derive(Debug, Clone)]
pub(crate) struct Reweighter {
    log_a: Vec<f64>,
    log_b: Vec<f64>,
    mass_a: f64,
    mass_b: f64,
    pub(crate) rho1: f64,
    pub(crate) rho2: f64,
}

impl Reweighter {
    pub(crate) fn new(a: &[f64], b: &[f64], rho1: f64, rho2: f64) -> Self {
        let ln = |w: &f64| if *w > 0.0 { w.ln() } else { f64::NEG_INFINITY };
        Self {
            log_a: a.iter().map(ln).collect(),
            log_b: b.iter().map(ln).collect(),
            mass_a: a.iter().sum(),
            mass_b: b.iter().sum(),
            rho1,
            rho2,
        }
    }

    /// Writes `(ā, b̄)` and returns `(objective, λ*)` at `(f, g)`.
    pub(crate) fn apply(&self, f: &[f64], g: &[f64], out_a: &mut [f64], out_b: &mut [f64]) -> Result<(f64, f64)> {
        let (shift_a, lse_a) = shifted_exp(f, &self.log_a, self.rho1, out_a)?;
        let (shift_b, lse_b) = shifted_exp(g, &self.log_b, self.rho2, out_b)?;
        let lambda = self.rho1 * self.rho2 / (self.rho1 + self.rho2) * (lse_a - lse_b);
        let scale_a = exp_clamped(shift_a - lambda / self.rho1);
        let scale_b = exp_clamped(shift_b + lambda / self.rho2);
        let mut sum_a = 0.0;
        for x in out_a.iter_mut() {
            *x *= scale_a;
            sum_a += *x;
        }
        let mut sum_b = 0.0;
        for x in out_b.iter_mut() {
            *x *= scale_b;
            sum_b += *x;
        }
        let value = self.rho1 * (self.mass_a - sum_a) + self.rho2 * (self.mass_b - sum_b);
        Ok((value, lambda))
    }
}

/// `out_i = exp(v_i − max v)` with `v_i = log w_i − f_i/ρ`; returns
/// `(max v, log Σ exp v)`.
fn shifted_exp(f: &[f64], log_w: &[f64], rho: f64, out: &mut [f64]) -> Result<(f64, f64)> {
    let mut shift = f64::NEG_INFINITY;
    for ((o, &fi), &lw) in out.iter_mut().zip(f).zip(log_w) {
        *o = lw - fi / rho;
        shift = shift.max(*o);
    }
    if shift == f64::NEG_INFINITY {
        return Err(Error::ZeroMass);
    }
    let mut sum = 0.0;
    for o in out.iter_mut() {
        *o = (*o - shift).exp();
        sum += *o;
    }
    Ok((shift, shift + sum.ln()))
}

/// Frank-Wolfe for one unbalanced problem on the line, working on sorted
/// supports. Shared by `uot1d` and the per-slice loop of SUOT.
#[derive(Debug, Clone)]
pub(crate) struct LineSolver<'a> {
    x: &'a [f64],
    y: &'a [f64],
    p: f64,
    rw: Reweighter,
    f: Vec<f64>,
    g: Vec<f64>,
    abar: Vec<f64>,
    bbar: Vec<f64>,
    r: Vec<f64>,
    s: Vec<f64>,
    value: f64,
    lambda: f64,
}

impl<'a> LineSolver<'a> {
    pub(crate) fn new(
        x: &'a [f64],
        a: &'a [f64],
        y: &'a [f64],
        b: &'a [f64],
        p: f64,
        rho1: f64,
        rho2: f64,
    ) -> Result<Self> {
        let (n, m) = (x.len(), y.len());
        let mut solver = Self {
            x,
            y,
            p,
            rw: Reweighter::new(a, b, rho1, rho2),
            f: vec![0.0; n],
            g: vec![0.0; m],
            abar: vec![0.0; n],
            bbar: vec![0.0; m],
            r: vec![0.0; n],
            s: vec![0.0; m],
            value: 0.0,
            lambda: 0.0,
        };
        solver.refresh()?;
        Ok(solver)
    }

    fn refresh(&mut self) -> Result<()> {
        (self.value, self.lambda) = self.rw.apply(&self.f, &self.g, &mut self.abar, &mut self.bbar)?;
        Ok(())
    }

    /// One Frank-Wolfe step at iteration `t`; returns the new objective.
    pub(crate) fn step(&mut self, t: usize) -> Result<f64> {
        north_west_duals(self.x, &self.abar, self.y, &self.bbar, self.p, &mut self.r, &mut self.s);
        let gamma = step_size(t);
        step_in_place(&mut self.f, &self.r, gamma);
        step_in_place(&mut self.g, &self.s, gamma);
        self.refresh()?;
        Ok(self.value)
    }

    /// Potentials translated by `λ*`, in sorted order.
    pub(crate) fn recentred(&self) -> DualPotentials {
        DualPotentials {
            f: self.f.iter().map(|x| x + self.lambda).collect(),
            g: self.g.iter().map(|x| x - self.lambda).collect(),
        }
    }
}

/// Whether the optional tolerance asks to stop after the latest trace entry.
pub(crate) fn converged(trace: &[f64], tol: Option<f64>) -> bool {
    match (tol, trace) {
        (Some(tol), [.., prev, last]) => (last - prev).abs() < tol,
        _ => false,
    }
}

/// Unbalanced OT on the line by Frank-Wolfe. Returns the dual value and the
/// recentred potentials, index-aligned with the inputs.
pub fn uot1d(mu: &Measure1D, nu: &Measure1D, params: &UnbalancedParams) -> Result<(f64, DualPotentials)> {
    let (value, state) = uot1d_with_state(mu, nu, params)?;
    match state.potentials {
        Potentials::PerSlice(mut v) => Ok((value, v.pop().expect("one slice"))),
        Potentials::Averaged(_) => unreachable!(),
    }
}

/// As [`uot1d`], also returning the full state with the objective trace.
pub fn uot1d_with_state(mu: &Measure1D, nu: &Measure1D, params: &UnbalancedParams) -> Result<(f64, FwState)> {
    let (rho1, rho2) = params.fw_rhos()?;
    if !(mu.mass() > 0.0 && nu.mass() > 0.0) {
        return Err(Error::ZeroMass);
    }
    let (smu, pmu) = mu.sorted();
    let (snu, pnu) = nu.sorted();
    let mut solver =
        LineSolver::new(smu.positions(), smu.weights(), snu.positions(), snu.weights(), params.p, rho1, rho2)?;
    let mut trace = Vec::with_capacity(params.fw_iters);
    for t in 0..params.fw_iters {
        trace.push(solver.step(t)?);
        if converged(&trace, params.fw_tol) {
            break;
        }
    }
    let sorted = solver.recentred();
    let mut pot = DualPotentials::zeros(mu.len(), nu.len());
    for (k, &i) in pmu.iter().enumerate() {
        pot.f[i] = sorted.f[k];
    }
    for (k, &j) in pnu.iter().enumerate() {
        pot.g[j] = sorted.g[k];
    }
    let state = FwState { potentials: Potentials::PerSlice(vec![pot]), iteration: trace.len(), trace };
    Ok((state.value(), state))
}
