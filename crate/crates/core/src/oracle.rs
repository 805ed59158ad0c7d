//! Reference solvers for validation.
//!
//! Nothing here touches the Frank-Wolfe machinery or the closed-form 1D
//! routines: the balanced LP is solved by successive shortest paths on the
//! dense bipartite network, and unbalanced OT by log-domain Sinkhorn with
//! KL marginal penalties and ε-annealing. Both are slow and meant for tests
//! and small cross-checks only.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, Measure1D};

/// Upper bound on `n·m` for the dense LP.
pub const LP_SIZE_CAP: usize = 10_000;
/// Upper bound on `n·m` for dense Sinkhorn.
pub const SINKHORN_SIZE_CAP: usize = 1_000_000;

const CLAMP: f64 = 700.0;

fn pow_cost(d: f64, p: f64) -> f64 {
    let d = d.abs();
    if p == 1.0 {
        d
    } else if p == 2.0 {
        d * d
    } else {
        d.powf(p)
    }
}

/// `C_ij = |x_i − y_j|^p` on the line.
pub fn cost_matrix_1d(x: &[f64], y: &[f64], p: f64) -> Array2<f64> {
    Array2::from_shape_fn((x.len(), y.len()), |(i, j)| pow_cost(x[i] - y[j], p))
}

/// `C_ij = ‖x_i − y_j‖^p` in R^d.
pub fn cost_matrix(alpha: &DiscreteMeasure, beta: &DiscreteMeasure, p: f64) -> Result<Array2<f64>> {
    if alpha.dim() != beta.dim() {
        return Err(Error::DimensionMismatch { expected: alpha.dim(), found: beta.dim() });
    }
    Ok(Array2::from_shape_fn((alpha.len(), beta.len()), |(i, j)| {
        let d2: f64 = alpha.point(i).iter().zip(beta.point(j).iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        pow_cost(d2.sqrt(), p)
    }))
}

fn check_lp_inputs(a: &[f64], b: &[f64], cost: &Array2<f64>) -> Result<()> {
    if cost.dim() != (a.len(), b.len()) {
        return Err(Error::ShapeMismatch(format!("cost is {:?} for {} x {} weights", cost.dim(), a.len(), b.len())));
    }
    if a.len() * b.len() > LP_SIZE_CAP {
        return Err(Error::SizeCap(format!("{} x {} exceeds {LP_SIZE_CAP} cells", a.len(), b.len())));
    }
    let (ma, mb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    if (ma - mb).abs() > 1e-9 * ma.max(mb).max(1.0) {
        return Err(Error::Unbalanced { mass_a: ma, mass_b: mb });
    }
    Ok(())
}

/// Exact optimum of the balanced transportation LP
/// `min Σ C_ij π_ij` s.t. `π 1 = a`, `πᵀ 1 = b`, `π ≥ 0`,
/// by successive shortest augmenting paths (label-correcting search on the
/// residual network, which has negative arcs once flow is routed).
pub fn lp_ot(a: &[f64], b: &[f64], cost: &Array2<f64>) -> Result<f64> {
    check_lp_inputs(a, b, cost)?;
    let (n, m) = (a.len(), b.len());
    let total: f64 = a.iter().sum::<f64>().min(b.iter().sum());
    let eps = 1e-15 * total.max(f64::MIN_POSITIVE);
    // Distance labels only improve by more than this. Rounding can create
    // residual cycles of length ~1e-16·max C; without the floor the
    // label-correcting search would chase them indefinitely.
    let max_cost = cost.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
    let slack = 1e-13 * max_cost.max(f64::MIN_POSITIVE);
    let relax_cap = 4 * (n + m) * (n + m) * (n + m).max(16);

    let mut supply = a.to_vec();
    let mut demand = b.to_vec();
    let mut flow = Array2::<f64>::zeros((n, m));
    // sources are nodes 0..n, sinks n..n+m
    let mut dist = vec![0.0; n + m];
    let mut prev = vec![usize::MAX; n + m];
    let mut queued = vec![false; n + m];
    let mut queue = std::collections::VecDeque::with_capacity(n + m);

    while supply.iter().any(|&s| s > eps) && demand.iter().any(|&d| d > eps) {
        dist.fill(f64::INFINITY);
        prev.fill(usize::MAX);
        queued.fill(false);
        for i in 0..n {
            if supply[i] > eps {
                dist[i] = 0.0;
                queue.push_back(i);
                queued[i] = true;
            }
        }
        let mut pops = 0usize;
        while let Some(u) = queue.pop_front() {
            queued[u] = false;
            pops += 1;
            if pops > relax_cap {
                return Err(Error::InvalidParameter(
                    "lp_ot: shortest-path search did not settle (costs not finite?)".into(),
                ));
            }
            if u < n {
                for j in 0..m {
                    let v = n + j;
                    let nd = dist[u] + cost[[u, j]];
                    if nd < dist[v] - slack {
                        dist[v] = nd;
                        prev[v] = u;
                        if !queued[v] {
                            queued[v] = true;
                            queue.push_back(v);
                        }
                    }
                }
            } else {
                let j = u - n;
                for i in 0..n {
                    if flow[[i, j]] > eps {
                        let nd = dist[u] - cost[[i, j]];
                        if nd < dist[i] - slack {
                            dist[i] = nd;
                            prev[i] = u;
                            if !queued[i] {
                                queued[i] = true;
                                queue.push_back(i);
                            }
                        }
                    }
                }
            }
        }
        let sink = (0..m)
            .filter(|&j| demand[j] > eps && dist[n + j].is_finite())
            .min_by(|&x, &y| dist[n + x].total_cmp(&dist[n + y]));
        let Some(j_end) = sink else { break };

        // bottleneck along the path
        let mut amount = demand[j_end];
        let mut v = n + j_end;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u >= n {
                // backward arc (sink u -> source v) cancels flow on (v, u - n)
                amount = amount.min(flow[[v, u - n]]);
            }
            v = u;
        }
        amount = amount.min(supply[v]);

        let mut v = n + j_end;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u < n {
                flow[[u, v - n]] += amount;
            } else {
                flow[[v, u - n]] -= amount;
            }
            v = u;
        }
        supply[v] -= amount;
        demand[j_end] -= amount;
    }

    Ok(flow.iter().zip(cost.iter()).map(|(x, c)| x.max(0.0) * c).sum())
}

/// [`lp_ot`] between two measures on the line with cost `|x − y|^p`.
pub fn lp_ot_1d(mu: &Measure1D, nu: &Measure1D, p: f64) -> Result<f64> {
    let cost = cost_matrix_1d(mu.positions(), nu.positions(), p);
    lp_ot(mu.weights(), nu.weights(), &cost)
}

/// [`lp_ot`] between two point clouds with cost `‖x − y‖^p`.
pub fn lp_ot_nd(alpha: &DiscreteMeasure, beta: &DiscreteMeasure, p: f64) -> Result<f64> {
    let cost = cost_matrix(alpha, beta, p)?;
    lp_ot(alpha.weights(), beta.weights(), &cost)
}

/// Brute-force LP optimum by enumerating every spanning-tree basis of the
/// transportation polytope. Only for `n, m ≤ 4`.
pub fn lp_ot_vertex_enumeration(a: &[f64], b: &[f64], cost: &Array2<f64>) -> Result<f64> {
    check_lp_inputs(a, b, cost)?;
    let (n, m) = (a.len(), b.len());
    if n > 4 || m > 4 {
        return Err(Error::SizeCap(format!("vertex enumeration needs n, m <= 4, got {n} x {m}")));
    }
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
    let k = n + m - 1;
    let tol = 1e-12 * a.iter().sum::<f64>().max(1.0);
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(k);
    enumerate_subsets(cells.len(), k, 0, &mut chosen, &mut |subset| {
        if let Some(x) = solve_tree_basis(a, b, subset.iter().map(|&c| cells[c])) {
            if x.iter().all(|&(_, _, v)| v >= -tol) {
                let value: f64 = x.iter().map(|&(i, j, v)| v.max(0.0) * cost[[i, j]]).sum();
                best = best.min(value);
            }
        }
    });
    Ok(best)
}

fn enumerate_subsets(n: usize, k: usize, start: usize, chosen: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
    if chosen.len() == k {
        visit(chosen);
        return;
    }
    for c in start..n {
        if n - c < k - chosen.len() {
            break;
        }
        chosen.push(c);
        enumerate_subsets(n, k, c + 1, chosen, visit);
        chosen.pop();
    }
}

/// Solves the flows of a candidate basis by leaf elimination; `None` if the
/// cells do not form a spanning tree.
fn solve_tree_basis(
    a: &[f64],
    b: &[f64],
    cells: impl Iterator<Item = (usize, usize)>,
) -> Option<Vec<(usize, usize, f64)>> {
    let (n, m) = (a.len(), b.len());
    let mut edges: Vec<(usize, usize)> = cells.collect();
    let mut rem_a = a.to_vec();
    let mut rem_b = b.to_vec();
    let mut out = Vec::with_capacity(edges.len());
    while !edges.is_empty() {
        let mut deg = vec![0usize; n + m];
        for &(i, j) in &edges {
            deg[i] += 1;
            deg[n + j] += 1;
        }
        let leaf = edges.iter().position(|&(i, j)| deg[i] == 1 || deg[n + j] == 1)?;
        let (i, j) = edges.swap_remove(leaf);
        let v = if deg[i] == 1 { rem_a[i] } else { rem_b[j] };
        rem_a[i] -= v;
        rem_b[j] -= v;
        out.push((i, j, v));
    }
    // a spanning tree consumes all supplies and demands
    let scale = a.iter().sum::<f64>().max(1.0);
    let ok = rem_a.iter().chain(&rem_b).all(|r| r.abs() <= 1e-9 * scale);
    ok.then_some(out)
}

/// Settings for [`sinkhorn_uot`].
#[derive(Debug, Clone)]
pub struct SinkhornConfig {
    /// Final regularisation; default `1e-3 · mean(C)`.
    pub epsilon_target: Option<f64>,
    /// Iteration cap per annealing stage.
    pub max_iters: usize,
    /// Stop a stage once the sup-norm change of the potentials is below
    /// `tol · (1 + max C)`.
    pub tol: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self { epsilon_target: None, max_iters: 200_000, tol: 1e-11 }
    }
}

#[derive(Debug, Clone)]
pub struct SinkhornResult {
    /// `⟨C, π⟩ + ρ1 KL(π1|a) + ρ2 KL(π2|b)` at the entropic plan.
    pub value: f64,
    /// `ε KL(π | a⊗b)`, reported separately.
    pub entropy: f64,
    pub epsilon: f64,
    pub iterations: usize,
    pub residual: f64,
    /// `(ε, value)` at the end of every annealing stage.
    pub stages: Vec<(f64, f64)>,
}

/// Entropic unbalanced OT with KL marginal penalties, solved in the log
/// domain with ε halved from `mean(C)` down to the target.
///
/// Each sweep performs the two exact block updates followed by the optimal
/// dual translation `(f + λ, g − λ)`, which leaves the entropic term
/// unchanged and removes the slow translation mode.
pub fn sinkhorn_uot(
    a: &[f64],
    b: &[f64],
    cost: &Array2<f64>,
    rho1: f64,
    rho2: f64,
    config: &SinkhornConfig,
) -> Result<SinkhornResult> {
    let (n, m) = (a.len(), b.len());
    if cost.dim() != (n, m) {
        return Err(Error::ShapeMismatch(format!("cost is {:?} for {n} x {m} weights", cost.dim())));
    }
    if n * m > SINKHORN_SIZE_CAP {
        return Err(Error::SizeCap(format!("{n} x {m} exceeds {SINKHORN_SIZE_CAP} cells")));
    }
    for rho in [rho1, rho2] {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::InvalidParameter(format!("rho must be finite and > 0, got {rho}")));
        }
    }
    if a.iter().chain(b).any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidMeasure("weights must be finite and >= 0".into()));
    }
    if !a.iter().any(|&w| w > 0.0) || !b.iter().any(|&w| w > 0.0) {
        return Err(Error::ZeroMass);
    }
    let mean_cost = cost.mean().unwrap_or(0.0);
    let max_cost = cost.iter().copied().fold(0.0, f64::max);
    let target = config.epsilon_target.unwrap_or(1e-3 * mean_cost);
    let target = if target > 0.0 { target } else { 1e-3 };
    let tol = config.tol * (1.0 + max_cost);

    let log_a: Vec<f64> = a.iter().map(|&w| if w > 0.0 { w.ln() } else { f64::NEG_INFINITY }).collect();
    let log_b: Vec<f64> = b.iter().map(|&w| if w > 0.0 { w.ln() } else { f64::NEG_INFINITY }).collect();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];

    let mut schedule = Vec::new();
    let mut eps = mean_cost.max(target);
    while eps > target {
        schedule.push(eps);
        eps *= 0.5;
    }
    schedule.push(target);

    let mut stages = Vec::with_capacity(schedule.len());
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    for &eps in &schedule {
        let tau1 = rho1 / (rho1 + eps);
        let tau2 = rho2 / (rho2 + eps);
        let mut converged = false;
        for _ in 0..config.max_iters {
            iterations += 1;
            let mut delta: f64 = 0.0;
            for i in 0..n {
                let lse = lse(m, |j| log_b[j] + (g[j] - cost[[i, j]]) / eps);
                let new = if lse.is_finite() { -tau1 * eps * lse } else { f[i] };
                delta = delta.max((new - f[i]).abs());
                f[i] = new;
            }
            for j in 0..m {
                let lse = lse(n, |i| log_a[i] + (f[i] - cost[[i, j]]) / eps);
                let new = if lse.is_finite() { -tau2 * eps * lse } else { g[j] };
                delta = delta.max((new - g[j]).abs());
                g[j] = new;
            }
            let la = lse(n, |i| log_a[i] - f[i] / rho1);
            let lb = lse(m, |j| log_b[j] - g[j] / rho2);
            let shift = rho1 * rho2 / (rho1 + rho2) * (la - lb);
            if shift.is_finite() {
                f.iter_mut().for_each(|x| *x += shift);
                g.iter_mut().for_each(|x| *x -= shift);
                delta = delta.max(shift.abs());
            }
            residual = delta;
            if delta <= tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence { iterations, residual, epsilon: eps });
        }
        let (value, _) = primal_terms(&log_a, &log_b, a, b, cost, &f, &g, eps, rho1, rho2);
        stages.push((eps, value));
    }

    let (value, entropy) = primal_terms(&log_a, &log_b, a, b, cost, &f, &g, target, rho1, rho2);
    Ok(SinkhornResult { value, entropy, epsilon: target, iterations, residual, stages })
}

fn lse(len: usize, term: impl Fn(usize) -> f64) -> f64 {
    let mut mx = f64::NEG_INFINITY;
    for k in 0..len {
        mx = mx.max(term(k));
    }
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    let s: f64 = (0..len).map(|k| (term(k) - mx).exp()).sum();
    mx + s.ln()
}

#[allow(clippy::too_many_arguments)]
fn primal_terms(
    log_a: &[f64],
    log_b: &[f64],
    a: &[f64],
    b: &[f64],
    cost: &Array2<f64>,
    f: &[f64],
    g: &[f64],
    eps: f64,
    rho1: f64,
    rho2: f64,
) -> (f64, f64) {
    let (n, m) = (a.len(), b.len());
    let mut transport = 0.0;
    let mut entropy = 0.0;
    let mut row = vec![0.0; n];
    let mut col = vec![0.0; m];
    for i in 0..n {
        for j in 0..m {
            let z = (f[i] + g[j] - cost[[i, j]]) / eps;
            let log_pi = log_a[i] + log_b[j] + z.clamp(-CLAMP, CLAMP);
            if log_pi == f64::NEG_INFINITY {
                continue;
            }
            let pi = log_pi.exp();
            row[i] += pi;
            col[j] += pi;
            transport += pi * cost[[i, j]];
            entropy += pi * z - pi + a[i] * b[j];
        }
    }
    let kl = |p: &[f64], q: &[f64]| -> f64 {
        p.iter().zip(q).map(|(&p, &q)| if p > 0.0 { p * (p / q).ln() - p + q } else { q }).sum()
    };
    let value = transport + rho1 * kl(&row, a) + rho2 * kl(&col, b);
    (value, eps * entropy)
}
