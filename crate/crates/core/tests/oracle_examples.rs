//! Worked examples whose expected values come from the independent oracles
//! (dense LP, entropic Sinkhorn) or from closed forms evaluated here.

mod common;

use common::{cloud, line, match_mass, outlier_toy, rel_err, rng, scale_to_mass};
use ndarray::{array, Array2};
use uslice::barycenter::{barycenter, usot_gradient_wrt_beta, BarycenterProblem, GridMeasure};
use uslice::divergences::kl_divergence;
use uslice::docclass::{accuracy, distance_matrix, knn_predict, DistanceMode};
use uslice::fw::{lambda_star, norm, uot1d};
use uslice::oracle::{
    cost_matrix, cost_matrix_1d, lp_ot, lp_ot_1d, lp_ot_vertex_enumeration, sinkhorn_uot, SinkhornConfig,
};
use uslice::ot1d::{ot1d_duals, ot1d_loss, sliced_ot_loss};
use uslice::slicing::project;
use uslice::suot::{suot, suot_marginals};
use uslice::usot::{usot, usot_marginals, usot_stochastic};
use uslice::{sample_directions, DiscreteMeasure, Measure1D, Potentials, UnbalancedParams};

fn sinkhorn(a: &[f64], b: &[f64], cost: &Array2<f64>, rho1: f64, rho2: f64) -> f64 {
    sinkhorn_uot(a, b, cost, rho1, rho2, &SinkhornConfig::default()).unwrap().value
}

#[test]
fn split_mass_example_matches_vertex_enumeration() {
    let mu = Measure1D::new(vec![0.0, 2.0], vec![0.5, 0.5]).unwrap();
    let nu = Measure1D::dirac(1.0);
    let cost = cost_matrix_1d(mu.positions(), nu.positions(), 1.0);
    let want = lp_ot_vertex_enumeration(mu.weights(), nu.weights(), &cost).unwrap();
    assert!((want - 1.0).abs() < 1e-12);
    assert!((ot1d_loss(&mu, &nu, 1.0).unwrap() - want).abs() < 1e-12);
    let (loss, pot) = ot1d_duals(&mu, &nu, 1.0).unwrap();
    assert!((loss - want).abs() < 1e-12);
    assert!((pot.dual_value(mu.weights(), nu.weights()) - want).abs() < 1e-12);
    assert_eq!(pot.f[0], 0.0);
}

#[test]
fn lp_matches_closed_form_on_200_instances() {
    let mut r = rng(11);
    for k in 0..200 {
        let p = if k % 2 == 0 { 1.0 } else { 2.0 };
        let mu = line(&mut r, 1 + k % 17, 0.05, 1.0);
        let nu = match_mass(&mu, &line(&mut r, 1 + (k * 7) % 13, 0.05, 1.0));
        let exact = lp_ot_1d(&mu, &nu, p).unwrap();
        let fast = ot1d_loss(&mu, &nu, p).unwrap();
        assert!((exact - fast).abs() <= 1e-9 * (1.0 + exact), "instance {k}: {exact} vs {fast}");
    }
}

#[test]
fn sliced_loss_is_mean_of_per_slice_lp() {
    let mut r = rng(3);
    let alpha = cloud(&mut r, 4, 2, 0.1, 1.0);
    let beta = scale_to_mass(&cloud(&mut r, 4, 2, 0.1, 1.0), alpha.mass());
    let dirs = sample_directions(2, 64, 5).unwrap();
    let mut total = 0.0;
    for k in 0..64 {
        let pa = project(&alpha, dirs.direction(k)).unwrap();
        let pb = project(&beta, dirs.direction(k)).unwrap();
        let c = cost_matrix_1d(pa.positions(), pb.positions(), 2.0);
        total += lp_ot(pa.measure.weights(), pb.measure.weights(), &c).unwrap();
    }
    let got = sliced_ot_loss(&alpha, &beta, &dirs, 2.0).unwrap();
    assert!((got - total / 64.0).abs() <= 1e-9, "{got} vs {}", total / 64.0);
}

#[test]
fn directions_are_roughly_isotropic() {
    let dirs = sample_directions(2, 10_000, 0).unwrap();
    let mean = dirs.directions().mean_axis(ndarray::Axis(0)).unwrap();
    assert!(mean.dot(&mean).sqrt() < 0.05);
}

#[test]
fn kl_single_atom_matches_scalar_formula() {
    // ρ (π log(π/α) − π + α) written out for π = 2, α = 1
    let scalar = |pi: f64, a: f64, rho: f64| rho * (pi * (pi / a).ln() - pi + a);
    let got = kl_divergence(&[2.0], &[1.0], 1.0).unwrap();
    assert!((got - scalar(2.0, 1.0, 1.0)).abs() < 1e-15);
    assert!((got - 0.386_294_361_119_890_6).abs() < 1e-12);
}

#[test]
fn norm_splits_mass_geometrically() {
    let alpha = DiscreteMeasure::new(array![[0.0], [1.0]], vec![3.0, 1.0]).unwrap();
    let beta = DiscreteMeasure::new(array![[0.5]], vec![1.0]).unwrap();
    let rho = 0.7;
    // with f = g = 0 the condition 4 e^{−λ/ρ} = e^{λ/ρ} gives λ = ρ ln 2
    let lam = lambda_star(&[0.0, 0.0], alpha.weights(), &[0.0], beta.weights(), rho, rho).unwrap();
    assert!((lam - rho * 2f64.ln()).abs() < 1e-12);
    let (a, b) = norm(&alpha, &beta, &[0.0, 0.0], &[0.0], rho, rho).unwrap();
    assert!((a.mass() - 2.0).abs() < 1e-12);
    assert!((b.mass() - 2.0).abs() < 1e-12);
}

#[test]
fn uot1d_mass_only_agrees_with_sinkhorn() {
    for (rho, b) in [(1.0, 0.25), (0.5, 3.0), (2.0, 1.0)] {
        let mu = Measure1D::dirac(0.0);
        let nu = Measure1D::new(vec![0.0], vec![b]).unwrap();
        let params = UnbalancedParams::kl(rho, rho).unwrap().with_fw_iters(200);
        let (v, _) = uot1d(&mu, &nu, &params).unwrap();
        let closed = rho * (1.0 - b.sqrt()).powi(2);
        assert!((v - closed).abs() <= 1e-9, "{v} vs {closed}");
        let oracle = sinkhorn(&[1.0], &[b], &Array2::zeros((1, 1)), rho, rho);
        assert!((v - oracle).abs() <= 1e-3 * (1.0 + oracle), "{v} vs sinkhorn {oracle}");
    }
}

#[test]
fn uot1d_five_vs_seven_agrees_with_sinkhorn() {
    let mut r = rng(57);
    let mu = line(&mut r, 5, 0.1, 1.0);
    let nu = line(&mut r, 7, 0.1, 1.0);
    let params = UnbalancedParams::kl(1.0, 1.0).unwrap().with_fw_iters(200);
    let (v, _) = uot1d(&mu, &nu, &params).unwrap();
    let cost = cost_matrix_1d(mu.positions(), nu.positions(), 2.0);
    let oracle = sinkhorn(mu.weights(), nu.weights(), &cost, 1.0, 1.0);
    assert!(rel_err(v, oracle) <= 1e-3, "{v} vs {oracle}");
}

#[test]
fn suot_two_by_two_is_mean_of_slice_oracles() {
    let alpha = DiscreteMeasure::new(array![[0.1, 0.2], [0.7, 0.4]], vec![0.6, 0.9]).unwrap();
    let beta = DiscreteMeasure::new(array![[0.3, 0.8], [0.9, 0.1]], vec![1.2, 0.5]).unwrap();
    let params = UnbalancedParams::kl(1.0, 1.0).unwrap().with_projections(16).with_fw_iters(200);
    let dirs = sample_directions(2, 16, 9).unwrap();
    let (v, _) = suot(&alpha, &beta, &dirs, &params).unwrap();
    let mut total = 0.0;
    for k in 0..16 {
        let pa = project(&alpha, dirs.direction(k)).unwrap();
        let pb = project(&beta, dirs.direction(k)).unwrap();
        let c = cost_matrix_1d(pa.positions(), pb.positions(), 2.0);
        total += sinkhorn(pa.measure.weights(), pb.measure.weights(), &c, 1.0, 1.0);
    }
    let want = total / 16.0;
    assert!(rel_err(v, want) <= 1e-3, "{v} vs {want}");
}

#[test]
fn suot_in_one_dimension_is_uot1d() {
    let mut r = rng(21);
    let mu = line(&mut r, 6, 0.1, 1.0);
    let nu = line(&mut r, 4, 0.1, 2.0);
    let to_nd = |m: &Measure1D| {
        DiscreteMeasure::new(
            Array2::from_shape_vec((m.len(), 1), m.positions().to_vec()).unwrap(),
            m.weights().to_vec(),
        )
        .unwrap()
    };
    let params = UnbalancedParams::kl(0.5, 2.0).unwrap().with_projections(7).with_fw_iters(50);
    let dirs = sample_directions(1, 7, 1).unwrap();
    let (s, _) = suot(&to_nd(&mu), &to_nd(&nu), &dirs, &params).unwrap();
    let (u, _) = uot1d(&mu, &nu, &params).unwrap();
    assert!((s - u).abs() <= 1e-9 * (1.0 + u), "{s} vs {u}");
}

#[test]
fn usot_balanced_limit_matches_sot() {
    let mut r = rng(8);
    for _ in 0..5 {
        let alpha = cloud(&mut r, 8, 2, 0.1, 1.0).normalize_to_probability().unwrap();
        let beta = cloud(&mut r, 6, 2, 0.1, 1.0).normalize_to_probability().unwrap();
        let params = UnbalancedParams::kl(1e6, 1e6).unwrap().with_projections(64).with_fw_iters(200);
        let dirs = sample_directions(2, 64, 4).unwrap();
        let (u, _) = usot(&alpha, &beta, &dirs, &params).unwrap();
        let sot = sliced_ot_loss(&alpha, &beta, &dirs, 2.0).unwrap();
        assert!((u - sot).abs() <= 1e-3 * (1.0 + sot), "usot {u} sot {sot}");
    }
}

#[test]
fn usot_three_by_three_is_sandwiched() {
    let mut r = rng(33);
    let alpha = cloud(&mut r, 3, 2, 0.2, 1.5);
    let beta = cloud(&mut r, 3, 2, 0.2, 1.5);
    let params = UnbalancedParams::kl(1.0, 1.0).unwrap().with_projections(32).with_fw_iters(200);
    let dirs = sample_directions(2, 32, 2).unwrap();
    let (u, _) = usot(&alpha, &beta, &dirs, &params).unwrap();
    let (s, _) = suot(&alpha, &beta, &dirs, &params).unwrap();
    let upper = sinkhorn(alpha.weights(), beta.weights(), &cost_matrix(&alpha, &beta, 2.0).unwrap(), 1.0, 1.0);
    assert!(s - 1e-8 <= u, "suot {s} usot {u}");
    assert!(u <= upper + 1e-3, "usot {u} uot {upper}");
}

#[test]
fn stochastic_usot_tracks_fixed_directions() {
    let mut r = rng(90);
    for seed in 0..3 {
        let alpha = cloud(&mut r, 10, 3, 0.1, 1.0);
        let beta = cloud(&mut r, 12, 3, 0.1, 1.0);
        let params = UnbalancedParams::kl(1.0, 1.0).unwrap().with_projections(512).with_seed(seed);
        let dirs = sample_directions(3, 512, seed).unwrap();
        let (fixed, _) = usot(&alpha, &beta, &dirs, &params).unwrap();
        let (stoch, _) = usot_stochastic(&alpha, &beta, &params).unwrap();
        assert!(rel_err(stoch, fixed) <= 5e-2, "{stoch} vs {fixed}");
    }
}

fn max_weight_gap(a: &DiscreteMeasure, b: &DiscreteMeasure) -> f64 {
    a.weights().iter().zip(b.weights()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn marginals_approach_inputs_for_large_rho() {
    let mut r = rng(14);
    let alpha = cloud(&mut r, 7, 2, 0.1, 1.0).normalize_to_probability().unwrap();
    let beta = cloud(&mut r, 9, 2, 0.1, 1.0).normalize_to_probability().unwrap();
    let params = UnbalancedParams::kl(1e6, 1e6).unwrap().with_projections(32).with_fw_iters(50);
    let dirs = sample_directions(2, 32, 0).unwrap();
    let (_, state) = usot(&alpha, &beta, &dirs, &params).unwrap();
    let (p1, p2) = usot_marginals(&state, &alpha, &beta, &params).unwrap();
    assert!(max_weight_gap(&p1, &alpha) <= 1e-4);
    assert!(max_weight_gap(&p2, &beta) <= 1e-4);
    let (_, state) = suot(&alpha, &beta, &dirs, &params).unwrap();
    for (p1, p2) in suot_marginals(&state, &alpha, &beta, &dirs, &params).unwrap() {
        assert!(max_weight_gap(&p1, &alpha) <= 1e-4);
        assert!(max_weight_gap(&p2, &beta) <= 1e-4);
    }
}

#[test]
fn outlier_is_removed_by_both_relaxations() {
    let (alpha, beta) = outlier_toy(7);
    let outlier = alpha.len() - 1;
    let input = alpha.weights()[outlier];
    let params = UnbalancedParams::kl(0.1, 0.1).unwrap().with_projections(100).with_seed(42);
    let dirs = sample_directions(2, 100, 42).unwrap();

    let (_, state) = usot(&alpha, &beta, &dirs, &params).unwrap();
    let (p1, _) = usot_marginals(&state, &alpha, &beta, &params).unwrap();
    assert!(p1.weights()[outlier] < 0.1 * input, "usot keeps {}", p1.weights()[outlier]);

    let (_, state) = suot(&alpha, &beta, &dirs, &params).unwrap();
    let best = suot_marginals(&state, &alpha, &beta, &dirs, &params)
        .unwrap()
        .iter()
        .map(|(p1, _)| p1.weights()[outlier])
        .fold(f64::INFINITY, f64::min);
    assert!(best < 0.1 * input, "suot keeps at least {best} on every slice");
}

fn gaussian_on(grid: &GridMeasure, modes: &[(f64, f64, f64)], s: f64) -> Vec<f64> {
    let w: Vec<f64> = grid
        .points()
        .rows()
        .into_iter()
        .map(|p| {
            modes
                .iter()
                .map(|(cx, cy, m)| m * (-((p[0] - cx).powi(2) + (p[1] - cy).powi(2)) / (2.0 * s * s)).exp())
                .sum()
        })
        .collect();
    let t: f64 = w.iter().sum();
    w.iter().map(|x| x / t).collect()
}

#[test]
fn gradient_vanishes_at_the_input() {
    let grid = GridMeasure::raster(5, 5).unwrap();
    let beta = grid.with_weights(gaussian_on(&grid, &[(0.4, 0.6, 1.0)], 0.2)).unwrap();
    let params = UnbalancedParams::kl(1.0, 1.0).unwrap().with_projections(32).with_fw_iters(50);
    let dirs = sample_directions(2, 32, 0).unwrap();
    let grad = usot_gradient_wrt_beta(beta.as_measure(), &beta, &dirs, &params).unwrap();
    assert!(grad.iter().all(|g| g.abs() <= 1e-9));
}

#[test]
fn gradient_tends_to_potential_for_large_rho2() {
    let mut r = rng(5);
    let grid = GridMeasure::raster(3, 4).unwrap();
    let alpha = cloud(&mut r, 6, 2, 0.1, 1.0).normalize_to_probability().unwrap();
    let params = UnbalancedParams::kl(1.0, 1e7).unwrap().with_projections(16).with_fw_iters(40);
    let dirs = sample_directions(2, 16, 3).unwrap();
    let grad = usot_gradient_wrt_beta(&alpha, &grid, &dirs, &params).unwrap();
    let (_, state) = usot(&alpha, grid.as_measure(), &dirs, &params).unwrap();
    let Potentials::Averaged(pot) = state.potentials else { panic!("averaged potentials expected") };
    for (gr, g) in grad.iter().zip(&pot.g) {
        assert!((gr - g).abs() <= 1e-4, "{gr} vs {g}");
    }
}

#[test]
fn gradient_matches_finite_differences() {
    use rand::Rng;
    let mut r = rng(101);
    let points = Array2::from_shape_fn((10, 2), |_| r.random::<f64>());
    let grid = GridMeasure::uniform(points).unwrap();
    let params = UnbalancedParams::kl(1.0, 1.0).unwrap().with_projections(32).with_fw_iters(1000);
    let dirs = sample_directions(2, 32, 17).unwrap();
    for _ in 0..2 {
        let alpha = cloud(&mut r, 6, 2, 0.1, 1.0).normalize_to_probability().unwrap();
        let base: Vec<f64> = (0..10).map(|_| r.random_range(0.5..1.5)).collect();
        let s: f64 = base.iter().sum();
        let beta = grid.with_weights(base.iter().map(|x| x / s).collect()).unwrap();
        // random tangent direction of the simplex
        let mut v: Vec<f64> = (0..10).map(|_| r.random_range(-1.0..1.0)).collect();
        let mean = v.iter().sum::<f64>() / 10.0;
        v.iter_mut().for_each(|x| *x -= mean);
        let grad = usot_gradient_wrt_beta(&alpha, &beta, &dirs, &params).unwrap();
        let predicted: f64 = grad.iter().zip(&v).map(|(g, x)| g * x).sum();
        let h = 1e-4;
        let shifted = |sign: f64| {
            let w: Vec<f64> = beta.weights().iter().zip(&v).map(|(b, x)| b + sign * h * x).collect();
            usot(&alpha, &beta.as_measure().with_weights(w).unwrap(), &dirs, &params).unwrap().0
        };
        let fd = (shifted(1.0) - shifted(-1.0)) / (2.0 * h);
        assert!(rel_err(predicted, fd) <= 1e-3, "{predicted} vs {fd}");
    }
}

#[test]
fn interpolation_endpoints_recover_inputs() {
    let grid = GridMeasure::raster(8, 8).unwrap();
    let a = gaussian_on(&grid, &[(0.3, 0.3, 1.0)], 0.12);
    let b = gaussian_on(&grid, &[(0.7, 0.6, 1.0)], 0.12);
    let inputs = vec![
        grid.with_weights(a.clone()).unwrap().as_measure().clone(),
        grid.with_weights(b.clone()).unwrap().as_measure().clone(),
    ];
    let params = UnbalancedParams::kl(1e4, 1e4).unwrap().with_projections(32);
    for (omegas, target) in [(vec![1.0, 0.0], &a), (vec![0.0, 1.0], &b)] {
        let out = barycenter(&BarycenterProblem::new(inputs.clone(), omegas, grid.clone(), params.clone())).unwrap();
        let tv = out.tv_distance(target);
        assert!(tv <= 0.05, "tv {tv}");
    }
}

#[test]
fn small_rho1_leaves_the_minor_mode_behind() {
    // ρ1 small lets the barycenter drop mass of the data; the minor far mode
    // is then cheaper to ignore than to transport.
    let grid = GridMeasure::raster(12, 12).unwrap();
    let input = gaussian_on(&grid, &[(0.25, 0.25, 0.85), (0.8, 0.8, 0.15)], 0.06);
    let params = UnbalancedParams::kl(0.01, 1e4).unwrap().with_projections(32);
    let mut problem = BarycenterProblem::new(
        vec![grid.with_weights(input).unwrap().as_measure().clone()],
        vec![1.0],
        grid.clone(),
        params,
    );
    problem.iters = 300;
    let out = barycenter(&problem).unwrap();
    let near = |cx: f64, cy: f64| -> f64 {
        out.points()
            .rows()
            .into_iter()
            .zip(out.weights())
            .filter(|(p, _)| ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt() <= 0.15)
            .map(|(_, w)| w)
            .sum()
    };
    let (dominant, minor) = (near(0.25, 0.25), near(0.8, 0.8));
    assert!(dominant > 2.0 * minor, "dominant {dominant} minor {minor}");
}

#[test]
fn separable_documents_are_classified_perfectly() {
    use rand_distr::{Distribution, Normal};
    let mut r = rng(404);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut docs = Vec::new();
    let mut labels = Vec::new();
    for k in 0..20 {
        let shift = if k % 2 == 0 { 0.0 } else { 10.0 };
        let n = 5 + k % 3;
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![normal.sample(&mut r) + shift, normal.sample(&mut r)]).collect();
        docs.push(DiscreteMeasure::from_rows(&rows, vec![1.0; n]).unwrap());
        labels.push(if k % 2 == 0 { "a".to_string() } else { "b".to_string() });
    }
    let params = UnbalancedParams::kl(1.0, 1.0).unwrap().with_projections(50).with_fw_iters(10);
    let matrix = distance_matrix(&docs, DistanceMode::Usot, &params).unwrap();
    let train: Vec<usize> = (0..12).collect();
    let test: Vec<usize> = (12..20).collect();
    let predicted = knn_predict(&matrix, &labels, &train, &test, 3).unwrap();
    let truth: Vec<String> = test.iter().map(|&i| labels[i].clone()).collect();
    assert_eq!(accuracy(&predicted, &truth), 1.0);
    for i in 0..20 {
        assert!(matrix[[i, i]].abs() <= 1e-9);
    }
}
