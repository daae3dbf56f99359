mod common;

use common::*;
use countmap::baselines::BenchSetup;
use countmap::graph::Laplacian;
use countmap::grid::CountVector;
use countmap::model::{PenalizedPoisson, PopulationField};
use countmap::optimizer::{fit, fit_from_counts, initial_guess, least_squares_min_norm, OptimizerConfig, Termination};
use countmap::transition::TransitionMatrix;
use rand::Rng;

#[test]
fn scalar_mle_is_the_count() {
    let p = TransitionMatrix::identity(1);
    let psi = PopulationField::from_log(vec![0.0]).unwrap();
    let l = Laplacian::from_edges(1, []).unwrap();
    let x = CountVector::new(vec![5]);
    let problem = PenalizedPoisson::new(&psi, &p, &x, &l, 0.0).unwrap();
    let r = fit(&[0.0], &problem, &OptimizerConfig::default()).unwrap();
    assert!((r.theta[0] - 5f64.ln()).abs() < 1e-6);
    assert_eq!(r.termination, Termination::Converged);
}

#[test]
fn identity_transition_recovers_rate_per_population() {
    let mut r = rng(11);
    let n = 30;
    let p = TransitionMatrix::identity(n);
    let z: Vec<u64> = (0..n).map(|_| r.random_range(1..500)).collect();
    let psi = PopulationField::from_counts(&z, 0.5).unwrap();
    let x = random_counts(&mut r, n);
    let l = random_laplacian(&mut r, n, 5);
    let problem = PenalizedPoisson::new(&psi, &p, &x, &l, 0.0).unwrap();
    let result = fit_from_counts(&problem, &x, &psi, &OptimizerConfig::default()).unwrap();
    for j in 0..n {
        let c = x.as_slice()[j] as f64;
        if c > 0.0 {
            let expected = c / z[j] as f64;
            assert!((result.intensity[j] - expected).abs() <= 1e-6 * expected, "{j}");
        }
    }
}

/// Direct evaluation of the 2-source, 3-detector objective with a single
/// edge, written out by hand.
fn tiny_objective(p: &[[f64; 2]; 3], x: &[f64; 3], w: f64, t0: f64, t1: f64) -> f64 {
    let (e0, e1) = (t0.exp(), t1.exp());
    let mut v = 0.5 * w * (t0 - t1) * (t0 - t1);
    for i in 0..3 {
        let h = p[i][0] * e0 + p[i][1] * e1;
        v += h - x[i] * h.ln();
    }
    v
}

#[test]
fn tiny_instance_matches_coarse_grid_search() {
    let mut r = rng(12);
    let tp = random_transition(&mut r, 3, 2, 1);
    let mut p = [[0.0; 2]; 3];
    for (i, j, v) in tp.matrix().triplets() {
        p[i][j] = v;
    }
    let xc = [r.random_range(1..8), r.random_range(1..8), r.random_range(1..8)];
    let x = xc.map(|c| c as f64);
    let w = 0.8;
    let psi = PopulationField::from_log(vec![0.0, 0.0]).unwrap();
    let l = Laplacian::from_edges(2, [(0, 1, w)]).unwrap();
    let counts = CountVector::new(xc.to_vec());
    let problem = PenalizedPoisson::new(&psi, &tp, &counts, &l, 1.0).unwrap();
    let result = fit(&[0.0, 0.0], &problem, &OptimizerConfig::default()).unwrap();
    assert!((result.objective - tiny_objective(&p, &x, w, result.theta[0], result.theta[1])).abs() < 1e-12);

    let mut best = f64::INFINITY;
    for a in 0..=1000 {
        for b in 0..=1000 {
            let v = tiny_objective(&p, &x, w, -5.0 + 0.01 * a as f64, -5.0 + 0.01 * b as f64);
            best = best.min(v);
        }
    }
    assert!(result.objective <= best + 1e-12);
    assert!(best - result.objective < 1e-2);
}

#[test]
fn least_squares_recovers_consistent_system() {
    let mut r = rng(13);
    let (m, n) = (60, 25);
    let p = random_transition(&mut r, m, n, 4);
    let eta: Vec<f64> = (0..n).map(|_| r.random_range(0.5..20.0)).collect();
    let b = p.matrix().mul_vec(&eta);
    let ls = least_squares_min_norm(p.matrix(), &b, 10 * n + 100, 1e-14);
    assert!(ls.converged);
    for (a, e) in ls.solution.iter().zip(&eta) {
        assert!((a - e).abs() <= 1e-6 * e, "{a} vs {e}");
    }
}

#[test]
fn paper_scale_fit_converges_monotonically() {
    let setup = BenchSetup::bundled().unwrap();
    let counts = setup.sample(7).unwrap();
    let l = setup.laplacian(0.1, 100.0).unwrap();
    let config = OptimizerConfig::default();
    let problem = PenalizedPoisson::new(&setup.population, &setup.transition, &counts, &l, 1.0).unwrap();
    let init = initial_guess(&counts, &setup.transition, &setup.population, config.init_floor).unwrap();
    let result = fit(&init.theta, &problem, &config).unwrap();
    assert_eq!(result.termination, Termination::Converged);
    assert!(result.grad_inf_norm <= config.grad_tol);
    assert!(result.objective < result.initial_objective);
    for pair in result.objective_trace.windows(2) {
        assert!(pair[1] <= pair[0]);
    }
    assert!(result.intensity.iter().all(|f| f.is_finite() && *f > 0.0));
}
