//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so the output stays readable; exits nonzero if any check fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use countmap::baselines::{run_bench, summarize, BenchResult, BenchSetup, BenchSummary, Estimator, WeightChoice};
use countmap::cv::{log10_axis, select_weights, square_grid, thin_counts, CvPlan};
use countmap::graph::Laplacian;
use countmap::grid::CountVector;
use countmap::model::{PenalizedPoisson, PopulationField};
use countmap::optimizer::{fit, initial_guess, OptimizerConfig, Termination};
use countmap::parallel::Execution;
use countmap::transition::TransitionMatrix;
use rand::Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_secs: f64, detail: String) -> Outcome {
    let secs = elapsed.as_secs_f64();
    check(secs < limit_secs, format!("{detail}; {secs:.1}s of {limit_secs}s"))
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for k in 0..20u64 {
        let mut r = rng(1000 + k);
        let n = r.random_range(2..=50);
        let m = r.random_range(n..=80);
        let lambda = [0.0, 0.1, 10.0][k as usize % 3];
        let p = random_transition(&mut r, m, n, 2);
        let l = random_laplacian(&mut r, n, n / 2);
        let psi = random_psi(&mut r, n);
        let x = random_counts(&mut r, m);
        let theta = random_theta(&mut r, n);
        let problem = PenalizedPoisson::new(&psi, &p, &x, &l, lambda).map_err(|e| e.to_string())?;
        let g = problem.gradient(&theta).map_err(|e| e.to_string())?;
        worst = worst.max(max_scaled_error(&g, &finite_difference(&problem, &theta)));
    }
    if worst >= 1e-5 {
        return Err(format!("max relative error {worst:.2e} >= 1e-5"));
    }
    within(
        start.elapsed(),
        10.0,
        format!("20 instances, max relative error {worst:.2e}"),
    )
}

/// Objective of a two-source, three-detector instance evaluated directly.
struct Tiny {
    p: [[f64; 2]; 3],
    x: [f64; 3],
    w: f64,
}

impl Tiny {
    fn value(&self, e0: f64, e1: f64, t0: f64, t1: f64) -> f64 {
        let mut v = 0.5 * self.w * (t0 - t1) * (t0 - t1);
        for i in 0..3 {
            let h = self.p[i][0] * e0 + self.p[i][1] * e1;
            v += h - self.x[i] * h.ln();
        }
        v
    }

    /// Minimum over `[−5, 5]²` at spacing `1e-3`.
    fn grid_minimum(&self) -> f64 {
        let axis: Vec<f64> = (0..=10_000).map(|k| -5.0 + 1e-3 * k as f64).collect();
        let exps: Vec<f64> = axis.iter().map(|t| t.exp()).collect();
        let mut best = f64::INFINITY;
        for (a, &ea) in axis.iter().zip(&exps) {
            for (b, &eb) in axis.iter().zip(&exps) {
                best = best.min(self.value(ea, eb, *a, *b));
            }
        }
        best
    }
}

fn tiny_instance_oracle() -> Outcome {
    let start = Instant::now();
    let config = OptimizerConfig::default();
    let mut worst: f64 = 0.0;
    for k in 0..3u64 {
        let mut r = rng(2000 + k);
        let tp = random_transition(&mut r, 3, 2, 1);
        let mut p = [[0.0; 2]; 3];
        for (i, j, v) in tp.matrix().triplets() {
            p[i][j] = v;
        }
        let xc: Vec<u64> = (0..3).map(|_| r.random_range(1..10)).collect();
        let tiny = Tiny {
            p,
            x: [xc[0] as f64, xc[1] as f64, xc[2] as f64],
            w: [0.5, 1.0, 3.0][k as usize],
        };
        let psi = PopulationField::from_log(vec![0.0, 0.0]).map_err(|e| e.to_string())?;
        let l = Laplacian::from_edges(2, [(0, 1, tiny.w)]).map_err(|e| e.to_string())?;
        let counts = CountVector::new(xc);
        let problem = PenalizedPoisson::new(&psi, &tp, &counts, &l, 1.0).map_err(|e| e.to_string())?;
        let result = fit(&[0.0, 0.0], &problem, &config).map_err(|e| e.to_string())?;
        if result.theta.iter().any(|t| t.abs() > 5.0) {
            return Err(format!("instance {k}: minimizer {:?} outside the grid", result.theta));
        }
        let grid = tiny.grid_minimum();
        if result.objective > grid + 1e-9 {
            return Err(format!(
                "instance {k}: fit {} above grid minimum {grid}",
                result.objective
            ));
        }
        worst = worst.max(grid - result.objective);
    }
    if worst >= 1e-3 {
        return Err(format!("grid minimum exceeds fit by {worst:.2e}"));
    }
    within(start.elapsed(), 60.0, format!("3 instances, largest gap {worst:.2e}"))
}

fn scalar_closed_form() -> Outcome {
    let mut r = rng(3000);
    let n = 200;
    let z: Vec<u64> = (0..n).map(|_| r.random_range(1..1000)).collect();
    let psi = PopulationField::from_counts(&z, 0.5).map_err(|e| e.to_string())?;
    let x = random_counts(&mut r, n);
    let p = TransitionMatrix::identity(n);
    let l = random_laplacian(&mut r, n, 20);
    let problem = PenalizedPoisson::new(&psi, &p, &x, &l, 0.0).map_err(|e| e.to_string())?;
    let init = initial_guess(&x, &p, &psi, 1e-4).map_err(|e| e.to_string())?;
    let result = fit(&init.theta, &problem, &OptimizerConfig::default()).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    let mut bins = 0;
    for j in 0..n {
        let c = x.as_slice()[j] as f64;
        if c > 0.0 {
            let expected = c / z[j] as f64;
            worst = worst.max((result.intensity[j] - expected).abs() / expected);
            bins += 1;
        }
    }
    check(worst < 1e-6, format!("{bins} bins, max relative error {worst:.2e}"))
}

fn structural_invariants(setup: &BenchSetup) -> Outcome {
    let p = setup.transition.matrix();
    if (p.nrows(), p.ncols()) != (2376, 1176) {
        return Err(format!("P is {}x{}", p.nrows(), p.ncols()));
    }
    let col_err = p.column_sums().iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
    let l = setup.laplacian(0.7, 1.3).map_err(|e| e.to_string())?;
    let symmetric = l.matrix().is_symmetric(0.0);
    let row_err = l.matrix().row_sums().iter().map(|s| s.abs()).fold(0.0, f64::max);
    let mut r = rng(4000);
    let mut min_quad = f64::INFINITY;
    for _ in 0..1000 {
        let theta: Vec<f64> = (0..l.dim()).map(|_| r.random_range(-3.0..3.0)).collect();
        min_quad = min_quad.min(2.0 * l.penalty_matrix_form(&theta).map_err(|e| e.to_string())?);
    }
    check(
        col_err <= 1e-12 && symmetric && row_err <= 1e-12 && min_quad >= 0.0,
        format!(
            "column sums within {col_err:.1e}, symmetric {symmetric}, |L·1| {row_err:.1e}, min θᵀLθ over 1000 draws {min_quad:.3}"
        ),
    )
}

fn decade_plan() -> CvPlan {
    CvPlan {
        holdout_fraction: 0.2,
        num_splits: 3,
        grid: square_grid(&log10_axis(-3.0, 3.0, 1.0).expect("static axis")),
        seed: 0,
        execution: Execution::Parallel,
    }
}

const BENCH_SEEDS: std::ops::Range<u64> = 0..20;

fn bench(setup: &BenchSetup) -> Result<(Vec<BenchResult>, BenchSummary), String> {
    let seeds: Vec<u64> = BENCH_SEEDS.collect();
    let results = run_bench(
        setup,
        &seeds,
        &WeightChoice::CrossValidate(decade_plan()),
        &OptimizerConfig::default(),
        Execution::Parallel,
    )
    .map_err(|e| e.to_string())?;
    let summary = summarize(&results).map_err(|e| e.to_string())?;
    Ok((results, summary))
}

fn table_ordering(summary: &BenchSummary, elapsed: Duration) -> Outcome {
    use Estimator::*;
    let m = |e| summary.median(e);
    let medians = Estimator::ALL
        .iter()
        .map(|&e| format!("{}={:.3}", e.label().split('_').next().unwrap_or(""), m(e)))
        .collect::<Vec<_>>()
        .join(" ");
    let relations = [
        ("vi<v", m(PenalizedFull) < m(PenalizedDeclared)),
        ("vi<iii", m(PenalizedFull) < m(PenalizedPrecise)),
        ("v<=iii", m(PenalizedDeclared) <= m(PenalizedPrecise)),
        ("iii<iv", m(PenalizedPrecise) < m(PenalizedMerged)),
        ("iv<i", m(PenalizedMerged) < m(ScaledPrecise)),
        ("i<ii", m(ScaledPrecise) < m(PrecisePerPopulation)),
    ];
    let worst_regularized = [PenalizedPrecise, PenalizedDeclared, PenalizedFull]
        .map(m)
        .into_iter()
        .fold(0.0, f64::max);
    let best_raw = m(ScaledPrecise).min(m(PrecisePerPopulation));
    let gap = best_raw / worst_regularized;
    let failed: Vec<&str> = relations.iter().filter(|r| !r.1).map(|r| r.0).collect();
    let detail = format!(
        "{} seeds, medians {medians}, raw/regularized gap {gap:.1}x{}",
        summary.replicates,
        if failed.is_empty() {
            String::new()
        } else {
            format!(", violated: {}", failed.join(" "))
        }
    );
    if !failed.is_empty() || gap < 10.0 {
        return Err(detail);
    }
    within(elapsed, 1800.0, detail)
}

fn desk_scale_runtime(setup: &BenchSetup) -> Outcome {
    let counts = setup.sample(7).map_err(|e| e.to_string())?;
    let l = setup.laplacian(1.0, 1.0).map_err(|e| e.to_string())?;
    let config = OptimizerConfig::default();
    let start = Instant::now();
    let problem =
        PenalizedPoisson::new(&setup.population, &setup.transition, &counts, &l, 1.0).map_err(|e| e.to_string())?;
    let init =
        initial_guess(&counts, &setup.transition, &setup.population, config.init_floor).map_err(|e| e.to_string())?;
    let result = fit(&init.theta, &problem, &config).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    if result.termination != Termination::Converged {
        return Err(format!("terminated with {:?}", result.termination));
    }
    within(
        elapsed,
        60.0,
        format!("n=1176 m=2376, {} iterations", result.iterations),
    )
}

fn thinning(setup: &BenchSetup) -> Outcome {
    let mut r = rng(7000);
    let x = CountVector::new((0..500).map(|_| r.random_range(0..200)).collect());
    let total = x.total() as f64;
    let p = 0.2;
    let sigma = (total * p * (1.0 - p)).sqrt();
    let mut inside = 0;
    for seed in 0..1000u64 {
        let (train, holdout) = thin_counts(&x, p, seed).map_err(|e| e.to_string())?;
        let exact = x
            .as_slice()
            .iter()
            .zip(train.as_slice().iter().zip(holdout.as_slice()))
            .all(|(a, (b, c))| a == &(b + c));
        if !exact {
            return Err(format!("seed {seed}: train + holdout differs from the counts"));
        }
        if (holdout.total() as f64 - p * total).abs() <= 3.0 * sigma {
            inside += 1;
        }
    }

    let counts = setup.sample(3).map_err(|e| e.to_string())?;
    let plan = CvPlan {
        grid: vec![(0.1, 100.0), (1.0, 1.0), (10.0, 10.0)],
        num_splits: 2,
        seed: 42,
        ..decade_plan()
    };
    let run = || {
        select_weights(
            &counts,
            &setup.population,
            &setup.transition,
            |ws, wt| setup.laplacian(ws, wt),
            &plan,
            &OptimizerConfig::default(),
        )
    };
    let a = run().map_err(|e| e.to_string())?;
    let b = run().map_err(|e| e.to_string())?;
    let deterministic = a == b;
    check(
        inside >= 990 && deterministic,
        format!(
            "partition exact, {inside}/1000 holdout totals within 3σ, repeated selection identical: {deterministic}"
        ),
    )
}

fn error_vs_events(setup: &BenchSetup, base: &BenchSummary) -> Outcome {
    let quadrupled = setup.scaled(4.0).map_err(|e| e.to_string())?;
    let (_, summary) = bench(&quadrupled)?;
    let (before, after) = (
        base.median(Estimator::PenalizedFull),
        summary.median(Estimator::PenalizedFull),
    );
    check(
        after < before,
        format!(
            "median (vi) error {before:.4} at 1x, {after:.4} at 4x expected counts over {} seeds",
            summary.replicates
        ),
    )
}

fn report(n: usize, outcome: &Outcome) -> bool {
    match outcome {
        Ok(detail) => println!("criterion {n}: PASS {detail}"),
        Err(detail) => println!("criterion {n}: FAIL {detail}"),
    }
    outcome.is_ok()
}

fn main() -> ExitCode {
    let setup = match BenchSetup::bundled() {
        Ok(s) => s,
        Err(e) => {
            println!("bundled setup failed: {e}");
            return ExitCode::FAILURE;
        }
    };
    let mut all = true;
    all &= report(1, &gradient_correctness());
    all &= report(2, &tiny_instance_oracle());
    all &= report(3, &scalar_closed_form());
    all &= report(4, &structural_invariants(&setup));

    let start = Instant::now();
    let base = bench(&setup);
    let elapsed = start.elapsed();
    match &base {
        Ok((_, summary)) => all &= report(5, &table_ordering(summary, elapsed)),
        Err(e) => all &= report(5, &Err(e.clone())),
    }
    all &= report(6, &desk_scale_runtime(&setup));
    all &= report(7, &thinning(&setup));
    match &base {
        Ok((_, summary)) => all &= report(8, &error_vs_events(&setup, summary)),
        Err(e) => all &= report(8, &Err(e.clone())),
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
