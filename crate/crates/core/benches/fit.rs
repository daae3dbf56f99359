use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use countmap::baselines::{run_bench, BenchSetup, WeightChoice};
use countmap::cv::{log10_axis, select_weights, square_grid, CvPlan};
use countmap::model::PenalizedPoisson;
use countmap::optimizer::{fit, initialize_theta, OptimizerConfig};
use countmap::parallel::Execution;

fn paper_scale_fit(c: &mut Criterion) {
    let setup = BenchSetup::bundled().unwrap();
    let counts = setup.sample(0).unwrap();
    let laplacian = setup.laplacian(0.1, 100.0).unwrap();
    let config = OptimizerConfig::default();
    let problem = PenalizedPoisson::new(&setup.population, &setup.transition, &counts, &laplacian, 1.0).unwrap();
    let theta0 = initialize_theta(&counts, &setup.transition, &setup.population, config.init_floor).unwrap();
    c.bench_function("fit_1176x2376", |b| b.iter(|| fit(&theta0, &problem, &config).unwrap()));
}

fn execution_modes(c: &mut Criterion) {
    let setup = BenchSetup::bundled().unwrap();
    let counts = setup.sample(1).unwrap();
    let config = OptimizerConfig::default();
    let grid = square_grid(&log10_axis(-2.0, 2.0, 2.0).unwrap());

    let mut group = c.benchmark_group("cv_9x2");
    group.sample_size(10);
    for execution in [Execution::Sequential, Execution::Parallel] {
        let plan = CvPlan {
            holdout_fraction: 0.2,
            num_splits: 2,
            grid: grid.clone(),
            seed: 3,
            execution,
        };
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{execution:?}")),
            &plan,
            |b, plan| {
                b.iter(|| {
                    select_weights(
                        &counts,
                        &setup.population,
                        &setup.transition,
                        |ws, wt| setup.laplacian(ws, wt),
                        plan,
                        &config,
                    )
                    .unwrap()
                })
            },
        );
    }
    group.finish();

    let mut group = c.benchmark_group("bench_4_seeds");
    group.sample_size(10);
    let weights = WeightChoice::Fixed {
        spatial: 0.1,
        temporal: 100.0,
    };
    let seeds = [0, 1, 2, 3];
    for execution in [Execution::Sequential, Execution::Parallel] {
        group.bench_function(BenchmarkId::from_parameter(format!("{execution:?}")), |b| {
            b.iter(|| run_bench(&setup, &seeds, &weights, &config, execution).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, paper_scale_fit, execution_modes);
criterion_main!(benches);
