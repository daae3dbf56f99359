//! The six-estimator comparison on synthetic data with known truth.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::{Inputs, RunConfig};
use crate::cv::{select_weights, CvPlan};
use crate::error::{Error, Result};
use crate::graph::{build_laplacian, AdjacencySpec, Laplacian};
use crate::grid::{CountVector, DetectorBin, DetectorKind, DetectorLayout, SourceGrid};
use crate::model::{PenalizedPoisson, PopulationField, DEFAULT_POPULATION_FLOOR};
use crate::optimizer::{fit, initialize_theta, OptimizerConfig};
use crate::parallel::{map_indexed, Execution};
use crate::synthetic::{calibrate_amplitude, generate_truth, sample_counts, Centroids, SyntheticSpec};
use crate::transition::{KindFractions, TransitionMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Estimator {
    /// `x⁽¹⁾_j / (ε₁ · mean z⁽¹⁾)`.
    #[serde(rename = "i_scaled_precise")]
    ScaledPrecise,
    /// `x⁽¹⁾_j / (ε₁ · z⁽¹⁾_j)`.
    #[serde(rename = "ii_precise_per_population")]
    PrecisePerPopulation,
    /// Penalized fit on precise counts only.
    #[serde(rename = "iii_penalized_precise")]
    PenalizedPrecise,
    /// Penalized fit on `x⁽¹⁾ + x⁽²⁾` treated as precise.
    #[serde(rename = "iv_penalized_merged")]
    PenalizedMerged,
    /// Penalized fit on precise and self-declared counts.
    #[serde(rename = "v_penalized_declared")]
    PenalizedDeclared,
    /// Penalized fit on all three kinds.
    #[serde(rename = "vi_penalized_full")]
    PenalizedFull,
}

impl Estimator {
    pub const ALL: [Estimator; 6] = [
        Estimator::ScaledPrecise,
        Estimator::PrecisePerPopulation,
        Estimator::PenalizedPrecise,
        Estimator::PenalizedMerged,
        Estimator::PenalizedDeclared,
        Estimator::PenalizedFull,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Estimator::ScaledPrecise => "i_scaled_precise",
            Estimator::PrecisePerPopulation => "ii_precise_per_population",
            Estimator::PenalizedPrecise => "iii_penalized_precise",
            Estimator::PenalizedMerged => "iv_penalized_merged",
            Estimator::PenalizedDeclared => "v_penalized_declared",
            Estimator::PenalizedFull => "vi_penalized_full",
        }
    }

    pub fn is_penalized(self) -> bool {
        !matches!(self, Estimator::ScaledPrecise | Estimator::PrecisePerPopulation)
    }
}

/// `‖f − f̂‖² / ‖f‖²`.
pub fn relative_error(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    Error::check_len("estimate", truth.len(), estimate.len())?;
    let norm: f64 = truth.iter().map(|f| f * f).sum();
    if norm <= 0.0 {
        return Err(Error::validation("truth", "must have positive norm"));
    }
    let diff: f64 = truth.iter().zip(estimate).map(|(f, e)| (f - e).powi(2)).sum();
    Ok(diff / norm)
}

/// Everything fixed across replicates: grid, transition, population and truth.
#[derive(Clone, Debug)]
pub struct BenchSetup {
    pub grid: SourceGrid,
    pub layout: DetectorLayout,
    pub adjacency: AdjacencySpec,
    pub fractions: KindFractions,
    pub transition: TransitionMatrix,
    pub z1: Vec<u64>,
    pub population: PopulationField,
    pub spec: SyntheticSpec,
    pub truth: Vec<f64>,
}

impl BenchSetup {
    /// Calibrates `spec` so the expected total count is `target_total`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid: SourceGrid,
        adjacency: AdjacencySpec,
        centroids: &Centroids,
        z1: Vec<u64>,
        transition: TransitionMatrix,
        fractions: KindFractions,
        spec: &SyntheticSpec,
        target_total: f64,
    ) -> Result<Self> {
        Error::check_len("population", grid.len(), z1.len())?;
        let layout = DetectorLayout::three_kind(&grid);
        Error::check_len("transition rows", layout.len(), transition.rows())?;
        let population = PopulationField::from_counts(&z1, DEFAULT_POPULATION_FLOOR)?;
        let spec = calibrate_amplitude(spec, &grid, centroids, &population, target_total)?;
        let truth = generate_truth(&spec, &grid, centroids)?;
        Ok(BenchSetup {
            grid,
            layout,
            adjacency,
            fractions,
            transition,
            z1,
            population,
            spec,
            truth,
        })
    }

    /// The bundled 49-region, 24-hour setup with two modes at WA and NY and
    /// expected total count `56 + 1106 + 1030`.
    pub fn bundled() -> Result<Self> {
        let cfg = RunConfig::default();
        Inputs::load(&cfg)?.bench_setup(&cfg)
    }

    /// Same setup with the truth multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::validation("scale", format!("{factor} must be positive")));
        }
        let mut out = self.clone();
        out.spec.amplitude *= factor;
        out.truth.iter_mut().for_each(|f| *f *= factor);
        Ok(out)
    }

    /// Expected counts per detector kind.
    pub fn expected_kind_totals(&self) -> [f64; 3] {
        let eta: Vec<f64> = self
            .truth
            .iter()
            .zip(self.population.population())
            .map(|(f, g)| f * g)
            .collect();
        let h = self.transition.matrix().mul_vec(&eta);
        let mut totals = [0.0; 3];
        for (bin, v) in self.layout.bins().iter().zip(h) {
            totals[bin.kind.number() as usize - 1] += v;
        }
        totals
    }

    pub fn sample(&self, seed: u64) -> Result<CountVector> {
        sample_counts(&self.truth, &self.population, &self.transition, seed)
    }

    pub fn laplacian(&self, spatial_weight: f64, temporal_weight: f64) -> Result<Laplacian> {
        build_laplacian(&self.grid, &self.adjacency, spatial_weight, temporal_weight)
    }
}

/// Estimates from one count vector.
#[derive(Clone, Debug)]
pub struct BaselineRun {
    pub estimates: Vec<(Estimator, Vec<f64>)>,
    /// Source bins with `z⁽¹⁾ = 0`, where estimator (ii) emits 0.
    pub zero_population_bins: Vec<usize>,
}

impl BaselineRun {
    pub fn estimate(&self, estimator: Estimator) -> &[f64] {
        &self
            .estimates
            .iter()
            .find(|(e, _)| *e == estimator)
            .expect("all estimators present")
            .1
    }
}

/// Counts at the self-declared bin sharing each precise bin's region and slot.
fn merged_counts(layout: &DetectorLayout, precise_rows: &[usize], counts: &CountVector) -> Result<CountVector> {
    precise_rows
        .iter()
        .map(|&i| {
            let bin = layout.bin(i);
            let twin = layout
                .index_of(&DetectorBin {
                    kind: DetectorKind::SelfDeclared,
                    ..bin
                })
                .ok_or_else(|| Error::validation("detector layout", format!("no self-declared twin for {bin:?}")))?;
            Ok(counts.as_slice()[i] + counts.as_slice()[twin])
        })
        .collect::<Result<Vec<_>>>()
        .map(CountVector::new)
}

fn select(counts: &CountVector, rows: &[usize]) -> CountVector {
    CountVector::new(rows.iter().map(|&i| counts.as_slice()[i]).collect())
}

fn penalized(
    setup: &BenchSetup,
    transition: &TransitionMatrix,
    counts: &CountVector,
    laplacian: &Laplacian,
    config: &OptimizerConfig,
) -> Result<Vec<f64>> {
    let problem = PenalizedPoisson::new(&setup.population, transition, counts, laplacian, 1.0)?;
    let theta0 = initialize_theta(counts, transition, &setup.population, config.init_floor)?;
    Ok(fit(&theta0, &problem, config)?.intensity)
}

/// Computes all six estimates of the truth from `counts`, fitting the
/// penalized ones with the given graph.
pub fn run_baselines(
    setup: &BenchSetup,
    counts: &CountVector,
    laplacian: &Laplacian,
    config: &OptimizerConfig,
) -> Result<BaselineRun> {
    Error::check_len("counts", setup.layout.len(), counts.len())?;
    let eps1 = setup.fractions.precise;
    let eps2 = setup.fractions.self_declared;
    if eps1 <= 0.0 {
        return Err(Error::validation("fractions", "precise fraction must be positive"));
    }
    let precise_rows = setup.layout.indices_of_kind(DetectorKind::Precise);
    let declared_rows = setup.layout.indices_of_kind(DetectorKind::SelfDeclared);
    let x1: Vec<u64> = precise_rows.iter().map(|&i| counts.as_slice()[i]).collect();

    // Precise row i corresponds to source bin j when the layout is three-kind.
    let mut x1_by_source = vec![0u64; setup.grid.len()];
    for (&i, &c) in precise_rows.iter().zip(&x1) {
        let bin = setup.layout.bin(i);
        let r = bin.region.expect("precise bins carry a region");
        x1_by_source[setup.grid.index(r, bin.slot)] = c;
    }

    let mean_z1 = setup.z1.iter().sum::<u64>() as f64 / setup.z1.len() as f64;
    let scaled: Vec<f64> = x1_by_source.iter().map(|&x| x as f64 / (eps1 * mean_z1)).collect();

    let mut zero_population_bins = Vec::new();
    let per_population: Vec<f64> = x1_by_source
        .iter()
        .zip(&setup.z1)
        .enumerate()
        .map(|(j, (&x, &z))| {
            if z == 0 {
                zero_population_bins.push(j);
                0.0
            } else {
                x as f64 / (eps1 * z as f64)
            }
        })
        .collect();

    let p1 = setup.transition.restrict_rows(&precise_rows)?;
    let only_precise = penalized(setup, &p1, &select(counts, &precise_rows), laplacian, config)?;

    let p_merged = p1.scaled((eps1 + eps2) / eps1)?;
    let merged = penalized(
        setup,
        &p_merged,
        &merged_counts(&setup.layout, &precise_rows, counts)?,
        laplacian,
        config,
    )?;

    let rows12: Vec<usize> = precise_rows.iter().chain(&declared_rows).copied().collect();
    let p12 = setup.transition.restrict_rows(&rows12)?;
    let declared = penalized(setup, &p12, &select(counts, &rows12), laplacian, config)?;

    let full = penalized(setup, &setup.transition, counts, laplacian, config)?;

    Ok(BaselineRun {
        estimates: vec![
            (Estimator::ScaledPrecise, scaled),
            (Estimator::PrecisePerPopulation, per_population),
            (Estimator::PenalizedPrecise, only_precise),
            (Estimator::PenalizedMerged, merged),
            (Estimator::PenalizedDeclared, declared),
            (Estimator::PenalizedFull, full),
        ],
        zero_population_bins,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorError {
    pub estimator: Estimator,
    pub relative_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub seed: u64,
    pub kind_totals: [u64; 3],
    pub spatial_weight: f64,
    pub temporal_weight: f64,
    pub errors: Vec<EstimatorError>,
    pub zero_population_bins: usize,
}

impl BenchResult {
    pub fn error(&self, estimator: Estimator) -> f64 {
        self.errors
            .iter()
            .find(|e| e.estimator == estimator)
            .expect("all estimators present")
            .relative_error
    }
}

/// Weight selection for a replicate.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightChoice {
    /// Cross-validate on the replicate's full counts; the plan's seed is
    /// replaced by one derived from the replicate seed.
    CrossValidate(CvPlan),
    Fixed {
        spatial: f64,
        temporal: f64,
    },
}

/// Thinning seed for a replicate, decorrelated from the sampling stream.
pub fn cv_seed(seed: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xC0FF_EE00_D15E_A5E5
}

/// Samples counts with `seed`, picks weights, runs all six estimators.
pub fn run_replicate(
    setup: &BenchSetup,
    seed: u64,
    weights: &WeightChoice,
    config: &OptimizerConfig,
) -> Result<BenchResult> {
    let counts = setup.sample(seed)?;
    let (ws, wt) = match weights {
        WeightChoice::Fixed { spatial, temporal } => (*spatial, *temporal),
        WeightChoice::CrossValidate(plan) => {
            let plan = CvPlan {
                seed: cv_seed(seed),
                ..plan.clone()
            };
            let report = select_weights(
                &counts,
                &setup.population,
                &setup.transition,
                |ws, wt| setup.laplacian(ws, wt),
                &plan,
                config,
            )?;
            (report.spatial_weight, report.temporal_weight)
        }
    };
    let laplacian = setup.laplacian(ws, wt)?;
    let run = run_baselines(setup, &counts, &laplacian, config)?;
    let errors = run
        .estimates
        .iter()
        .map(|(estimator, f_hat)| {
            Ok(EstimatorError {
                estimator: *estimator,
                relative_error: relative_error(&setup.truth, f_hat)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(BenchResult {
        seed,
        kind_totals: counts.kind_totals(&setup.layout),
        spatial_weight: ws,
        temporal_weight: wt,
        errors,
        zero_population_bins: run.zero_population_bins.len(),
    })
}

/// Runs one replicate per seed; results come back in seed order.
pub fn run_bench(
    setup: &BenchSetup,
    seeds: &[u64],
    weights: &WeightChoice,
    config: &OptimizerConfig,
    execution: Execution,
) -> Result<Vec<BenchResult>> {
    map_indexed(seeds.len(), execution, |k| {
        run_replicate(setup, seeds[k], weights, config)
    })
    .into_iter()
    .collect()
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: Estimator,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub replicates: usize,
    pub estimators: Vec<EstimatorSummary>,
}

impl BenchSummary {
    pub fn median(&self, estimator: Estimator) -> f64 {
        self.estimators
            .iter()
            .find(|e| e.estimator == estimator)
            .expect("all estimators present")
            .median
    }
}

pub fn summarize(results: &[BenchResult]) -> Result<BenchSummary> {
    if results.is_empty() {
        return Err(Error::validation("bench results", "need at least one replicate"));
    }
    let estimators = Estimator::ALL
        .iter()
        .map(|&estimator| {
            let mut v: Vec<f64> = results.iter().map(|r| r.error(estimator)).collect();
            v.sort_by(f64::total_cmp);
            let (q1, median, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
            EstimatorSummary {
                estimator,
                median,
                q1,
                q3,
                iqr: q3 - q1,
            }
        })
        .collect();
    Ok(BenchSummary {
        replicates: results.len(),
        estimators,
    })
}

/// `estimator,seed,relative_error`, one row per estimator per replicate.
pub fn write_bench_csv<W: Write>(writer: W, results: &[BenchResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["estimator", "seed", "relative_error"])?;
    for r in results {
        for e in &r.errors {
            w.write_record([e.estimator.label(), &r.seed.to_string(), &e.relative_error.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
