//! Graph-weight selection by event thinning.
//!
//! Every split routes each observed event to a hold-out set with
//! probability `p`. For each `(w_s, w_t)` grid point the model is fit on the
//! remaining events and scored by the exact Poisson log-likelihood of the
//! hold-out counts at the rescaled intensity `p/(1−p)·h_train`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Laplacian;
use crate::grid::CountVector;
use crate::model::{poisson_log_likelihood, PenalizedPoisson, PopulationField};
use crate::optimizer::{fit, initialize_theta, OptimizerConfig};
use crate::parallel::{map_indexed, Execution};
use crate::transition::TransitionMatrix;

/// `{10^lo, 10^(lo+step), …, 10^hi}`.
pub fn log10_axis(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && lo <= hi && lo.is_finite() && hi.is_finite()) {
        return Err(Error::validation("grid axis", format!("lo={lo} hi={hi} step={step}")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| 10f64.powf(lo + k as f64 * step)).collect())
}

/// Cartesian product of the same axis for `w_s` and `w_t`, `w_s` outer.
pub fn square_grid(axis: &[f64]) -> Vec<(f64, f64)> {
    axis.iter()
        .flat_map(|&ws| axis.iter().map(move |&wt| (ws, wt)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvPlan {
    pub holdout_fraction: f64,
    pub num_splits: usize,
    /// `(w_s, w_t)` pairs, evaluated in this order.
    pub grid: Vec<(f64, f64)>,
    pub seed: u64,
    #[serde(default)]
    pub execution: Execution,
}

impl CvPlan {
    /// `p = 0.2`, five splits, `{10⁻³, 10⁻²·⁵, …, 10³}²`.
    pub fn with_default_grid(seed: u64) -> Self {
        CvPlan {
            holdout_fraction: 0.2,
            num_splits: 5,
            grid: square_grid(&log10_axis(-3.0, 3.0, 0.5).expect("static axis")),
            seed,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::validation(
                "cv.holdout_fraction",
                format!("{} must lie in (0, 1)", self.holdout_fraction),
            ));
        }
        if self.num_splits == 0 {
            return Err(Error::validation("cv.num_splits", "must be positive"));
        }
        if self.grid.is_empty() {
            return Err(Error::validation("cv.grid", "must not be empty"));
        }
        Ok(())
    }
}

/// Splits counts into `(train, holdout)`; each event independently goes to
/// the hold-out set with probability `p`.
pub fn thin_counts(counts: &CountVector, holdout_fraction: f64, seed: u64) -> Result<(CountVector, CountVector)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    thin_with(counts, holdout_fraction, &mut rng)
}

fn thin_with(counts: &CountVector, p: f64, rng: &mut ChaCha8Rng) -> Result<(CountVector, CountVector)> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::validation("holdout fraction", format!("{p} must lie in (0, 1)")));
    }
    let mut train = Vec::with_capacity(counts.len());
    let mut holdout = Vec::with_capacity(counts.len());
    for &x in counts.as_slice() {
        let h = if x == 0 {
            0
        } else {
            Binomial::new(x, p).expect("valid binomial").sample(rng)
        };
        train.push(x - h);
        holdout.push(h);
    }
    Ok((CountVector::new(train), CountVector::new(holdout)))
}

/// Thinned counts of one split. Splits share the plan seed and differ by
/// ChaCha stream, so every grid point sees the same splits.
pub fn split_counts(counts: &CountVector, plan: &CvPlan, split: usize) -> Result<(CountVector, CountVector)> {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    rng.set_stream(split as u64);
    thin_with(counts, plan.holdout_fraction, &mut rng)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvEntry {
    pub spatial_weight: f64,
    pub temporal_weight: f64,
    /// Mean hold-out log-likelihood over the splits that did not diverge;
    /// `−∞` (serialized as `null`) when all diverged.
    #[serde(with = "finite_or_null")]
    pub mean_score: f64,
    #[serde(with = "finite_or_null")]
    pub std_score: f64,
    pub diverged_splits: usize,
    pub selected: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub holdout_fraction: f64,
    pub num_splits: usize,
    pub seed: u64,
    pub entries: Vec<CvEntry>,
    pub selected_index: usize,
    pub spatial_weight: f64,
    pub temporal_weight: f64,
    pub tie_break: String,
}

impl CvReport {
    pub fn selected(&self) -> &CvEntry {
        &self.entries[self.selected_index]
    }
}

mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

/// Hold-out score of one fit; `None` when the fit could not be evaluated.
fn score_split(
    train: &CountVector,
    holdout: &CountVector,
    population: &PopulationField,
    transition: &TransitionMatrix,
    laplacian: &Laplacian,
    p: f64,
    config: &OptimizerConfig,
) -> Option<f64> {
    let problem = PenalizedPoisson::new(population, transition, train, laplacian, 1.0).ok()?;
    let theta0 = initialize_theta(train, transition, population, config.init_floor).ok()?;
    let result = fit(&theta0, &problem, config).ok()?;
    let scale = p / (1.0 - p);
    let mean: Vec<f64> = problem
        .detector_intensity(&result.theta)
        .into_iter()
        .map(|h| scale * h)
        .collect();
    let ll = poisson_log_likelihood(holdout.as_slice(), &mean).ok()?;
    ll.is_finite().then_some(ll)
}

/// Index of the best mean score; exact ties go to the larger `w_s·w_t`,
/// then to the earlier grid position.
pub fn select_index(entries: &[CvEntry]) -> usize {
    let mut best = 0;
    for (k, e) in entries.iter().enumerate().skip(1) {
        let b = &entries[best];
        let better = e.mean_score > b.mean_score
            || (e.mean_score == b.mean_score
                && e.spatial_weight * e.temporal_weight > b.spatial_weight * b.temporal_weight);
        if better {
            best = k;
        }
    }
    best
}

/// Runs the full grid × splits evaluation and picks the weights with the
/// highest mean hold-out log-likelihood.
pub fn select_weights<B>(
    counts: &CountVector,
    population: &PopulationField,
    transition: &TransitionMatrix,
    grid_builder: B,
    plan: &CvPlan,
    config: &OptimizerConfig,
) -> Result<CvReport>
where
    B: Fn(f64, f64) -> Result<Laplacian>,
{
    plan.validate()?;
    config.validate()?;
    Error::check_len("counts", transition.rows(), counts.len())?;
    Error::check_len("psi", transition.cols(), population.len())?;

    let laplacians: Vec<Laplacian> = plan
        .grid
        .iter()
        .map(|&(ws, wt)| grid_builder(ws, wt))
        .collect::<Result<_>>()?;
    let splits: Vec<(CountVector, CountVector)> = (0..plan.num_splits)
        .map(|s| split_counts(counts, plan, s))
        .collect::<Result<_>>()?;

    let tasks = plan.grid.len() * plan.num_splits;
    let scores = map_indexed(tasks, plan.execution, |task| {
        let (g, s) = (task / plan.num_splits, task % plan.num_splits);
        let (train, holdout) = &splits[s];
        score_split(
            train,
            holdout,
            population,
            transition,
            &laplacians[g],
            plan.holdout_fraction,
            config,
        )
    });

    let mut entries: Vec<CvEntry> = plan
        .grid
        .iter()
        .zip(scores.chunks(plan.num_splits))
        .map(|(&(ws, wt), chunk)| {
            let ok: Vec<f64> = chunk.iter().flatten().copied().collect();
            let diverged = chunk.len() - ok.len();
            let (mean, std) = if ok.is_empty() {
                (f64::NEG_INFINITY, f64::NAN)
            } else {
                let mean = ok.iter().sum::<f64>() / ok.len() as f64;
                let var = if ok.len() > 1 {
                    ok.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (ok.len() - 1) as f64
                } else {
                    0.0
                };
                (mean, var.sqrt())
            };
            CvEntry {
                spatial_weight: ws,
                temporal_weight: wt,
                mean_score: mean,
                std_score: std,
                diverged_splits: diverged,
                selected: false,
            }
        })
        .collect();

    let best = select_index(&entries);
    entries[best].selected = true;
    let tied = entries
        .iter()
        .filter(|e| e.mean_score == entries[best].mean_score)
        .count();
    let tie_break = if tied > 1 {
        format!("{tied} grid points tied on mean score; chose the largest w_s*w_t")
    } else {
        "unique maximum".to_string()
    };
    Ok(CvReport {
        holdout_fraction: plan.holdout_fraction,
        num_splits: plan.num_splits,
        seed: plan.seed,
        spatial_weight: entries[best].spatial_weight,
        temporal_weight: entries[best].temporal_weight,
        entries,
        selected_index: best,
        tie_break,
    })
}
