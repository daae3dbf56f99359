//! Quasi-Newton minimization of the penalized objective and the
//! least-squares starting point.

mod lbfgs;
mod least_squares;
mod line_search;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::CountVector;
use crate::model::{PenalizedPoisson, PopulationField};
use crate::transition::TransitionMatrix;

pub use lbfgs::{minimize, Minimum};
pub use least_squares::{least_squares_min_norm, LeastSquares};

/// A smooth function with its gradient.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    /// Returns `f(x)` and writes `∇f(x)` into `grad`. May return `+∞`.
    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64;

    /// Symmetric positive definite approximation to the Hessian at `x`,
    /// used as the initial quasi-Newton matrix.
    fn preconditioner(&self, _x: &[f64]) -> Option<Box<dyn Preconditioner + '_>> {
        None
    }
}

/// Applies `M⁻¹` for a symmetric positive definite `M`.
pub trait Preconditioner {
    fn solve_in_place(&self, v: &mut [f64]);
}

impl Preconditioner for crate::envelope::EnvelopeCholesky {
    fn solve_in_place(&self, v: &mut [f64]) {
        crate::envelope::EnvelopeCholesky::solve_in_place(self, v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Number of curvature pairs kept.
    pub memory: usize,
    pub max_iters: usize,
    /// Stop once `‖∇‖∞` falls to this value.
    pub grad_tol: f64,
    pub sufficient_decrease: f64,
    pub curvature: f64,
    pub max_line_search_evals: usize,
    /// Lower bound on the least-squares initial intensity.
    pub init_floor: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            memory: 10,
            max_iters: 500,
            grad_tol: 1e-6,
            sufficient_decrease: 1e-4,
            curvature: 0.9,
            max_line_search_evals: 40,
            init_floor: 1e-4,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.memory == 0 {
            return Err(Error::validation("optimizer.memory", "must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::validation("optimizer.max_iters", "must be positive"));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::validation("optimizer.grad_tol", "must be positive"));
        }
        if !(0.0 < self.sufficient_decrease && self.sufficient_decrease < self.curvature && self.curvature < 1.0) {
            return Err(Error::validation(
                "optimizer line search",
                "need 0 < sufficient_decrease < curvature < 1",
            ));
        }
        if self.max_line_search_evals == 0 {
            return Err(Error::validation("optimizer.max_line_search_evals", "must be positive"));
        }
        if !(self.init_floor > 0.0 && self.init_floor.is_finite()) {
            return Err(Error::validation("optimizer.init_floor", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIters,
    LineSearchFailure,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub theta: Vec<f64>,
    /// `f̂ = exp(θ̂)`.
    pub intensity: Vec<f64>,
    pub objective: f64,
    pub initial_objective: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub grad_inf_norm: f64,
    pub termination: Termination,
    pub objective_trace: Vec<f64>,
}

/// Least-squares starting point: `η₀ = argmin ‖x − Pη‖₂` (minimum norm),
/// floored at `floor`, then `θ₀ = log η₀ − ψ`.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialGuess {
    pub theta: Vec<f64>,
    /// True when the least-squares solve did not converge and `η₀ = Pᵀx`
    /// was used instead.
    pub used_fallback: bool,
}

pub fn initial_guess(
    counts: &CountVector,
    transition: &TransitionMatrix,
    population: &PopulationField,
    floor: f64,
) -> Result<InitialGuess> {
    Error::check_len("counts", transition.rows(), counts.len())?;
    Error::check_len("psi", transition.cols(), population.len())?;
    if !(floor > 0.0 && floor.is_finite()) {
        return Err(Error::validation("init floor", format!("{floor} must be positive")));
    }
    let b = counts.to_f64();
    let n = transition.cols();
    let budget = 10 * n.min(transition.rows()) + 100;
    let ls = least_squares_min_norm(transition.matrix(), &b, budget, 1e-12);
    let (eta0, used_fallback) = if ls.converged {
        (ls.solution, false)
    } else {
        (transition.matrix().tmul_vec(&b), true)
    };
    let theta = eta0
        .iter()
        .zip(population.psi())
        .map(|(e, p)| e.max(floor).ln() - p)
        .collect();
    Ok(InitialGuess { theta, used_fallback })
}

pub fn initialize_theta(
    counts: &CountVector,
    transition: &TransitionMatrix,
    population: &PopulationField,
    floor: f64,
) -> Result<Vec<f64>> {
    initial_guess(counts, transition, population, floor).map(|g| g.theta)
}

/// Minimizes the penalized objective from `theta0`.
pub fn fit(theta0: &[f64], problem: &PenalizedPoisson<'_>, config: &OptimizerConfig) -> Result<FitResult> {
    if theta0.iter().any(|t| !t.is_finite()) {
        return Err(Error::validation("theta0", "all entries must be finite"));
    }
    let m = minimize(problem, theta0, config)?;
    Ok(FitResult {
        intensity: m.x.iter().map(|t| t.exp()).collect(),
        theta: m.x,
        objective: m.value,
        initial_objective: m.initial_value,
        iterations: m.iterations,
        evaluations: m.evaluations,
        grad_inf_norm: m.grad_inf_norm,
        termination: m.termination,
        objective_trace: m.trace,
    })
}

/// Initializes by least squares, then fits.
pub fn fit_from_counts(
    problem: &PenalizedPoisson<'_>,
    counts: &CountVector,
    population: &PopulationField,
    config: &OptimizerConfig,
) -> Result<FitResult> {
    let theta0 = initialize_theta(counts, problem.transition(), population, config.init_floor)?;
    fit(&theta0, problem, config)
}
