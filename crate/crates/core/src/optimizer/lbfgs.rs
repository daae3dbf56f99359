//! Limited-memory BFGS with the two-loop recursion.

use std::collections::VecDeque;

use super::line_search::{dot, Search, WolfeParams};
use super::{Objective, OptimizerConfig, Preconditioner, Termination};
use crate::error::{Error, Result};

/// Iterations between rebuilds of the preconditioner.
const REFRESH: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub initial_value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub grad_inf_norm: f64,
    pub termination: Termination,
    /// Objective after every accepted step, starting with the initial value.
    pub trace: Vec<f64>,
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `−H·g` where `H` is the implicit inverse-Hessian approximation. The
/// initial matrix is `γ·M⁻¹` with a preconditioner `M` and `γ·I` without.
fn direction(grad: &[f64], history: &VecDeque<Pair>, precond: Option<&dyn Preconditioner>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for p in history.iter().rev() {
        let a = p.rho * dot(&p.s, &q);
        q.iter_mut().zip(&p.y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    match (history.back(), precond) {
        (Some(last), Some(m)) => {
            let mut my = last.y.clone();
            m.solve_in_place(&mut my);
            let gamma = dot(&last.s, &last.y) / dot(&last.y, &my);
            m.solve_in_place(&mut q);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        (None, Some(m)) => m.solve_in_place(&mut q),
        (Some(last), None) => {
            let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        (None, None) => {}
    }
    for (p, a) in history.iter().zip(alphas.iter().rev()) {
        let b = p.rho * dot(&p.y, &q);
        q.iter_mut().zip(&p.s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Minimizes `objective` from `x0`. Deterministic: no randomized components.
pub fn minimize<O: Objective>(objective: &O, x0: &[f64], config: &OptimizerConfig) -> Result<Minimum> {
    config.validate()?;
    Error::check_len("x0", objective.dim(), x0.len())?;
    let params = WolfeParams {
        sufficient_decrease: config.sufficient_decrease,
        curvature: config.curvature,
        max_evals: config.max_line_search_evals,
    };

    let mut x = x0.to_vec();
    let mut grad = vec![0.0; x.len()];
    let mut value = objective.value_and_gradient(&x, &mut grad);
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Diverged);
    }
    let initial_value = value;
    let mut trace = vec![value];
    let mut history: VecDeque<Pair> = VecDeque::with_capacity(config.memory);
    let mut evaluations = 1;
    let mut iterations = 0;
    let mut termination = Termination::MaxIters;
    let mut precond = None;

    while iterations < config.max_iters {
        if inf_norm(&grad) <= config.grad_tol {
            termination = Termination::Converged;
            break;
        }
        iterations += 1;

        if (iterations - 1) % REFRESH == 0 {
            precond = objective.preconditioner(&x);
        }
        let mut dir = direction(&grad, &history, precond.as_deref());
        if !(dot(&grad, &dir) < 0.0) {
            history.clear();
            dir = grad.iter().map(|g| -g).collect();
        }
        let alpha_init = if history.is_empty() && precond.is_none() {
            (1.0 / inf_norm(&grad)).min(1.0)
        } else {
            1.0
        };

        let mut search = Search::new(objective, &x, value, &grad, &dir, params);
        let step = search.run(alpha_init);
        evaluations += search.evals();

        let Some(step) = step else {
            if history.is_empty() {
                termination = Termination::LineSearchFailure;
                break;
            }
            // Stale curvature pairs; retry from steepest descent.
            history.clear();
            continue;
        };

        let s: Vec<f64> = step.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = step.grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > f64::EPSILON * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if history.len() == config.memory {
                history.pop_front();
            }
            history.push_back(Pair { s, y, rho: 1.0 / sy });
        }

        x = step.x;
        grad = step.grad;
        value = step.f;
        trace.push(value);
    }
    if termination == Termination::MaxIters && inf_norm(&grad) <= config.grad_tol {
        termination = Termination::Converged;
    }

    Ok(Minimum {
        grad_inf_norm: inf_norm(&grad),
        x,
        value,
        initial_value,
        iterations,
        evaluations,
        termination,
        trace,
    })
}
