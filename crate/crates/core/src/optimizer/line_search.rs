//! Line search satisfying the strong Wolfe conditions (bracketing phase
//! followed by zoom with safeguarded quadratic interpolation).
//!
//! Close to a minimizer the decrease demanded by the Armijo rule can fall
//! below the rounding noise of the objective. There any non-increasing step
//! counts as sufficient and steps are ordered by the sign of the
//! directional derivative, as in the approximate Wolfe conditions of Hager
//! and Zhang.

use super::Objective;

/// Relative width of the band in which objective values are treated as
/// indistinguishable.
const NOISE_REL: f64 = 1e-12;

#[derive(Clone, Copy, Debug)]
pub(crate) struct WolfeParams {
    pub sufficient_decrease: f64,
    pub curvature: f64,
    pub max_evals: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct Step {
    pub alpha: f64,
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    /// Directional derivative `∇f(x)·d` at the step.
    pub slope: f64,
}

pub(crate) struct Search<'a, O: Objective> {
    objective: &'a O,
    x0: &'a [f64],
    f0: f64,
    slope0: f64,
    dir: &'a [f64],
    params: WolfeParams,
    evals: usize,
}

impl<'a, O: Objective> Search<'a, O> {
    pub fn new(objective: &'a O, x0: &'a [f64], f0: f64, g0: &[f64], dir: &'a [f64], params: WolfeParams) -> Self {
        let slope0 = dot(g0, dir);
        Search {
            objective,
            x0,
            f0,
            slope0,
            dir,
            params,
            evals: 0,
        }
    }

    pub fn evals(&self) -> usize {
        self.evals
    }

    fn eval(&mut self, alpha: f64) -> Step {
        self.evals += 1;
        let x: Vec<f64> = self.x0.iter().zip(self.dir).map(|(a, d)| a + alpha * d).collect();
        let mut grad = vec![0.0; x.len()];
        let f = self.objective.value_and_gradient(&x, &mut grad);
        let slope = if f.is_finite() { dot(&grad, self.dir) } else { f64::NAN };
        Step {
            alpha,
            x,
            f,
            grad,
            slope,
        }
    }

    fn noise(&self) -> f64 {
        NOISE_REL * self.f0.abs().max(1.0)
    }

    fn sufficient_decrease(&self, s: &Step) -> bool {
        if !s.f.is_finite() {
            return false;
        }
        let required = -self.params.sufficient_decrease * s.alpha * self.slope0;
        s.f <= self.f0 - required || (required <= self.noise() && s.f <= self.f0)
    }

    /// Whether `a` is no better than `b`; inside the noise band the step
    /// whose slope is already non-negative is the worse one.
    fn no_better(&self, a: &Step, b: &Step) -> bool {
        if (a.f - b.f).abs() <= self.noise() {
            a.slope >= 0.0
        } else {
            a.f >= b.f
        }
    }

    fn curvature_ok(&self, s: &Step) -> bool {
        s.slope.abs() <= -self.params.curvature * self.slope0
    }

    /// Returns a step with sufficient decrease (and, unless the evaluation
    /// budget ran out, the curvature condition), or `None`.
    pub fn run(&mut self, alpha_init: f64) -> Option<Step> {
        if !(self.slope0 < 0.0) {
            return None;
        }
        let mut prev = Step {
            alpha: 0.0,
            x: self.x0.to_vec(),
            f: self.f0,
            grad: Vec::new(),
            slope: self.slope0,
        };
        let mut alpha = alpha_init;
        let mut first = true;
        while self.evals < self.params.max_evals {
            let cur = self.eval(alpha);
            if !self.sufficient_decrease(&cur) || (!first && self.no_better(&cur, &prev)) {
                return self.zoom(prev, cur);
            }
            if self.curvature_ok(&cur) {
                return Some(cur);
            }
            if cur.slope >= 0.0 {
                return self.zoom(cur, prev);
            }
            first = false;
            alpha = cur.alpha * 2.0;
            prev = cur;
        }
        (prev.alpha > 0.0).then_some(prev)
    }

    /// `lo` satisfies sufficient decrease with the lowest value seen so far;
    /// the minimizer is bracketed between `lo` and `hi`.
    fn zoom(&mut self, mut lo: Step, mut hi: Step) -> Option<Step> {
        while self.evals < self.params.max_evals {
            let width = hi.alpha - lo.alpha;
            if width.abs() <= 1e-14 * lo.alpha.abs().max(1e-8) {
                break;
            }
            let alpha = interpolate(&lo, &hi);
            let cur = self.eval(alpha);
            if !self.sufficient_decrease(&cur) || self.no_better(&cur, &lo) {
                hi = cur;
            } else {
                if self.curvature_ok(&cur) {
                    return Some(cur);
                }
                if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = cur;
            }
        }
        (lo.alpha > 0.0).then_some(lo)
    }
}

/// Minimizer of the quadratic through `lo.f`, `lo.slope` and `hi.f`,
/// clamped to the inner 80% of the bracket; bisection when `hi` is not finite.
fn interpolate(lo: &Step, hi: &Step) -> f64 {
    let d = hi.alpha - lo.alpha;
    let (a, b) = if d > 0.0 {
        (lo.alpha, hi.alpha)
    } else {
        (hi.alpha, lo.alpha)
    };
    let margin = 0.1 * d.abs();
    if !hi.f.is_finite() {
        return lo.alpha + 0.5 * d;
    }
    let denom = 2.0 * (hi.f - lo.f - lo.slope * d);
    let mut t = if denom > 0.0 {
        lo.alpha - lo.slope * d * d / denom
    } else {
        lo.alpha + 0.5 * d
    };
    if !t.is_finite() {
        t = lo.alpha + 0.5 * d;
    }
    t.clamp(a + margin, b - margin)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
