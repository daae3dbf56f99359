//! Penalized Poisson likelihood over log-intensities.
//!
//! With `θ = log f` and `ψ = log g`, a source bin emits events at rate
//! `η = exp(θ + ψ)` and detector bin `i` sees `h = P·η`. The objective is
//!
//! ```text
//! F(θ) = −Σᵢ (xᵢ log hᵢ − hᵢ) + λ·½·θᵀLθ
//! ```
//!
//! The `log xᵢ!` term is left out, so objective values are only comparable
//! for a fixed count vector. [`poisson_log_likelihood`] keeps it.

use crate::envelope::{reverse_cuthill_mckee, EnvelopeCholesky};
use crate::error::{Error, Result};
use crate::graph::Laplacian;
use crate::grid::CountVector;
use crate::optimizer::{Objective, Preconditioner};
use crate::transition::TransitionMatrix;

/// Floor applied to raw population counts before taking logs.
pub const DEFAULT_POPULATION_FLOOR: f64 = 0.5;

/// `ψ = log ĝ` with `ĝ = max(z, floor)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PopulationField {
    psi: Vec<f64>,
    floor: f64,
}

impl PopulationField {
    pub fn from_counts(z: &[u64], floor: f64) -> Result<Self> {
        if !(floor.is_finite() && floor > 0.0) {
            return Err(Error::validation(
                "population floor",
                format!("{floor} must be positive"),
            ));
        }
        Ok(PopulationField {
            psi: z.iter().map(|&c| (c as f64).max(floor).ln()).collect(),
            floor,
        })
    }

    pub fn from_log(psi: Vec<f64>) -> Result<Self> {
        check_finite("psi", &psi)?;
        Ok(PopulationField { psi, floor: 0.0 })
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    /// `ĝ = exp(ψ)`.
    pub fn population(&self) -> Vec<f64> {
        self.psi.iter().map(|p| p.exp()).collect()
    }
}

fn check_finite(name: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(k) => Err(Error::validation(name, format!("entry {k} is not finite"))),
        None => Ok(()),
    }
}

/// `η_j = exp(θ_j + ψ_j)`.
pub fn link_eta(theta: &[f64], psi: &[f64]) -> Result<Vec<f64>> {
    Error::check_len("link_eta", theta.len(), psi.len())?;
    check_finite("theta", theta)?;
    check_finite("psi", psi)?;
    Ok(theta.iter().zip(psi).map(|(t, p)| (t + p).exp()).collect())
}

/// `h = P·η`.
pub fn detector_intensity(transition: &TransitionMatrix, eta: &[f64]) -> Result<Vec<f64>> {
    Error::check_len("detector_intensity", transition.cols(), eta.len())?;
    Ok(transition.matrix().mul_vec(eta))
}

/// `log x!`, exact summation for small arguments and Stirling's series
/// beyond.
pub fn ln_factorial(x: u64) -> f64 {
    if x < 256 {
        (2..=x).map(|k| (k as f64).ln()).sum()
    } else {
        let n = x as f64;
        let inv = 1.0 / n;
        let inv2 = inv * inv;
        n * n.ln() - n
            + 0.5 * (2.0 * std::f64::consts::PI * n).ln()
            + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
    }
}

/// Exact Poisson log-likelihood `Σᵢ (xᵢ log μᵢ − μᵢ − log xᵢ!)`.
/// Bins with `xᵢ = 0` contribute `−μᵢ`; `μᵢ = 0` with `xᵢ > 0` gives `−∞`.
pub fn poisson_log_likelihood(counts: &[u64], mean: &[f64]) -> Result<f64> {
    Error::check_len("poisson_log_likelihood", counts.len(), mean.len())?;
    let mut total = 0.0;
    for (&x, &mu) in counts.iter().zip(mean) {
        if x == 0 {
            total -= mu;
        } else if mu <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        } else {
            total += x as f64 * mu.ln() - mu - ln_factorial(x);
        }
    }
    Ok(total)
}

/// One instance of the penalized objective with all inputs borrowed.
#[derive(Clone, Debug)]
pub struct PenalizedPoisson<'a> {
    psi: &'a [f64],
    transition: &'a TransitionMatrix,
    counts: Vec<f64>,
    laplacian: &'a Laplacian,
    lambda: f64,
    degree: Vec<f64>,
    order: Vec<usize>,
}

impl<'a> PenalizedPoisson<'a> {
    pub fn new(
        psi: &'a PopulationField,
        transition: &'a TransitionMatrix,
        counts: &CountVector,
        laplacian: &'a Laplacian,
        lambda: f64,
    ) -> Result<Self> {
        let n = transition.cols();
        Error::check_len("psi", n, psi.len())?;
        Error::check_len("counts", transition.rows(), counts.len())?;
        Error::check_len("laplacian", n, laplacian.dim())?;
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::validation("lambda", format!("{lambda} must be >= 0")));
        }
        Ok(PenalizedPoisson {
            psi: psi.psi(),
            transition,
            counts: counts.to_f64(),
            laplacian,
            lambda,
            degree: (0..n).map(|j| laplacian.matrix().get(j, j)).collect(),
            order: reverse_cuthill_mckee(
                n,
                &laplacian.edges().iter().map(|&(a, b, _)| (a, b)).collect::<Vec<_>>(),
            ),
        })
    }

    pub fn dim(&self) -> usize {
        self.psi.len()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn psi(&self) -> &[f64] {
        self.psi
    }

    pub fn transition(&self) -> &TransitionMatrix {
        self.transition
    }

    fn eta(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().zip(self.psi).map(|(t, p)| (t + p).exp()).collect()
    }

    /// Negative log-likelihood part; `+∞` when some `hᵢ = 0` has `xᵢ > 0`.
    fn data_term(&self, h: &[f64]) -> f64 {
        let mut nll = 0.0;
        for (&x, &hi) in self.counts.iter().zip(h) {
            if x > 0.0 {
                if hi <= 0.0 {
                    return f64::INFINITY;
                }
                nll -= x * hi.ln();
            }
            nll += hi;
        }
        nll
    }

    pub fn objective(&self, theta: &[f64]) -> Result<f64> {
        Error::check_len("theta", self.dim(), theta.len())?;
        let mut grad = vec![0.0; self.dim()];
        Ok(self.evaluate(theta, &mut grad, false))
    }

    pub fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        Error::check_len("theta", self.dim(), theta.len())?;
        let mut grad = vec![0.0; self.dim()];
        self.evaluate(theta, &mut grad, true);
        Ok(grad)
    }

    /// Objective value, writing `λLθ − H·Pᵀ(r − 1)` into `grad` when
    /// requested. `rᵢ = xᵢ/hᵢ`, and `rᵢ = 0` when `xᵢ = 0`.
    fn evaluate(&self, theta: &[f64], grad: &mut [f64], want_grad: bool) -> f64 {
        let eta = self.eta(theta);
        let h = self.transition.matrix().mul_vec(&eta);
        let data = self.data_term(&h);

        let penalty = self
            .laplacian
            .penalty(theta)
            .expect("dimension checked at construction");
        let value = data + self.lambda * penalty;

        if want_grad {
            let resid: Vec<f64> = self
                .counts
                .iter()
                .zip(&h)
                .map(|(&x, &hi)| if x > 0.0 { x / hi - 1.0 } else { -1.0 })
                .collect();
            self.transition.matrix().tmul_vec_into(&resid, grad);
            let lt = self.laplacian.apply(theta);
            for ((g, e), l) in grad.iter_mut().zip(&eta).zip(&lt) {
                *g = self.lambda * l - e * *g;
            }
        }
        value
    }

    /// Detector intensities at `θ`.
    pub fn detector_intensity(&self, theta: &[f64]) -> Vec<f64> {
        self.transition.matrix().mul_vec(&self.eta(theta))
    }
}

impl Objective for PenalizedPoisson<'_> {
    fn dim(&self) -> usize {
        self.psi.len()
    }

    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.evaluate(x, grad, true)
    }

    /// `λL + diag(η_j² Σᵢ P_ij²/hᵢ)`: the penalty Hessian plus the diagonal
    /// of the Fisher information of the data term.
    fn preconditioner(&self, x: &[f64]) -> Option<Box<dyn Preconditioner + '_>> {
        let eta = self.eta(x);
        let p = self.transition.matrix();
        let h = p.mul_vec(&eta);
        let fisher: Vec<f64> = (0..eta.len())
            .map(|j| {
                let s: f64 = p
                    .column(j)
                    .filter(|&(i, _)| h[i] > 0.0)
                    .map(|(i, v)| v * v / h[i])
                    .sum();
                eta[j] * eta[j] * s
            })
            .collect();
        let scale = fisher
            .iter()
            .zip(&self.degree)
            .fold(0.0f64, |m, (f, d)| m.max(f + self.lambda * d));
        if !(scale > 0.0 && scale.is_finite()) {
            return None;
        }
        let floor = 1e-12 * scale;
        let diagonal: Vec<f64> = fisher
            .iter()
            .zip(&self.degree)
            .map(|(f, d)| f.max(floor) + self.lambda * d)
            .collect();
        let off: Vec<(usize, usize, f64)> = self
            .laplacian
            .edges()
            .iter()
            .map(|&(a, b, w)| (a, b, -self.lambda * w))
            .collect();
        let chol = EnvelopeCholesky::factor(&self.order, &diagonal, &off)?;
        Some(Box::new(chol))
    }
}

/// Free-function form of [`PenalizedPoisson::objective`].
pub fn objective(
    theta: &[f64],
    psi: &PopulationField,
    transition: &TransitionMatrix,
    counts: &CountVector,
    laplacian: &Laplacian,
    lambda: f64,
) -> Result<f64> {
    PenalizedPoisson::new(psi, transition, counts, laplacian, lambda)?.objective(theta)
}

/// Free-function form of [`PenalizedPoisson::gradient`].
pub fn gradient(
    theta: &[f64],
    psi: &PopulationField,
    transition: &TransitionMatrix,
    counts: &CountVector,
    laplacian: &Laplacian,
    lambda: f64,
) -> Result<Vec<f64>> {
    PenalizedPoisson::new(psi, transition, counts, laplacian, lambda)?.gradient(theta)
}
