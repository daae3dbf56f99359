//! CGLS: conjugate gradients on the normal equations `AᵀA·v = Aᵀb`.
//! Started from zero it converges to the minimum-norm least-squares
//! solution.

use crate::sparse::SparseMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct LeastSquares {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Stops when `‖Aᵀr‖ ≤ rel_tol·‖Aᵀb‖` or after `max_iters` iterations.
pub fn least_squares_min_norm(a: &SparseMatrix, b: &[f64], max_iters: usize, rel_tol: f64) -> LeastSquares {
    let n = a.ncols();
    let mut v = vec![0.0; n];
    let mut r = b.to_vec();
    let mut s = a.tmul_vec(&r);
    let mut gamma: f64 = s.iter().map(|x| x * x).sum();
    let target = rel_tol * gamma.sqrt();
    if gamma == 0.0 {
        return LeastSquares {
            solution: v,
            iterations: 0,
            converged: true,
        };
    }
    let mut p = s.clone();
    let mut q = vec![0.0; a.nrows()];
    for it in 1..=max_iters {
        a.mul_vec_into(&p, &mut q);
        let qq: f64 = q.iter().map(|x| x * x).sum();
        if qq == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        v.iter_mut().zip(&p).for_each(|(vi, pi)| *vi += alpha * pi);
        r.iter_mut().zip(&q).for_each(|(ri, qi)| *ri -= alpha * qi);
        a.tmul_vec_into(&r, &mut s);
        let gamma_new: f64 = s.iter().map(|x| x * x).sum();
        if gamma_new.sqrt() <= target {
            return LeastSquares {
                solution: v,
                iterations: it,
                converged: true,
            };
        }
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        p.iter_mut().zip(&s).for_each(|(pi, si)| *pi = si + beta * *pi);
    }
    LeastSquares {
        solution: v,
        iterations: max_iters,
        converged: false,
    }
}
