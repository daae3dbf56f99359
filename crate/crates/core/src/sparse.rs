//! Compressed sparse matrix holding both column-major (CSC) and row-major
//! (CSR) index structures.
//!
//! `P·v` walks rows and `Pᵀ·v` walks columns, so each output entry is a
//! sequential sum and the result does not depend on how rows are split
//! across threads.

use crate::error::{Error, Result};

/// Row count above which matrix-vector products fan out over rayon.
#[cfg(feature = "parallel")]
const PAR_MIN_LEN: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    col_vals: Vec<f64>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    row_vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicate
    /// coordinates are summed; entries that end up exactly zero are dropped.
    pub fn from_triplets<I>(nrows: usize, ncols: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (r, c, v) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::validation(
                    "sparse entry",
                    format!("({r}, {c}) outside {nrows}x{ncols}"),
                ));
            }
            if !v.is_finite() {
                return Err(Error::validation(
                    "sparse entry",
                    format!("non-finite value at ({r}, {c})"),
                ));
            }
            entries.push((r, c, v));
        }
        entries.sort_by_key(|a| (a.1, a.0));

        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|e| e.2 != 0.0);

        let mut col_ptr = vec![0usize; ncols + 1];
        let mut row_ptr = vec![0usize; nrows + 1];
        for &(r, c, _) in &merged {
            col_ptr[c + 1] += 1;
            row_ptr[r + 1] += 1;
        }
        for k in 0..ncols {
            col_ptr[k + 1] += col_ptr[k];
        }
        for k in 0..nrows {
            row_ptr[k + 1] += row_ptr[k];
        }

        let nnz = merged.len();
        let row_idx = merged.iter().map(|e| e.0).collect();
        let col_vals = merged.iter().map(|e| e.2).collect();

        // merged is column-major, so filling rows in this order keeps the
        // column indices of every row sorted.
        let mut col_idx = vec![0usize; nnz];
        let mut row_vals = vec![0.0; nnz];
        let mut next = row_ptr.clone();
        for &(r, c, v) in &merged {
            let k = next[r];
            col_idx[k] = c;
            row_vals[k] = v;
            next[r] += 1;
        }

        Ok(SparseMatrix {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            col_vals,
            row_ptr,
            col_idx,
            row_vals,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0))).expect("identity is valid")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_vals.len()
    }

    /// Nonzeros of column `j` as `(row, value)`, rows ascending.
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.col_vals[span].iter().copied())
    }

    /// Nonzeros of row `i` as `(col, value)`, columns ascending.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.row_vals[span].iter().copied())
    }

    /// All nonzeros in column-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |j| self.column(j).map(move |(i, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.col_ptr[j]..self.col_ptr[j + 1];
        match self.row_idx[span.clone()].binary_search(&i) {
            Ok(k) => self.col_vals[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.ncols).map(|j| self.column(j).map(|(_, v)| v).sum()).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    /// `out = A·x`.
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "mul_vec: x length");
        assert_eq!(out.len(), self.nrows, "mul_vec: out length");
        let row_dot = |i: usize| -> f64 { self.row(i).map(|(j, v)| v * x[j]).sum() };
        #[cfg(feature = "parallel")]
        if self.nrows >= PAR_MIN_LEN {
            use rayon::prelude::*;
            out.par_iter_mut()
                .with_min_len(PAR_MIN_LEN / 4)
                .enumerate()
                .for_each(|(i, o)| *o = row_dot(i));
            return;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o = row_dot(i);
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut out);
        out
    }

    /// `out = Aᵀ·y`.
    pub fn tmul_vec_into(&self, y: &[f64], out: &mut [f64]) {
        assert_eq!(y.len(), self.nrows, "tmul_vec: y length");
        assert_eq!(out.len(), self.ncols, "tmul_vec: out length");
        let col_dot = |j: usize| -> f64 { self.column(j).map(|(i, v)| v * y[i]).sum() };
        #[cfg(feature = "parallel")]
        if self.ncols >= PAR_MIN_LEN {
            use rayon::prelude::*;
            out.par_iter_mut()
                .with_min_len(PAR_MIN_LEN / 4)
                .enumerate()
                .for_each(|(j, o)| *o = col_dot(j));
            return;
        }
        for (j, o) in out.iter_mut().enumerate() {
            *o = col_dot(j);
        }
    }

    pub fn tmul_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        self.tmul_vec_into(y, &mut out);
        out
    }

    /// Sub-matrix made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let triplets: Vec<_> = rows
            .iter()
            .enumerate()
            .flat_map(|(new_i, &i)| self.row(i).map(move |(j, v)| (new_i, j, v)))
            .collect();
        Self::from_triplets(rows.len(), self.ncols, triplets)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.col_vals.iter_mut().for_each(|v| *v *= factor);
        out.row_vals.iter_mut().for_each(|v| *v *= factor);
        out
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.nrows == self.ncols && self.triplets().all(|(i, j, v)| (self.get(j, i) - v).abs() <= tol)
    }
}
