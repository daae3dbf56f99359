//! Reverse Cuthill–McKee ordering and envelope Cholesky factorization for
//! sparse symmetric positive definite systems on small graphs.

use std::collections::VecDeque;

/// Reverse Cuthill–McKee ordering of an undirected graph on `n` nodes.
/// Returns `order` with `order[k]` the node placed at position `k`.
pub fn reverse_cuthill_mckee(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(a, b) in edges {
        if a != b {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    for list in &mut adj {
        list.sort_by_key(|&v| (degree[v], v));
    }

    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let seed = (0..n)
            .filter(|&v| !placed[v])
            .min_by_key(|&v| (degree[v], v))
            .expect("unplaced node exists");
        let start = peripheral(&adj, &degree, &placed, seed);
        let mut queue = VecDeque::from([start]);
        placed[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &u in &adj[v] {
                if !placed[u] {
                    placed[u] = true;
                    queue.push_back(u);
                }
            }
        }
    }
    order.reverse();
    order
}

/// Breadth-first levels from `start` within the unplaced part of the graph.
fn levels(adj: &[Vec<usize>], placed: &[bool], start: usize) -> Vec<Vec<usize>> {
    let mut seen = placed.to_vec();
    seen[start] = true;
    let mut out = vec![vec![start]];
    loop {
        let mut next = Vec::new();
        for &v in out.last().expect("nonempty") {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    next.push(u);
                }
            }
        }
        if next.is_empty() {
            return out;
        }
        out.push(next);
    }
}

/// Pseudo-peripheral node of the component containing `seed`.
fn peripheral(adj: &[Vec<usize>], degree: &[usize], placed: &[bool], seed: usize) -> usize {
    let mut node = seed;
    let mut depth = levels(adj, placed, node).len();
    loop {
        let lv = levels(adj, placed, node);
        let far = *lv
            .last()
            .expect("nonempty")
            .iter()
            .min_by_key(|&&v| (degree[v], v))
            .expect("nonempty level");
        let far_depth = levels(adj, placed, far).len();
        if far_depth <= depth {
            return node;
        }
        node = far;
        depth = far_depth;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cholesky factor `L` of a permuted symmetric positive definite matrix in
/// envelope storage: row `i` holds columns `first[i]..=i` contiguously.
#[derive(Clone, Debug)]
pub struct EnvelopeCholesky {
    /// `position[node]` is the row of `node` in the permuted matrix.
    position: Vec<usize>,
    order: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    factor: Vec<f64>,
}

impl EnvelopeCholesky {
    /// Factors `A` given by its diagonal and its off-diagonal entries
    /// `(a, b, value)` (each unordered pair once), with rows permuted by
    /// `order`. Returns `None` when `A` is not numerically positive definite.
    pub fn factor(order: &[usize], diagonal: &[f64], off_diagonal: &[(usize, usize, f64)]) -> Option<Self> {
        let n = diagonal.len();
        assert_eq!(order.len(), n, "ordering length");
        let mut position = vec![0; n];
        for (k, &v) in order.iter().enumerate() {
            position[v] = k;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for &(a, b, _) in off_diagonal {
            let (i, j) = (position[a].max(position[b]), position[a].min(position[b]));
            first[i] = first[i].min(j);
        }
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + i - first[i] + 1);
        }
        let mut factor = vec![0.0; start[n]];
        for (v, &d) in diagonal.iter().enumerate() {
            let i = position[v];
            factor[start[i + 1] - 1] = d;
        }
        for &(a, b, value) in off_diagonal {
            let (i, j) = (position[a].max(position[b]), position[a].min(position[b]));
            factor[start[i] + j - first[i]] += value;
        }

        for i in 0..n {
            let (done, rest) = factor.split_at_mut(start[i]);
            let row = &mut rest[..i - first[i] + 1];
            for j in first[i]..i {
                let lo = first[i].max(first[j]);
                let row_j = &done[start[j]..start[j + 1]];
                let s = row[j - first[i]] - dot(&row[lo - first[i]..j - first[i]], &row_j[lo - first[j]..j - first[j]]);
                row[j - first[i]] = s / row_j[j - first[j]];
            }
            let k = i - first[i];
            let s = row[k] - dot(&row[..k], &row[..k]);
            if !(s > 0.0 && s.is_finite()) {
                return None;
            }
            row[k] = s.sqrt();
        }
        Some(EnvelopeCholesky {
            position,
            order: order.to_vec(),
            first,
            start,
            factor,
        })
    }

    /// Largest distance from the diagonal to the first stored column.
    pub fn bandwidth(&self) -> usize {
        self.first.iter().enumerate().map(|(i, f)| i - f).max().unwrap_or(0)
    }

    /// Overwrites `v` with `A⁻¹v`.
    pub fn solve_in_place(&self, v: &mut [f64]) {
        let n = self.order.len();
        assert_eq!(v.len(), n, "right-hand side length");
        let mut y: Vec<f64> = self.order.iter().map(|&node| v[node]).collect();
        for i in 0..n {
            let row = &self.factor[self.start[i]..self.start[i + 1]];
            let k = i - self.first[i];
            y[i] = (y[i] - dot(&row[..k], &y[self.first[i]..i])) / row[k];
        }
        for i in (0..n).rev() {
            let row = &self.factor[self.start[i]..self.start[i + 1]];
            let k = i - self.first[i];
            y[i] /= row[k];
            let yi = y[i];
            for (yk, l) in y[self.first[i]..i].iter_mut().zip(&row[..k]) {
                *yk -= l * yi;
            }
        }
        for (node, out) in v.iter_mut().enumerate() {
            *out = y[self.position[node]];
        }
    }
}
