//! Spatio-temporal neighbor graph over source bins and its combinatorial
//! Laplacian `L = D − W`.

use std::collections::BTreeSet;
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::grid::SourceGrid;
use crate::sparse::SparseMatrix;

/// Unordered region adjacency plus the temporal wraparound switch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdjacencySpec {
    /// Pairs stored with the lexicographically smaller code first.
    region_edges: BTreeSet<(String, String)>,
    pub temporal_wraparound: bool,
}

impl AdjacencySpec {
    pub fn new<S: Into<String>>(pairs: impl IntoIterator<Item = (S, S)>, temporal_wraparound: bool) -> Result<Self> {
        let mut region_edges = BTreeSet::new();
        for (a, b) in pairs {
            let (a, b) = (a.into(), b.into());
            if a == b {
                return Err(Error::validation("adjacency", format!("self-pair {a}-{b}")));
            }
            region_edges.insert(if a < b { (a, b) } else { (b, a) });
        }
        Ok(AdjacencySpec {
            region_edges,
            temporal_wraparound,
        })
    }

    /// Parses the plain-text format: one edge per line, two codes separated
    /// by whitespace, `#` starts a comment.
    pub fn parse<R: BufRead>(reader: R, temporal_wraparound: bool) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let fields: Vec<&str> = body.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::validation(
                    "adjacency",
                    format!("line {}: expected two region codes, got {:?}", lineno + 1, body),
                ));
            }
            pairs.push((fields[0].to_string(), fields[1].to_string()));
        }
        Self::new(pairs, temporal_wraparound)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.region_edges.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn len(&self) -> usize {
        self.region_edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.region_edges.is_empty()
    }

    pub fn neighbors<'a>(&'a self, region: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges().filter_map(move |(a, b)| {
            if a == region {
                Some(b)
            } else if b == region {
                Some(a)
            } else {
                None
            }
        })
    }
}

/// Weighted edge `(j, k, w)` with `j < k`.
pub type Edge = (usize, usize, f64);

#[derive(Clone, Debug, PartialEq)]
pub struct Laplacian {
    matrix: SparseMatrix,
    edges: Vec<Edge>,
    pub spatial_weight: f64,
    pub temporal_weight: f64,
}

impl Laplacian {
    /// Laplacian of an arbitrary undirected graph on `n` nodes. Parallel
    /// edges are merged by adding their weights.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut merged: Vec<Edge> = Vec::new();
        for (a, b, w) in edges {
            if a >= n || b >= n {
                return Err(Error::validation("graph edge", format!("({a}, {b}) outside {n} nodes")));
            }
            if a == b {
                return Err(Error::validation("graph edge", format!("self-loop at {a}")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::validation(
                    "graph edge",
                    format!("weight {w} must be finite and >= 0"),
                ));
            }
            merged.push(if a < b { (a, b, w) } else { (b, a, w) });
        }
        merged.sort_by_key(|e| (e.0, e.1));
        merged.dedup_by(|next, prev| {
            if next.0 == prev.0 && next.1 == prev.1 {
                prev.2 += next.2;
                true
            } else {
                false
            }
        });

        let mut degree = vec![0.0; n];
        let mut triplets = Vec::with_capacity(2 * merged.len() + n);
        for &(a, b, w) in &merged {
            degree[a] += w;
            degree[b] += w;
            triplets.push((a, b, -w));
            triplets.push((b, a, -w));
        }
        triplets.extend(degree.iter().enumerate().map(|(j, &d)| (j, j, d)));
        let matrix = SparseMatrix::from_triplets(n, n, triplets)?;
        Ok(Laplacian {
            matrix,
            edges: merged,
            spatial_weight: f64::NAN,
            temporal_weight: f64::NAN,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// `out = L·θ`, accumulated edge by edge so that constant `θ` gives
    /// exactly zero.
    pub fn apply_into(&self, theta: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(a, b, w) in &self.edges {
            let d = w * (theta[a] - theta[b]);
            out[a] += d;
            out[b] -= d;
        }
    }

    pub fn apply(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.apply_into(theta, &mut out);
        out
    }

    /// `½ θᵀLθ = ½ Σ_edges w (θ_j − θ_k)²`.
    pub fn penalty(&self, theta: &[f64]) -> Result<f64> {
        Error::check_len("penalty", self.dim(), theta.len())?;
        Ok(0.5
            * self
                .edges
                .iter()
                .map(|&(a, b, w)| w * (theta[a] - theta[b]).powi(2))
                .sum::<f64>())
    }

    /// `½ θᵀ(Lθ)` through the assembled matrix.
    pub fn penalty_matrix_form(&self, theta: &[f64]) -> Result<f64> {
        Error::check_len("penalty", self.dim(), theta.len())?;
        let lt = self.matrix.mul_vec(theta);
        Ok(0.5 * theta.iter().zip(&lt).map(|(a, b)| a * b).sum::<f64>())
    }
}

/// Free-function form of [`Laplacian::penalty`].
pub fn penalty(laplacian: &Laplacian, theta: &[f64]) -> Result<f64> {
    laplacian.penalty(theta)
}

/// Builds the source-bin graph: temporal edges `(r,t)–(r,t+1)` of weight
/// `w_t` (plus `(r,T−1)–(r,0)` when wrapping) and spatial edges
/// `(r,t)–(r′,t)` of weight `w_s` for every adjacent region pair.
pub fn build_laplacian(
    grid: &SourceGrid,
    adjacency: &AdjacencySpec,
    spatial_weight: f64,
    temporal_weight: f64,
) -> Result<Laplacian> {
    for (name, w) in [("spatial weight", spatial_weight), ("temporal weight", temporal_weight)] {
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::validation(name, format!("{w} must be positive and finite")));
        }
    }
    let slots = grid.time_slots();
    let mut edges = Vec::new();
    for r in 0..grid.num_regions() {
        for t in 0..slots.saturating_sub(1) {
            edges.push((grid.index(r, t), grid.index(r, t + 1), temporal_weight));
        }
        // With two slots the wrap edge would duplicate the only forward edge.
        if adjacency.temporal_wraparound && slots > 2 {
            edges.push((grid.index(r, slots - 1), grid.index(r, 0), temporal_weight));
        }
    }
    for (a, b) in adjacency.edges() {
        let ra = grid
            .region_index(a)
            .ok_or_else(|| Error::validation("adjacency", format!("unknown region {a}")))?;
        let rb = grid
            .region_index(b)
            .ok_or_else(|| Error::validation("adjacency", format!("unknown region {b}")))?;
        for t in 0..slots {
            edges.push((grid.index(ra, t), grid.index(rb, t), spatial_weight));
        }
    }
    let mut lap = Laplacian::from_edges(grid.len(), edges)?;
    lap.spatial_weight = spatial_weight;
    lap.temporal_weight = temporal_weight;
    Ok(lap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_spatial_edge() {
        let grid = SourceGrid::new(["A", "B"], 1).unwrap();
        let adj = AdjacencySpec::new([("A", "B")], false).unwrap();
        let lap = build_laplacian(&grid, &adj, 1.0, 123.0).unwrap();
        let m = lap.matrix();
        assert_eq!(
            [m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1)],
            [1.0, -1.0, -1.0, 1.0]
        );
    }

    #[test]
    fn single_temporal_edge_penalty() {
        let grid = SourceGrid::new(["A"], 2).unwrap();
        let adj = AdjacencySpec::new(Vec::<(String, String)>::new(), false).unwrap();
        let lap = build_laplacian(&grid, &adj, 1.0, 1.0).unwrap();
        assert_eq!(lap.penalty(&[1.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn wraparound_adds_edge() {
        let grid = SourceGrid::new(["A"], 4).unwrap();
        let no_wrap = AdjacencySpec::new(Vec::<(String, String)>::new(), false).unwrap();
        let wrap = AdjacencySpec::new(Vec::<(String, String)>::new(), true).unwrap();
        assert_eq!(build_laplacian(&grid, &no_wrap, 1.0, 1.0).unwrap().edges().len(), 3);
        let lap = build_laplacian(&grid, &wrap, 1.0, 2.0).unwrap();
        assert_eq!(lap.edges().len(), 4);
        assert_eq!(lap.matrix().get(0, 3), -2.0);
    }

    #[test]
    fn chain_penalty_both_forms() {
        let lap = Laplacian::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let theta = [0.0, 1.0, 3.0];
        // Edge-sum oracle: (1² + 2²) / 2.
        assert_eq!(lap.penalty(&theta).unwrap(), 2.5);
        assert!((lap.penalty_matrix_form(&theta).unwrap() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn constant_theta_is_free() {
        let lap = Laplacian::from_edges(4, [(0, 1, 3.0), (1, 2, 0.5), (2, 3, 7.0), (0, 3, 1.0)]).unwrap();
        assert_eq!(lap.penalty(&[2.5; 4]).unwrap(), 0.0);
    }

    #[test]
    fn validation_errors() {
        let grid = SourceGrid::new(["A", "B"], 2).unwrap();
        let adj = AdjacencySpec::new([("A", "Z")], true).unwrap();
        assert!(build_laplacian(&grid, &adj, 1.0, 1.0).is_err());
        let ok = AdjacencySpec::new([("A", "B")], true).unwrap();
        assert!(build_laplacian(&grid, &ok, 0.0, 1.0).is_err());
        assert!(build_laplacian(&grid, &ok, 1.0, -1.0).is_err());
        assert!(AdjacencySpec::new([("A", "A")], true).is_err());
        let lap = build_laplacian(&grid, &ok, 1.0, 1.0).unwrap();
        assert!(matches!(lap.penalty(&[1.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn parse_adjacency_file() {
        let text = "# header\nA B\n\nB   C # trailing\nC A\n";
        let adj = AdjacencySpec::parse(text.as_bytes(), true).unwrap();
        assert_eq!(adj.len(), 3);
        assert!(AdjacencySpec::parse("A B C\n".as_bytes(), true).is_err());
    }

    fn random_laplacian() -> impl Strategy<Value = (Laplacian, Vec<f64>)> {
        (2usize..12).prop_flat_map(|n| {
            let edges = prop::collection::vec((0..n, 0..n, 0.01f64..5.0), 1..30);
            let theta = prop::collection::vec(-10.0f64..10.0, n);
            (edges, theta).prop_map(move |(edges, theta)| {
                let edges: Vec<Edge> = edges.into_iter().filter(|e| e.0 != e.1).collect();
                (Laplacian::from_edges(n, edges).unwrap(), theta)
            })
        })
    }

    proptest! {
        #[test]
        fn matrix_form_equals_edge_sum((lap, theta) in random_laplacian()) {
            let a = lap.penalty_matrix_form(&theta).unwrap();
            let b = lap.penalty(&theta).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b));
        }

        #[test]
        fn shift_invariance((lap, theta) in random_laplacian(), c in -5.0f64..5.0) {
            let shifted: Vec<f64> = theta.iter().map(|t| t + c).collect();
            let a = lap.penalty(&theta).unwrap();
            let b = lap.penalty(&shifted).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
        }

        #[test]
        fn rows_sum_to_zero((lap, _theta) in random_laplacian()) {
            for s in lap.matrix().row_sums() {
                prop_assert!(s.abs() <= 1e-12);
            }
            prop_assert!(lap.matrix().is_symmetric(0.0));
        }
    }

    #[test]
    fn doubling_weights_doubles_penalty() {
        let grid = SourceGrid::new(["A", "B", "C"], 5).unwrap();
        let adj = AdjacencySpec::new([("A", "B"), ("B", "C")], true).unwrap();
        let l1 = build_laplacian(&grid, &adj, 0.3, 1.7).unwrap();
        let l2 = build_laplacian(&grid, &adj, 2.0 * 0.3, 2.0 * 1.7).unwrap();
        let theta: Vec<f64> = (0..15).map(|j| (j as f64 * 0.37).sin()).collect();
        assert_eq!(2.0 * l1.penalty(&theta).unwrap(), l2.penalty(&theta).unwrap());
    }
}
