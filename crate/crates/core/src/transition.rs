//! Source-to-detector transition matrix `P` and the mis-self-declare
//! matrix `M` it is built from.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DetectorBin, DetectorKind, DetectorLayout, SourceGrid};
use crate::sparse::SparseMatrix;

const STOCHASTIC_TOL: f64 = 1e-12;

/// Probabilities that an event lands in a precise, self-declared or
/// no-location detector bin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KindFractions {
    pub precise: f64,
    pub self_declared: f64,
    pub no_location: f64,
}

impl KindFractions {
    pub fn new(precise: f64, self_declared: f64, no_location: f64) -> Result<Self> {
        let f = KindFractions {
            precise,
            self_declared,
            no_location,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.as_array();
        if all.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(Error::validation("fractions", format!("{all:?} must lie in [0, 1]")));
        }
        let total: f64 = all.iter().sum();
        if (total - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::validation("fractions", format!("{all:?} sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.precise, self.self_declared, self.no_location]
    }

    pub fn of(&self, kind: DetectorKind) -> f64 {
        self.as_array()[kind.number() as usize - 1]
    }
}

impl Default for KindFractions {
    /// 3% geotagged, 47% self-declared profile location, 50% no location.
    fn default() -> Self {
        KindFractions {
            precise: 0.03,
            self_declared: 0.47,
            no_location: 0.50,
        }
    }
}

/// Dense `R×R` matrix, `M[r][s] = Pr(declare r | actual s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MisDeclareMatrix {
    size: usize,
    /// Row-major storage.
    values: Vec<f64>,
}

impl MisDeclareMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let size = rows.len();
        if rows.iter().any(|r| r.len() != size) {
            return Err(Error::validation("mis-declare matrix", "must be square"));
        }
        let m = MisDeclareMatrix {
            size,
            values: rows.into_iter().flatten().collect(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn identity(size: usize) -> Self {
        let mut values = vec![0.0; size * size];
        for r in 0..size {
            values[r * size + r] = 1.0;
        }
        MisDeclareMatrix { size, values }
    }

    fn validate(&self) -> Result<()> {
        if self.values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::validation("mis-declare matrix", "entries must lie in [0, 1]"));
        }
        for s in 0..self.size {
            let sum: f64 = (0..self.size).map(|r| self.get(r, s)).sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::validation(
                    "mis-declare matrix",
                    format!("column {s} sums to {sum}"),
                ));
            }
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// `Pr(declare r | actual s)`.
    pub fn get(&self, declared: usize, actual: usize) -> f64 {
        self.values[declared * self.size + actual]
    }
}

/// Estimates `M` by tallying `(declared, actual)` pairs per actual region and
/// normalizing with additive smoothing:
/// `M[r][s] = (count(r,s) + α) / (Σ_r′ count(r′,s) + α·R)`.
pub fn estimate_misdeclare<'a>(
    grid: &SourceGrid,
    pairs: impl IntoIterator<Item = (&'a str, &'a str, u64)>,
    smoothing: f64,
) -> Result<MisDeclareMatrix> {
    if !(smoothing.is_finite() && smoothing >= 0.0) {
        return Err(Error::validation("smoothing", format!("{smoothing} must be >= 0")));
    }
    let size = grid.num_regions();
    let mut counts = vec![0.0f64; size * size];
    for (declared, actual, count) in pairs {
        let r = grid
            .region_index(declared)
            .ok_or_else(|| Error::validation("mis-declare pair", format!("unknown region {declared}")))?;
        let s = grid
            .region_index(actual)
            .ok_or_else(|| Error::validation("mis-declare pair", format!("unknown region {actual}")))?;
        counts[r * size + s] += count as f64;
    }
    let mut values = vec![0.0; size * size];
    for s in 0..size {
        let column_total: f64 = (0..size).map(|r| counts[r * size + s]).sum();
        let denom = column_total + smoothing * size as f64;
        if denom <= 0.0 {
            return Err(Error::DegenerateColumn {
                region: grid.regions()[s].clone(),
            });
        }
        for r in 0..size {
            values[r * size + s] = (counts[r * size + s] + smoothing) / denom;
        }
    }
    Ok(MisDeclareMatrix { size, values })
}

/// Reads `declared,actual,count` rows (header required).
pub fn read_misdeclare_counts<R: Read>(reader: R) -> Result<Vec<(String, String, u64)>> {
    #[derive(Deserialize)]
    struct Row {
        declared: String,
        actual: String,
        count: u64,
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<Row>() {
        let row = row?;
        out.push((row.declared, row.actual, row.count));
    }
    Ok(out)
}

/// Non-negative `m×n` matrix mapping source intensities to detector
/// intensities.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    matrix: SparseMatrix,
}

impl TransitionMatrix {
    /// Accepts any column-stochastic matrix with entries in `[0, 1]`.
    pub fn new(matrix: SparseMatrix) -> Result<Self> {
        let t = Self::substochastic(matrix)?;
        for (j, s) in t.matrix.column_sums().into_iter().enumerate() {
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::validation(
                    "transition matrix",
                    format!("column {j} sums to {s}, expected 1"),
                ));
            }
        }
        Ok(t)
    }

    /// Accepts a matrix whose columns sum to at most one, as produced by
    /// keeping only some detector rows of a stochastic matrix.
    pub fn substochastic(matrix: SparseMatrix) -> Result<Self> {
        if matrix.triplets().any(|(_, _, v)| !(0.0..=1.0).contains(&v)) {
            return Err(Error::validation("transition matrix", "entries must lie in [0, 1]"));
        }
        for (j, s) in matrix.column_sums().into_iter().enumerate() {
            if s > 1.0 + STOCHASTIC_TOL {
                return Err(Error::validation(
                    "transition matrix",
                    format!("column {j} sums to {s} > 1"),
                ));
            }
        }
        Ok(TransitionMatrix { matrix })
    }

    pub fn identity(n: usize) -> Self {
        TransitionMatrix {
            matrix: SparseMatrix::identity(n),
        }
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    /// Number of detector bins.
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// Number of source bins.
    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_column_stochastic(&self) -> bool {
        self.matrix
            .column_sums()
            .iter()
            .all(|s| (s - 1.0).abs() <= STOCHASTIC_TOL)
    }

    /// Keeps the given detector rows; the result is generally substochastic.
    pub fn restrict_rows(&self, rows: &[usize]) -> Result<Self> {
        Self::substochastic(self.matrix.select_rows(rows)?)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::substochastic(self.matrix.scaled(factor))
    }

    /// Writes the coordinate list as `row,col,value`.
    pub fn write_coo_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["row", "col", "value"])?;
        for (i, j, v) in self.matrix.triplets() {
            w.write_record([i.to_string(), j.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_coo_csv<R: Read>(reader: R, rows: usize, cols: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut triplets = Vec::new();
        for rec in rdr.deserialize::<(usize, usize, f64)>() {
            triplets.push(rec?);
        }
        Self::new(SparseMatrix::from_triplets(rows, cols, triplets)?)
    }
}

/// Builds `P` for the three-kind layout: source `(s,t)` sends `ε₁` to
/// precise bin `(s,t)`, `ε₂·M[r][s]` to self-declared bin `(r,t)` for every
/// `r`, and `ε₃` to the no-location bin of slot `t`.
pub fn build_transition(
    grid: &SourceGrid,
    layout: &DetectorLayout,
    fractions: &KindFractions,
    misdeclare: &MisDeclareMatrix,
) -> Result<TransitionMatrix> {
    fractions.validate()?;
    Error::check_len(
        "transition layout",
        (2 * grid.num_regions() + 1) * grid.time_slots(),
        layout.len(),
    )?;
    Error::check_len("mis-declare matrix", grid.num_regions(), misdeclare.size())?;
    if !layout.is_three_kind_for(grid) {
        return Err(Error::validation(
            "detector layout",
            "not the three-kind layout for this grid",
        ));
    }
    let idx: HashMap<DetectorBin, usize> = layout.bins().iter().enumerate().map(|(i, b)| (*b, i)).collect();
    let bin = |kind, region, slot| idx[&DetectorBin { kind, region, slot }];

    let mut triplets = Vec::new();
    for s in 0..grid.num_regions() {
        for t in 0..grid.time_slots() {
            let j = grid.index(s, t);
            triplets.push((bin(DetectorKind::Precise, Some(s), t), j, fractions.precise));
            for r in 0..grid.num_regions() {
                let v = fractions.self_declared * misdeclare.get(r, s);
                triplets.push((bin(DetectorKind::SelfDeclared, Some(r), t), j, v));
            }
            triplets.push((bin(DetectorKind::NoLocation, None, t), j, fractions.no_location));
        }
    }
    let matrix = SparseMatrix::from_triplets(layout.len(), grid.len(), triplets)?;
    // Summing ε₂·M over r can drift from 1 by an ulp or two; the tolerance
    // in `new` absorbs that.
    TransitionMatrix::new(matrix)
}
