//! Source bins (region × time slot) and detector bins.
//!
//! Source bin `j` for region `r` and slot `t` is `j = r·T + t`. Under the
//! three-kind layout, detector bins are ordered as all precise bins (same
//! order as the sources), then all self-declared bins, then one
//! no-location bin per slot.

use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceGrid {
    regions: Vec<String>,
    time_slots: usize,
    lookup: HashMap<String, usize>,
}

impl SourceGrid {
    pub fn new<S: Into<String>>(regions: impl IntoIterator<Item = S>, time_slots: usize) -> Result<Self> {
        let regions: Vec<String> = regions.into_iter().map(Into::into).collect();
        if regions.is_empty() {
            return Err(Error::validation("regions", "at least one region is required"));
        }
        if time_slots == 0 {
            return Err(Error::validation("time_slots", "must be positive"));
        }
        let mut lookup = HashMap::with_capacity(regions.len());
        for (k, r) in regions.iter().enumerate() {
            if r.is_empty() || r.chars().any(char::is_whitespace) {
                return Err(Error::validation("regions", format!("bad region code {r:?}")));
            }
            if lookup.insert(r.clone(), k).is_some() {
                return Err(Error::validation("regions", format!("duplicate region {r}")));
            }
        }
        Ok(SourceGrid {
            regions,
            time_slots,
            lookup,
        })
    }

    pub fn regions(&self) -> &[String] {
        &self.regions
    }

    pub fn num_regions(&self) -> usize {
        self.regions.len()
    }

    pub fn time_slots(&self) -> usize {
        self.time_slots
    }

    /// Total number of source bins.
    pub fn len(&self) -> usize {
        self.regions.len() * self.time_slots
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn region_index(&self, code: &str) -> Option<usize> {
        self.lookup.get(code).copied()
    }

    pub fn index(&self, region: usize, slot: usize) -> usize {
        debug_assert!(region < self.num_regions() && slot < self.time_slots);
        region * self.time_slots + slot
    }

    pub fn coords(&self, j: usize) -> (usize, usize) {
        (j / self.time_slots, j % self.time_slots)
    }

    /// Sums over time slots: one value per region.
    pub fn spatial_aggregate(&self, values: &[f64]) -> Vec<f64> {
        values.chunks(self.time_slots).map(|c| c.iter().sum()).collect()
    }

    /// Sums over regions: one value per time slot.
    pub fn temporal_aggregate(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.time_slots];
        for row in values.chunks(self.time_slots) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    /// Kind 1: coordinates available.
    Precise,
    /// Kind 2: location taken from the user's self-declared profile.
    SelfDeclared,
    /// Kind 3: no location at all.
    NoLocation,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 3] = [
        DetectorKind::Precise,
        DetectorKind::SelfDeclared,
        DetectorKind::NoLocation,
    ];

    /// 1, 2 or 3.
    pub fn number(self) -> u8 {
        match self {
            DetectorKind::Precise => 1,
            DetectorKind::SelfDeclared => 2,
            DetectorKind::NoLocation => 3,
        }
    }

    pub fn from_number(k: u8) -> Option<Self> {
        match k {
            1 => Some(DetectorKind::Precise),
            2 => Some(DetectorKind::SelfDeclared),
            3 => Some(DetectorKind::NoLocation),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DetectorBin {
    pub kind: DetectorKind,
    pub region: Option<usize>,
    pub slot: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DetectorLayout {
    bins: Vec<DetectorBin>,
    lookup: HashMap<DetectorBin, usize>,
}

impl DetectorLayout {
    pub fn new(bins: Vec<DetectorBin>) -> Result<Self> {
        let mut lookup = HashMap::with_capacity(bins.len());
        for (i, b) in bins.iter().enumerate() {
            if (b.kind == DetectorKind::NoLocation) != b.region.is_none() {
                return Err(Error::validation(
                    "detector layout",
                    format!("bin {i}: region must be absent exactly for no-location bins"),
                ));
            }
            if lookup.insert(*b, i).is_some() {
                return Err(Error::validation("detector layout", format!("duplicate bin {i}")));
            }
        }
        Ok(DetectorLayout { bins, lookup })
    }

    /// The (2·R + 1)·T layout: precise and self-declared bins per
    /// (region, slot), plus one shared no-location bin per slot.
    pub fn three_kind(grid: &SourceGrid) -> Self {
        let mut bins = Vec::with_capacity((2 * grid.num_regions() + 1) * grid.time_slots());
        for kind in [DetectorKind::Precise, DetectorKind::SelfDeclared] {
            for r in 0..grid.num_regions() {
                for t in 0..grid.time_slots() {
                    bins.push(DetectorBin {
                        kind,
                        region: Some(r),
                        slot: t,
                    });
                }
            }
        }
        for t in 0..grid.time_slots() {
            bins.push(DetectorBin {
                kind: DetectorKind::NoLocation,
                region: None,
                slot: t,
            });
        }
        Self::new(bins).expect("three-kind layout is well formed")
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn bins(&self) -> &[DetectorBin] {
        &self.bins
    }

    pub fn bin(&self, i: usize) -> DetectorBin {
        self.bins[i]
    }

    pub fn index_of(&self, bin: &DetectorBin) -> Option<usize> {
        self.lookup.get(bin).copied()
    }

    pub fn indices_of_kind(&self, kind: DetectorKind) -> Vec<usize> {
        (0..self.bins.len()).filter(|&i| self.bins[i].kind == kind).collect()
    }

    /// Contiguous index range of one kind, if the layout stores it contiguously.
    pub fn kind_range(&self, kind: DetectorKind) -> Option<Range<usize>> {
        let idx = self.indices_of_kind(kind);
        let (&first, &last) = (idx.first()?, idx.last()?);
        (last - first + 1 == idx.len()).then_some(first..last + 1)
    }

    /// Checks that this is exactly `three_kind(grid)`.
    pub fn is_three_kind_for(&self, grid: &SourceGrid) -> bool {
        *self == Self::three_kind(grid)
    }
}

/// Non-negative event counts over detector bins.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct CountVector {
    counts: Vec<u64>,
}

impl CountVector {
    pub fn new(counts: Vec<u64>) -> Self {
        CountVector { counts }
    }

    pub fn zeros(m: usize) -> Self {
        CountVector { counts: vec![0; m] }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.counts
    }

    pub fn as_mut_slice(&mut self) -> &mut [u64] {
        &mut self.counts
    }

    pub fn into_vec(self) -> Vec<u64> {
        self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    /// Counts of one kind, in layout order.
    pub fn kind(&self, layout: &DetectorLayout, kind: DetectorKind) -> Vec<u64> {
        layout
            .indices_of_kind(kind)
            .into_iter()
            .map(|i| self.counts[i])
            .collect()
    }

    pub fn kind_totals(&self, layout: &DetectorLayout) -> [u64; 3] {
        let mut out = [0u64; 3];
        for (c, b) in self.counts.iter().zip(layout.bins()) {
            out[b.kind.number() as usize - 1] += c;
        }
        out
    }
}

impl From<Vec<u64>> for CountVector {
    fn from(counts: Vec<u64>) -> Self {
        CountVector::new(counts)
    }
}
