//! Bundled region data for the 48 contiguous US states plus DC, and the
//! synthetic population and mis-declaration tallies used by the benchmark.
//!
//! `population.csv` and `misdeclare_counts.csv` are generated; rerun
//! `cargo run --example regenerate_data` after changing the generators.

use crate::error::Result;
use crate::graph::AdjacencySpec;
use crate::grid::SourceGrid;
use crate::io::{read_population_csv, read_region_list};
use crate::synthetic::{misdeclare_tally, population_profile, Centroids};
use crate::transition::read_misdeclare_counts;

pub const REGIONS: &str = include_str!("../data/us_regions.txt");
pub const ADJACENCY: &str = include_str!("../data/us_adjacency.txt");
pub const CENTROIDS: &str = include_str!("../data/us_centroids.csv");
pub const POPULATION: &str = include_str!("../data/population.csv");
pub const MISDECLARE_COUNTS: &str = include_str!("../data/misdeclare_counts.csv");

pub const HOURS: usize = 24;
pub const POPULATION_SEED: u64 = 2012;
pub const MISDECLARE_SEED: u64 = 49;
pub const MISDECLARE_PAIRS_PER_REGION: u64 = 400;

pub fn us_regions() -> Vec<String> {
    read_region_list(REGIONS.as_bytes()).expect("bundled region list parses")
}

pub fn us_grid(time_slots: usize) -> Result<SourceGrid> {
    SourceGrid::new(us_regions(), time_slots)
}

pub fn us_adjacency(temporal_wraparound: bool) -> Result<AdjacencySpec> {
    AdjacencySpec::parse(ADJACENCY.as_bytes(), temporal_wraparound)
}

pub fn us_centroids() -> Result<Centroids> {
    Centroids::read_csv(CENTROIDS.as_bytes())
}

/// Bundled `z⁽¹⁾` on the 49 × 24 hour-of-day grid.
pub fn population_counts(grid: &SourceGrid) -> Result<Vec<u64>> {
    read_population_csv(POPULATION.as_bytes(), grid)
}

pub fn misdeclare_counts() -> Result<Vec<(String, String, u64)>> {
    read_misdeclare_counts(MISDECLARE_COUNTS.as_bytes())
}

/// Regenerates the contents of `population.csv`.
pub fn generate_population(grid: &SourceGrid) -> Result<Vec<u64>> {
    population_profile(grid, &us_centroids()?, POPULATION_SEED)
}

/// Regenerates the contents of `misdeclare_counts.csv`.
pub fn generate_misdeclare_counts(grid: &SourceGrid, adjacency: &AdjacencySpec) -> Vec<(String, String, u64)> {
    misdeclare_tally(grid, adjacency, MISDECLARE_PAIRS_PER_REGION, MISDECLARE_SEED)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_tables_are_consistent() {
        let grid = us_grid(HOURS).unwrap();
        assert_eq!(grid.num_regions(), 49);
        let adj = us_adjacency(true).unwrap();
        for (a, b) in adj.edges() {
            assert!(
                grid.region_index(a).is_some() && grid.region_index(b).is_some(),
                "{a}-{b}"
            );
        }
        let c = us_centroids().unwrap();
        assert!(grid.regions().iter().all(|r| c.get(r).is_some()));
        // Every state except ME has at least two land neighbors.
        for r in grid.regions() {
            let k = adj.neighbors(r).count();
            assert!(k >= 1, "{r}");
            assert!(k >= 2 || r == "ME", "{r}");
        }
    }

    #[test]
    fn generated_files_match_generators() {
        let grid = us_grid(HOURS).unwrap();
        assert_eq!(population_counts(&grid).unwrap(), generate_population(&grid).unwrap());
        let adj = us_adjacency(true).unwrap();
        assert_eq!(misdeclare_counts().unwrap(), generate_misdeclare_counts(&grid, &adj));
    }
}
