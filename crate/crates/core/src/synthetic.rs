//! Synthetic ground truth and data generators for the benchmark.

use std::collections::HashMap;
use std::io::Read;

use rand::distr::weighted::WeightedIndex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::AdjacencySpec;
use crate::grid::{CountVector, SourceGrid};
use crate::model::PopulationField;
use crate::transition::TransitionMatrix;

/// Kind-wise target totals `(x⁽¹⁾, x⁽²⁾, x⁽³⁾)` of the reference synthetic run.
pub const REFERENCE_KIND_TOTALS: [u64; 3] = [56, 1106, 1030];

/// Region centroids as `(lat, lon)` in degrees.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Centroids(HashMap<String, (f64, f64)>);

impl Centroids {
    pub fn new(map: HashMap<String, (f64, f64)>) -> Self {
        Centroids(map)
    }

    /// Reads `region,lat,lon` rows.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut map = HashMap::new();
        for row in rdr.deserialize::<(String, f64, f64)>() {
            let (region, lat, lon) = row?;
            map.insert(region, (lat, lon));
        }
        Ok(Centroids(map))
    }

    pub fn get(&self, region: &str) -> Option<(f64, f64)> {
        self.0.get(region).copied()
    }

    fn require(&self, region: &str) -> Result<(f64, f64)> {
        self.get(region)
            .ok_or_else(|| Error::validation("centroids", format!("missing centroid for {region}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    /// Region whose centroid is the mode.
    pub center: String,
    /// Standard deviation in degrees.
    pub sigma: f64,
}

/// Equal-weight mixture of two Gaussian bumps over region centroids,
/// constant in time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub components: [GaussianComponent; 2],
    pub amplitude: f64,
}

impl SyntheticSpec {
    /// Modes at Washington and New York, unit amplitude.
    pub fn two_coast() -> Self {
        SyntheticSpec {
            components: [
                GaussianComponent {
                    center: "WA".into(),
                    sigma: 8.0,
                },
                GaussianComponent {
                    center: "NY".into(),
                    sigma: 8.0,
                },
            ],
            amplitude: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(Error::validation("synthetic amplitude", "must be positive"));
        }
        if self.components.iter().any(|c| !(c.sigma.is_finite() && c.sigma > 0.0)) {
            return Err(Error::validation("synthetic sigma", "must be positive"));
        }
        Ok(())
    }
}

/// `f(s,t) = A · Σ_c ½ exp(−‖centroid(s) − μ_c‖² / 2σ_c²)`, identical for all `t`.
pub fn generate_truth(spec: &SyntheticSpec, grid: &SourceGrid, centroids: &Centroids) -> Result<Vec<f64>> {
    spec.validate()?;
    let modes: Vec<((f64, f64), f64)> = spec
        .components
        .iter()
        .map(|c| Ok((centroids.require(&c.center)?, c.sigma)))
        .collect::<Result<_>>()?;
    let mut f = Vec::with_capacity(grid.len());
    for region in grid.regions() {
        let (lat, lon) = centroids.require(region)?;
        let value: f64 = modes
            .iter()
            .map(|&((mlat, mlon), sigma)| {
                let d2 = (lat - mlat).powi(2) + (lon - mlon).powi(2);
                0.5 * (-d2 / (2.0 * sigma * sigma)).exp()
            })
            .sum::<f64>()
            * spec.amplitude;
        f.extend(std::iter::repeat_n(value, grid.time_slots()));
    }
    Ok(f)
}

/// Returns `spec` with the amplitude chosen so that the expected total count
/// `Σ_j f_j g_j` equals `target_total` under a column-stochastic transition.
pub fn calibrate_amplitude(
    spec: &SyntheticSpec,
    grid: &SourceGrid,
    centroids: &Centroids,
    population: &PopulationField,
    target_total: f64,
) -> Result<SyntheticSpec> {
    let unit = SyntheticSpec {
        amplitude: 1.0,
        ..spec.clone()
    };
    let f = generate_truth(&unit, grid, centroids)?;
    Error::check_len("population", f.len(), population.len())?;
    let mass: f64 = f.iter().zip(population.population()).map(|(a, g)| a * g).sum();
    Ok(SyntheticSpec {
        amplitude: target_total / mass,
        ..unit
    })
}

/// `xᵢ ~ Poisson(Σ_j P_ij f_j g_j)`, independently per detector bin.
pub fn sample_counts(
    truth: &[f64],
    population: &PopulationField,
    transition: &TransitionMatrix,
    seed: u64,
) -> Result<CountVector> {
    Error::check_len("truth", transition.cols(), truth.len())?;
    Error::check_len("population", transition.cols(), population.len())?;
    let eta: Vec<f64> = truth.iter().zip(population.population()).map(|(f, g)| f * g).collect();
    let h = transition.matrix().mul_vec(&eta);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts = h
        .iter()
        .map(|&mean| {
            if mean > 0.0 {
                Poisson::new(mean).expect("positive finite mean").sample(&mut rng) as u64
            } else {
                0
            }
        })
        .collect();
    Ok(CountVector::new(counts))
}

/// Synthetic all-post counts `z⁽¹⁾` per source bin on a UTC hour-of-day
/// grid: a log-normal level per region times a sinusoidal daily curve that
/// peaks at 16:00 local time, the local offset being the centroid longitude
/// rounded to whole hours.
pub fn population_profile(grid: &SourceGrid, centroids: &Centroids, seed: u64) -> Result<Vec<u64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lognormal = Normal::<f64>::new(0.0, 1.0).expect("valid normal");
    let slots = grid.time_slots() as f64;
    let mut z = Vec::with_capacity(grid.len());
    for region in grid.regions() {
        let (_, lon) = centroids.require(region)?;
        let offset_hours = (lon / 15.0).round();
        let level = 400.0 * lognormal.sample(&mut rng).exp();
        for t in 0..grid.time_slots() {
            let local_hour = t as f64 * 24.0 / slots + offset_hours;
            let phase = 2.0 * std::f64::consts::PI * (local_hour - 10.0) / 24.0;
            let diurnal = 1.0 + 0.7 * phase.sin();
            z.push((level * diurnal).round() as u64);
        }
    }
    Ok(z)
}

/// Regions whose names are commonly self-declared by users located
/// elsewhere, with the probability mass they draw.
const HUBS: [(&str, f64); 4] = [("CA", 0.04), ("NY", 0.03), ("TX", 0.02), ("FL", 0.02)];

/// Simulated `(declared, actual, count)` tallies from users reporting both a
/// profile region and coordinates. For an actual region `s`: 55% declare
/// `s`, a fixed share declares one of the hub regions, 20% a neighbor of
/// `s`; users in MD and VA declare DC 10% of the time. Mass that would fall
/// on `s` itself stays on `s`.
pub fn misdeclare_tally(
    grid: &SourceGrid,
    adjacency: &AdjacencySpec,
    pairs_per_region: u64,
    seed: u64,
) -> Vec<(String, String, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (s, actual) in grid.regions().iter().enumerate() {
        let mut probs = vec![0.0f64; grid.num_regions()];
        let mut add = |region: &str, p: f64| {
            probs[grid.region_index(region).unwrap_or(s)] += p;
        };
        add(actual, 0.55);
        for (hub, p) in HUBS {
            add(hub, p);
        }
        let dc = if actual == "MD" || actual == "VA" { 0.10 } else { 0.0 };
        add("DC", dc);
        let neighbors: Vec<&str> = adjacency.neighbors(actual).collect();
        let neighbor_mass = 0.20 - dc;
        if neighbors.is_empty() {
            add(actual, neighbor_mass);
        } else {
            for nb in &neighbors {
                add(nb, neighbor_mass / neighbors.len() as f64);
            }
        }
        let dist = WeightedIndex::new(&probs).expect("positive total weight");
        let mut counts = vec![0u64; probs.len()];
        for _ in 0..pairs_per_region {
            counts[dist.sample(&mut rng)] += 1;
        }
        for (r, c) in counts.into_iter().enumerate() {
            if c > 0 {
                out.push((grid.regions()[r].clone(), actual.clone(), c));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_grid() -> (SourceGrid, Centroids) {
        let grid = SourceGrid::new(["A", "B", "C"], 4).unwrap();
        let mut map = HashMap::new();
        map.insert("A".to_string(), (0.0, 0.0));
        map.insert("B".to_string(), (0.0, 5.0));
        map.insert("C".to_string(), (0.0, 10.0));
        (grid, Centroids::new(map))
    }

    fn spec(a: (&str, f64), b: (&str, f64)) -> SyntheticSpec {
        SyntheticSpec {
            components: [
                GaussianComponent {
                    center: a.0.into(),
                    sigma: a.1,
                },
                GaussianComponent {
                    center: b.0.into(),
                    sigma: b.1,
                },
            ],
            amplitude: 2.0,
        }
    }

    #[test]
    fn narrow_component_concentrates_on_center() {
        let (grid, c) = line_grid();
        let f = generate_truth(&spec(("A", 0.1), ("A", 0.1)), &grid, &c).unwrap();
        assert_eq!(f[0], 2.0);
        assert!(f[grid.index(1, 0)] < 1e-100);
        assert!(f.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn constant_in_time() {
        let (grid, c) = line_grid();
        let f = generate_truth(&spec(("A", 3.0), ("C", 4.0)), &grid, &c).unwrap();
        for r in 0..3 {
            for t in 1..4 {
                assert_eq!(f[grid.index(r, t)], f[grid.index(r, 0)]);
            }
        }
    }

    #[test]
    fn components_are_exchangeable() {
        let (grid, c) = line_grid();
        let a = generate_truth(&spec(("A", 3.0), ("C", 4.0)), &grid, &c).unwrap();
        let b = generate_truth(&spec(("C", 4.0), ("A", 3.0)), &grid, &c).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_centroid() {
        let (grid, c) = line_grid();
        assert!(generate_truth(&spec(("Z", 3.0), ("A", 1.0)), &grid, &c).is_err());
        let grid2 = SourceGrid::new(["A", "Q"], 1).unwrap();
        assert!(generate_truth(&spec(("A", 3.0), ("A", 1.0)), &grid2, &c).is_err());
    }

    #[test]
    fn zero_truth_gives_zero_counts() {
        let p = TransitionMatrix::identity(4);
        let pop = PopulationField::from_log(vec![1.0; 4]).unwrap();
        let x = sample_counts(&[0.0; 4], &pop, &p, 9).unwrap();
        assert_eq!(x.total(), 0);
    }

    #[test]
    fn calibration_hits_target_mass() {
        let (grid, c) = line_grid();
        let pop = PopulationField::from_counts(&[10, 20, 30, 40, 1, 2, 3, 4, 100, 100, 100, 100], 0.5).unwrap();
        let s = calibrate_amplitude(&spec(("A", 3.0), ("C", 4.0)), &grid, &c, &pop, 500.0).unwrap();
        let f = generate_truth(&s, &grid, &c).unwrap();
        let mass: f64 = f.iter().zip(pop.population()).map(|(a, b)| a * b).sum();
        assert!((mass - 500.0).abs() < 1e-9);
    }

    #[test]
    fn sampling_is_seeded() {
        let p = TransitionMatrix::identity(50);
        let pop = PopulationField::from_log(vec![0.0; 50]).unwrap();
        let f = vec![3.0; 50];
        assert_eq!(
            sample_counts(&f, &pop, &p, 1).unwrap(),
            sample_counts(&f, &pop, &p, 1).unwrap()
        );
        assert_ne!(
            sample_counts(&f, &pop, &p, 1).unwrap(),
            sample_counts(&f, &pop, &p, 2).unwrap()
        );
    }

    #[test]
    fn tally_covers_every_actual_region() {
        let grid = SourceGrid::new(["CA", "NY", "MD", "DC", "VA"], 1).unwrap();
        let adj = AdjacencySpec::new([("MD", "DC"), ("VA", "DC"), ("MD", "VA")], true).unwrap();
        let tally = misdeclare_tally(&grid, &adj, 1000, 4);
        for r in grid.regions() {
            let total: u64 = tally.iter().filter(|t| &t.1 == r).map(|t| t.2).sum();
            assert_eq!(total, 1000);
        }
        let md_dc: u64 = tally.iter().filter(|t| t.0 == "DC" && t.1 == "MD").map(|t| t.2).sum();
        assert!(md_dc > 100, "{md_dc}");
    }
}
