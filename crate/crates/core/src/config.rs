//! JSON run configuration and the inputs it resolves to.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::BenchSetup;
use crate::cv::{log10_axis, square_grid, CvPlan};
use crate::data;
use crate::error::{Error, Result};
use crate::graph::{build_laplacian, AdjacencySpec, Laplacian};
use crate::grid::{DetectorLayout, SourceGrid};
use crate::ingest::SlotMapping;
use crate::io::{read_population_csv, read_region_list};
use crate::model::PopulationField;
use crate::optimizer::OptimizerConfig;
use crate::parallel::Execution;
use crate::synthetic::{Centroids, SyntheticSpec, REFERENCE_KIND_TOTALS};
use crate::transition::{
    build_transition, estimate_misdeclare, read_misdeclare_counts, KindFractions, TransitionMatrix,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    /// The same `10^k` axis for both weights.
    Log10Range { lo: f64, hi: f64, step: f64 },
    /// Explicit `(w_s, w_t)` pairs.
    Points(Vec<(f64, f64)>),
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<(f64, f64)>> {
        match self {
            GridSpec::Log10Range { lo, hi, step } => Ok(square_grid(&log10_axis(*lo, *hi, *step)?)),
            GridSpec::Points(p) => Ok(p.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub holdout_fraction: f64,
    pub num_splits: usize,
    pub grid: GridSpec,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            holdout_fraction: 0.2,
            num_splits: 5,
            grid: GridSpec::Log10Range {
                lo: -3.0,
                hi: 3.0,
                step: 0.5,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub spec: SyntheticSpec,
    /// Expected total count the amplitude is calibrated to.
    pub target_total: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            spec: SyntheticSpec::two_coast(),
            target_total: REFERENCE_KIND_TOTALS.iter().sum::<u64>() as f64,
        }
    }
}

/// Every file path is optional; absent paths fall back to the bundled
/// US data. Relative paths resolve against the config file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub regions: Option<PathBuf>,
    pub adjacency: Option<PathBuf>,
    pub centroids: Option<PathBuf>,
    /// `region,slot,count` all-post counts.
    pub population: Option<PathBuf>,
    /// `declared,actual,count` tallies.
    pub misdeclare_counts: Option<PathBuf>,
    pub time_slots: usize,
    pub temporal_wraparound: bool,
    pub utc_offset_minutes: i32,
    pub fractions: KindFractions,
    pub misdeclare_smoothing: f64,
    pub no_location_multiplier: f64,
    pub population_floor: f64,
    pub spatial_weight: f64,
    pub temporal_weight: f64,
    pub cv: CvConfig,
    pub optimizer: OptimizerConfig,
    pub synthetic: SyntheticConfig,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            regions: None,
            adjacency: None,
            centroids: None,
            population: None,
            misdeclare_counts: None,
            time_slots: data::HOURS,
            temporal_wraparound: true,
            utc_offset_minutes: 0,
            fractions: KindFractions::default(),
            misdeclare_smoothing: 0.5,
            no_location_multiplier: 1.0,
            population_floor: crate::model::DEFAULT_POPULATION_FLOOR,
            spatial_weight: 1.0,
            temporal_weight: 1.0,
            cv: CvConfig::default(),
            optimizer: OptimizerConfig::default(),
            synthetic: SyntheticConfig::default(),
            seed: 0,
            execution: Execution::default(),
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(field, format!("{v} must be positive and finite")))
    }
}

impl RunConfig {
    /// Parses, resolves relative paths and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in cfg.paths_mut().into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn paths_mut(&mut self) -> [&mut Option<PathBuf>; 5] {
        [
            &mut self.regions,
            &mut self.adjacency,
            &mut self.centroids,
            &mut self.population,
            &mut self.misdeclare_counts,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("regions", &self.regions),
            ("adjacency", &self.adjacency),
            ("centroids", &self.centroids),
            ("population", &self.population),
            ("misdeclare_counts", &self.misdeclare_counts),
        ];
        for (field, path) in named {
            if let Some(p) = path {
                if !p.is_file() {
                    return Err(Error::validation(field, format!("{} does not exist", p.display())));
                }
            }
        }
        SlotMapping::new(self.time_slots, self.utc_offset_minutes)?;
        self.fractions.validate()?;
        if !(self.misdeclare_smoothing.is_finite() && self.misdeclare_smoothing >= 0.0) {
            return Err(Error::validation("misdeclare_smoothing", "must be >= 0"));
        }
        if !(self.no_location_multiplier.is_finite() && self.no_location_multiplier >= 0.0) {
            return Err(Error::validation("no_location_multiplier", "must be >= 0"));
        }
        positive("population_floor", self.population_floor)?;
        positive("spatial_weight", self.spatial_weight)?;
        positive("temporal_weight", self.temporal_weight)?;
        positive("synthetic.target_total", self.synthetic.target_total)?;
        self.cv_plan()?.validate()?;
        self.optimizer.validate()
    }

    pub fn cv_plan(&self) -> Result<CvPlan> {
        let grid = self.cv.grid.points()?;
        if let Some(&(ws, wt)) = grid
            .iter()
            .find(|(ws, wt)| !(*ws > 0.0 && *wt > 0.0 && ws.is_finite() && wt.is_finite()))
        {
            return Err(Error::validation(
                "cv.grid",
                format!("weights ({ws}, {wt}) must be positive"),
            ));
        }
        Ok(CvPlan {
            holdout_fraction: self.cv.holdout_fraction,
            num_splits: self.cv.num_splits,
            grid,
            seed: self.seed,
            execution: self.execution,
        })
    }

    pub fn slot_mapping(&self) -> Result<SlotMapping> {
        SlotMapping::new(self.time_slots, self.utc_offset_minutes)
    }

    fn uses_bundled_grid(&self) -> bool {
        self.regions.is_none() && self.time_slots == data::HOURS
    }
}

/// Grid, graph and transition resolved from a [`RunConfig`].
#[derive(Clone, Debug)]
pub struct Inputs {
    pub grid: SourceGrid,
    pub layout: DetectorLayout,
    pub adjacency: AdjacencySpec,
    pub transition: TransitionMatrix,
}

impl Inputs {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let regions = match &cfg.regions {
            Some(p) => read_region_list(BufReader::new(File::open(p)?))?,
            None => data::us_regions(),
        };
        let grid = SourceGrid::new(regions, cfg.time_slots)?;
        let adjacency = match &cfg.adjacency {
            Some(p) => AdjacencySpec::parse(BufReader::new(File::open(p)?), cfg.temporal_wraparound)?,
            None => data::us_adjacency(cfg.temporal_wraparound)?,
        };
        let pairs = match &cfg.misdeclare_counts {
            Some(p) => read_misdeclare_counts(File::open(p)?)?,
            None => data::misdeclare_counts()?,
        };
        let m = estimate_misdeclare(
            &grid,
            pairs.iter().map(|(d, a, c)| (d.as_str(), a.as_str(), *c)),
            cfg.misdeclare_smoothing,
        )?;
        let layout = DetectorLayout::three_kind(&grid);
        let transition = build_transition(&grid, &layout, &cfg.fractions, &m)?;
        Ok(Inputs {
            grid,
            layout,
            adjacency,
            transition,
        })
    }

    /// `z⁽¹⁾` from the configured file, or the bundled profile.
    pub fn population_counts(&self, cfg: &RunConfig) -> Result<Vec<u64>> {
        match &cfg.population {
            Some(p) => read_population_csv(File::open(p)?, &self.grid),
            None if cfg.uses_bundled_grid() => data::population_counts(&self.grid),
            None => Err(Error::validation(
                "population",
                "required when regions or time_slots differ from the bundled grid",
            )),
        }
    }

    pub fn population(&self, cfg: &RunConfig) -> Result<PopulationField> {
        PopulationField::from_counts(&self.population_counts(cfg)?, cfg.population_floor)
    }

    pub fn laplacian(&self, spatial_weight: f64, temporal_weight: f64) -> Result<Laplacian> {
        build_laplacian(&self.grid, &self.adjacency, spatial_weight, temporal_weight)
    }

    pub fn centroids(&self, cfg: &RunConfig) -> Result<Centroids> {
        match &cfg.centroids {
            Some(p) => Centroids::read_csv(File::open(p)?),
            None => data::us_centroids(),
        }
    }

    /// Synthetic benchmark setup over these inputs.
    pub fn bench_setup(&self, cfg: &RunConfig) -> Result<BenchSetup> {
        BenchSetup::new(
            self.grid.clone(),
            self.adjacency.clone(),
            &self.centroids(cfg)?,
            self.population_counts(cfg)?,
            self.transition.clone(),
            cfg.fractions,
            &cfg.synthetic.spec,
            cfg.synthetic.target_total,
        )
    }
}
