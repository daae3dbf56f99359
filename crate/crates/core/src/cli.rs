//! Command-line interface.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::baselines::{run_bench, summarize, write_bench_csv, WeightChoice};
use crate::config::{Inputs, RunConfig};
use crate::cv::{select_weights, CvReport};
use crate::error::{Error, Result};
use crate::ingest::{bin_events, precise_by_source, read_events, scale_no_location, EventFilter};
use crate::io::{
    read_counts_csv, write_counts_csv, write_intensity_csv, write_json, write_population_csv, write_spatial_csv,
    write_temporal_csv,
};
use crate::model::PenalizedPoisson;
use crate::optimizer::{fit, initial_guess, Termination};

#[derive(Debug, Parser)]
#[command(
    name = "countmap",
    version,
    about = "Penalized Poisson intensity maps from sparse, corrupted event counts"
)]
pub struct Cli {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FilterArg {
    Target,
    All,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bin an events CSV into detector counts (`counts.csv`) or, with
    /// `--filter all`, into population counts (`population.csv`).
    Bin {
        #[arg(long)]
        events: PathBuf,
        #[arg(long, value_enum, default_value_t = FilterArg::Target)]
        filter: FilterArg,
    },
    /// Fit the intensity map and write it with its spatial and temporal
    /// aggregates.
    Estimate {
        #[arg(long)]
        counts: PathBuf,
        /// Take the graph weights from a `cv_report.json`.
        #[arg(long)]
        weights_from: Option<PathBuf>,
    },
    /// Choose graph weights by count-thinning cross-validation.
    Cv {
        #[arg(long)]
        counts: PathBuf,
    },
    /// Sample a synthetic dataset with known truth.
    Synth,
    /// Score the six estimators on synthetic replicates.
    Baselines {
        /// Number of replicates, seeded `seed, seed+1, …`.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        /// Use the configured weights instead of cross-validating each
        /// replicate.
        #[arg(long)]
        fixed_weights: bool,
    },
}

#[derive(Serialize)]
struct FitSummary {
    spatial_weight: f64,
    temporal_weight: f64,
    objective: f64,
    initial_objective: f64,
    iterations: usize,
    evaluations: usize,
    grad_inf_norm: f64,
    termination: Termination,
    used_fallback_init: bool,
    total_intensity: f64,
}

#[derive(Serialize)]
struct SynthSummary {
    seed: u64,
    amplitude: f64,
    expected_kind_totals: [f64; 3],
    kind_totals: [u64; 3],
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<&'a str>,
    message: String,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let inputs = Inputs::load(&cfg)?;
    fs::create_dir_all(&cli.out)?;
    let out = cli.out.as_path();
    match &cli.command {
        Command::Bin { events, filter } => {
            let filter = match filter {
                FilterArg::Target => EventFilter::Target,
                FilterArg::All => EventFilter::All,
            };
            let (mut counts, report) = bin_events(
                read_events(File::open(events)?),
                &inputs.grid,
                &inputs.layout,
                &cfg.slot_mapping()?,
                filter,
            )?;
            match filter {
                EventFilter::Target => {
                    scale_no_location(&mut counts, &inputs.layout, cfg.no_location_multiplier)?;
                    write_counts_csv(create(out, "counts.csv")?, &inputs.grid, &inputs.layout, &counts)?;
                }
                EventFilter::All => {
                    let z = precise_by_source(&counts, &inputs.grid, &inputs.layout);
                    write_population_csv(create(out, "population.csv")?, &inputs.grid, &z)?;
                }
            }
            write_json(create(out, "ingest_report.json")?, &report)?;
            if !report.rejected.is_empty() {
                eprintln!(
                    "{} of {} records rejected; see ingest_report.json",
                    report.rejected.len(),
                    report.records
                );
            }
        }
        Command::Estimate { counts, weights_from } => {
            let x = read_counts_csv(File::open(counts)?, &inputs.grid, &inputs.layout)?;
            let (ws, wt) = match weights_from {
                Some(p) => {
                    let report: CvReport = serde_json::from_reader(File::open(p)?)?;
                    (report.spatial_weight, report.temporal_weight)
                }
                None => (cfg.spatial_weight, cfg.temporal_weight),
            };
            let population = inputs.population(&cfg)?;
            let laplacian = inputs.laplacian(ws, wt)?;
            let problem = PenalizedPoisson::new(&population, &inputs.transition, &x, &laplacian, 1.0)?;
            let init = initial_guess(&x, &inputs.transition, &population, cfg.optimizer.init_floor)?;
            let result = fit(&init.theta, &problem, &cfg.optimizer)?;
            let f = &result.intensity;
            write_intensity_csv(create(out, "intensity.csv")?, &inputs.grid, f)?;
            write_spatial_csv(create(out, "intensity_spatial.csv")?, &inputs.grid, f)?;
            write_temporal_csv(create(out, "intensity_temporal.csv")?, &inputs.grid, f)?;
            let summary = FitSummary {
                spatial_weight: ws,
                temporal_weight: wt,
                objective: result.objective,
                initial_objective: result.initial_objective,
                iterations: result.iterations,
                evaluations: result.evaluations,
                grad_inf_norm: result.grad_inf_norm,
                termination: result.termination,
                used_fallback_init: init.used_fallback,
                total_intensity: f.iter().sum(),
            };
            write_json(create(out, "fit.json")?, &summary)?;
        }
        Command::Cv { counts } => {
            let x = read_counts_csv(File::open(counts)?, &inputs.grid, &inputs.layout)?;
            let population = inputs.population(&cfg)?;
            let report = select_weights(
                &x,
                &population,
                &inputs.transition,
                |ws, wt| inputs.laplacian(ws, wt),
                &cfg.cv_plan()?,
                &cfg.optimizer,
            )?;
            write_json(create(out, "cv_report.json")?, &report)?;
        }
        Command::Synth => {
            let setup = inputs.bench_setup(&cfg)?;
            let x = setup.sample(cfg.seed)?;
            write_counts_csv(create(out, "counts.csv")?, &setup.grid, &setup.layout, &x)?;
            write_intensity_csv(create(out, "truth.csv")?, &setup.grid, &setup.truth)?;
            write_population_csv(create(out, "population.csv")?, &setup.grid, &setup.z1)?;
            let summary = SynthSummary {
                seed: cfg.seed,
                amplitude: setup.spec.amplitude,
                expected_kind_totals: setup.expected_kind_totals(),
                kind_totals: x.kind_totals(&setup.layout),
            };
            write_json(create(out, "synth.json")?, &summary)?;
        }
        Command::Baselines { seeds, fixed_weights } => {
            let setup = inputs.bench_setup(&cfg)?;
            let seed_list: Vec<u64> = (0..*seeds).map(|k| cfg.seed.wrapping_add(k)).collect();
            let weights = if *fixed_weights {
                WeightChoice::Fixed {
                    spatial: cfg.spatial_weight,
                    temporal: cfg.temporal_weight,
                }
            } else {
                WeightChoice::CrossValidate(cfg.cv_plan()?)
            };
            let results = run_bench(&setup, &seed_list, &weights, &cfg.optimizer, cfg.execution)?;
            write_bench_csv(create(out, "baselines.csv")?, &results)?;
            write_json(create(out, "baselines_summary.json")?, &summarize(&results)?)?;
            write_json(create(out, "baselines_runs.json")?, &results)?;
        }
    }
    Ok(())
}

fn report_error(e: &Error) {
    let (kind, field) = match e {
        Error::Validation { field, .. } => ("validation", Some(field.as_str())),
        Error::Dimension { .. } => ("dimension", None),
        Error::DegenerateColumn { .. } => ("degenerate_column", None),
        Error::Diverged => ("diverged", None),
        Error::Io(_) => ("io", None),
        Error::Csv(_) => ("csv", None),
        Error::Json(_) => ("json", None),
    };
    let report = ErrorReport {
        error: kind,
        field,
        message: e.to_string(),
    };
    eprintln!("{}", serde_json::to_string(&report).expect("error report serializes"));
}

/// Parses `args` (program name first) and runs. Returns the process exit
/// code: 0 on success, 1 on a failed run, 2 on a usage error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            report_error(&e);
            1
        }
    }
}
