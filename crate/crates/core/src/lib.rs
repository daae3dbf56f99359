//! Recovery of a non-negative spatio-temporal intensity from sparse,
//! population-biased and location-corrupted event counts by penalized
//! Poisson maximum likelihood.
//!
//! The pipeline: bin events into detector counts ([`ingest`]), describe how
//! source bins leak into detector bins ([`transition`]), smooth over a
//! region/time graph ([`graph`]), minimize the penalized negative
//! log-likelihood ([`model`], [`optimizer`]) and pick graph weights by
//! count-thinning cross-validation ([`cv`]). [`synthetic`] and
//! [`baselines`] regenerate a benchmark with known ground truth.

pub mod baselines;
pub mod cli;
pub mod config;
pub mod cv;
pub mod data;
pub mod envelope;
pub mod error;
pub mod graph;
pub mod grid;
pub mod ingest;
pub mod io;
pub mod model;
pub mod optimizer;
pub mod parallel;
pub mod sparse;
pub mod synthetic;
pub mod transition;

pub use error::{Error, Result};
