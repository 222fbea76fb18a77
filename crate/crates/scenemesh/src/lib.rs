//! Batch pipeline around `scenemesh-core`: JSON and CSV artifacts, a
//! configuration file with command line overrides, per-stage manifests and
//! the `scenemesh` command line tool.
//!
//! A run directory holds every artifact of one configuration:
//!
//! ```text
//! manifest.json            stage -> manifest hash, plus the full config
//! manifests/<stage>.json   config hash, seed, input and output hashes
//! world/index.json         scene list (and generating clusters)
//! world/<scene>.json       clip corpora
//! models/<scene>.json      local topic models
//! affinity.json/.csv       scene relatedness
//! clustering.json          scene partition
//! stbs.json                shared topic bases (per cluster and flat)
//! profiles.json            clip profiles on every basis
//! query.json, retrieval.csv, map_curve.csv
//! classify.json, predictions.csv, accuracy.csv
//! coverage.json, coverage.csv, summaries.csv
//! report.json, stability.csv
//! sweep.csv
//! ```

pub mod artifact;
pub mod config;
pub mod error;
pub mod formats;
pub mod pipeline;

pub use config::{Overrides, PipelineConfig};
pub use error::{PipelineError, Result};
pub use pipeline::{run_with_jobs, Pipeline, Stage};
pub use scenemesh_core as core;
