//! Experiment runner, file formats and command line for `ipbt-core`.
//!
//! `run` executes one optimizer per seed and writes `history.jsonl`,
//! `summary.json`, `config.resolved.toml` and (for the population
//! optimizers) `checkpoint.bin` under `<output_dir>/seed_<s>/`. `compare`
//! turns summaries into the IQM / paired-bootstrap report, and `plotdata`
//! exports plot-ready CSV series from a history.

pub mod checkpoint;
pub mod compare;
pub mod config;
mod error;
pub mod history_file;
pub mod plotdata;
pub mod pool;
pub mod runner;

pub use error::{CliError, Result};
