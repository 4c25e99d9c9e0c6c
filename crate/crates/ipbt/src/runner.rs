//! Per-seed execution and output files.

use std::fs;
use std::path::{Path, PathBuf};

use ipbt_core::baselines::asha::{self, AshaConfig};
use ipbt_core::baselines::pbt_engine;
use ipbt_core::baselines::random_search::{self, RandomSearchConfig};
use ipbt_core::engine::{Engine, EngineConfig, TrainPool};
use ipbt_core::history::RunHistory;
use ipbt_core::hpspace::HyperparameterSpace;
use ipbt_core::trainable::Trainable;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::config::{ExperimentConfig, Optimizer};
use crate::history_file::HistoryWriter;
use crate::pool::RayonPool;
use crate::{CliError, Result};

pub const HISTORY_FILE: &str = "history.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.resolved.toml";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

/// Environment variable prepended to relative `output_dir`s.
pub const OUTPUT_ROOT_ENV: &str = "IPBT_OUTPUT_ROOT";

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub task: String,
    pub algorithm: String,
    pub optimizer: Optimizer,
    pub seed: u64,
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub best_score: Option<f64>,
    pub restart_count: usize,
    pub step_size_schedule: Vec<u64>,
    pub outer_steps: usize,
    /// Inner steps the optimizer was allowed: per member for ipbt and pbt,
    /// in total for random search and ASHA.
    pub configured_budget: u64,
    pub consumed_budget: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engine: Option<EngineConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asha: Option<AshaConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_search: Option<RandomSearchConfig>,
}

impl SeedSummary {
    fn new(cfg: &ExperimentConfig, seed: u64) -> Self {
        let population = cfg.optimizer.is_population_based();
        SeedSummary {
            task: cfg.name.clone(),
            algorithm: cfg.algorithm().to_string(),
            optimizer: cfg.optimizer,
            seed,
            complete: false,
            error: None,
            best_score: None,
            restart_count: 0,
            step_size_schedule: Vec::new(),
            outer_steps: 0,
            configured_budget: if population { cfg.budget } else { cfg.total_budget() },
            consumed_budget: 0,
            engine: population.then(|| cfg.engine_config(seed)),
            asha: (cfg.optimizer == Optimizer::Asha).then(|| cfg.asha_config(seed)),
            random_search: (cfg.optimizer == Optimizer::RandomSearch).then(|| cfg.random_search_config(seed)),
        }
    }

    fn update(&mut self, h: &RunHistory) {
        self.best_score = h.best_score();
        self.restart_count = h.restart_count();
        self.step_size_schedule = h.step_size_schedule();
        self.outer_steps = h.steps.len();
        self.consumed_budget = h.inner_steps;
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
    }

    fn save(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::Runtime(e.to_string()))?;
        text.push('\n');
        checkpoint::write_atomic(&dir.join(SUMMARY_FILE), text.as_bytes())
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub resume: bool,
    /// Seeds run concurrently; 0 or 1 runs them one after another.
    pub parallel_seeds: usize,
    /// Training threads; 0 uses every core.
    pub threads: usize,
    /// Overrides the environment variable.
    pub output_root: Option<PathBuf>,
}

/// Directory holding all seeds of an experiment.
pub fn experiment_dir(cfg: &ExperimentConfig, output_root: Option<&Path>) -> PathBuf {
    let root = output_root
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from));
    match root {
        Some(r) => r.join(&cfg.output_dir),
        None => cfg.output_dir.clone(),
    }
}

pub fn seed_dir(experiment: &Path, seed: u64) -> PathBuf {
    experiment.join(format!("seed_{seed}"))
}

/// Runs every seed; results come back in seed order.
pub fn run_experiment(cfg: &ExperimentConfig, seeds: &[u64], opts: &RunOptions) -> Result<Vec<(u64, Result<SeedSummary>)>> {
    let exp = experiment_dir(cfg, opts.output_root.as_deref());
    let pool = RayonPool::new(opts.threads.max(opts.parallel_seeds))?;
    let one = |s: u64| (s, run_seed(cfg, s, &seed_dir(&exp, s), opts.resume, &pool));
    Ok(if opts.parallel_seeds > 1 {
        let seeds_pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.parallel_seeds)
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        seeds_pool.install(|| seeds.par_iter().map(|&s| one(s)).collect())
    } else {
        seeds.iter().map(|&s| one(s)).collect()
    })
}

/// Runs one seed into `dir`. On failure the outputs written so far stay in
/// place and the summary is marked incomplete.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64, dir: &Path, resume: bool, pool: &dyn TrainPool) -> Result<SeedSummary> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let resolved = ExperimentConfig {
        seeds: vec![seed],
        ..cfg.clone()
    };
    checkpoint::write_atomic(&dir.join(CONFIG_FILE), resolved.to_toml()?.as_bytes())?;
    let space = cfg.space()?;
    let trainable = cfg.trainable.build(&space)?;

    let mut summary = SeedSummary::new(cfg, seed);
    let outcome = match cfg.optimizer {
        Optimizer::Ipbt | Optimizer::Pbt => run_population(cfg, seed, dir, resume, &space, trainable.as_ref(), pool, &mut summary),
        Optimizer::RandomSearch => {
            summary.save(dir)?;
            random_search::run(&cfg.random_search_config(seed), &space, trainable.as_ref(), pool)
                .map_err(CliError::from)
                .and_then(|h| write_whole(dir, &h, &space, &mut summary))
        }
        Optimizer::Asha => {
            summary.save(dir)?;
            asha::run(&cfg.asha_config(seed), &space, trainable.as_ref())
                .map_err(CliError::from)
                .and_then(|h| write_whole(dir, &h, &space, &mut summary))
        }
    };
    match outcome {
        Ok(()) => {
            summary.complete = true;
            summary.error = None;
            summary.save(dir)?;
            Ok(summary)
        }
        Err(e) => {
            summary.complete = false;
            summary.error = Some(e.to_string());
            summary.save(dir)?;
            Err(e)
        }
    }
}

fn write_whole(dir: &Path, h: &RunHistory, space: &HyperparameterSpace, summary: &mut SeedSummary) -> Result<()> {
    HistoryWriter::create(&dir.join(HISTORY_FILE))?.write(&h.records, space)?;
    summary.update(h);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_population(
    cfg: &ExperimentConfig,
    seed: u64,
    dir: &Path,
    resume: bool,
    space: &HyperparameterSpace,
    trainable: &dyn Trainable,
    pool: &dyn TrainPool,
    summary: &mut SeedSummary,
) -> Result<()> {
    let engine_cfg = cfg.engine_config(seed);
    let ckpt = dir.join(CHECKPOINT_FILE);
    let history_path = dir.join(HISTORY_FILE);
    let mut engine = if resume && ckpt.exists() {
        let state = checkpoint::load(&ckpt, trainable.kind())?;
        if state.cfg != engine_cfg {
            return Err(CliError::Config(format!(
                "{} was written with a different engine config",
                ckpt.display()
            )));
        }
        Engine::from_state(state, space, trainable)?
    } else if cfg.optimizer == Optimizer::Pbt {
        pbt_engine(engine_cfg, space, trainable)?
    } else {
        Engine::new(engine_cfg, space, trainable)?
    };
    // the history file may run ahead of the checkpoint after a crash
    let mut history = HistoryWriter::create(&history_path)?;
    history.write(&engine.history().records, space)?;
    let mut written = engine.history().records.len();
    summary.update(engine.history());
    summary.save(dir)?;

    while !engine.is_done() {
        engine.step(pool)?;
        let h = engine.history();
        history.write(&h.records[written..], space)?;
        written = h.records.len();
        let outer = engine.state().outer_step;
        if engine.is_done() || outer % cfg.checkpoint_every == 0 {
            checkpoint::save(&ckpt, engine.state(), trainable.kind())?;
            summary.update(engine.history());
            summary.save(dir)?;
        }
    }
    summary.update(engine.history());
    Ok(())
}
