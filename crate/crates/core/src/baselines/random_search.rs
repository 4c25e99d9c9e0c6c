//! Independent full-length runs of uniformly sampled configurations.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::engine::{TrainJob, TrainPool};
use crate::history::{BestModel, OuterStepSummary, RunHistory, StepRecord};
use crate::hpspace::{HpVector, HyperparameterSpace};
use crate::rng::{derive_seed, stream, Purpose};
use crate::trainable::{Trainable, WeightState};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomSearchConfig {
    /// Total inner steps over all configurations.
    pub budget: u64,
    pub n_configs: usize,
    pub seed: u64,
}

impl Default for RandomSearchConfig {
    fn default() -> Self {
        RandomSearchConfig {
            budget: 80_000,
            n_configs: 8,
            seed: 0,
        }
    }
}

/// Inner steps of each configuration: an even split, remainder to the first.
pub fn allocation(budget: u64, n_configs: usize) -> Vec<u64> {
    let n = n_configs as u64;
    (0..n).map(|i| budget / n + u64::from(i < budget % n)).collect()
}

pub fn run(cfg: &RandomSearchConfig, space: &HyperparameterSpace, trainable: &dyn Trainable, pool: &dyn TrainPool) -> Result<RunHistory> {
    if cfg.n_configs == 0 || cfg.budget < cfg.n_configs as u64 {
        return Err(Error::Config(
            "random_search needs n_configs >= 1 and at least one inner step per config".into(),
        ));
    }
    let steps = allocation(cfg.budget, cfg.n_configs);
    let configs: Vec<(HpVector, WeightState, f64)> = (0..cfg.n_configs)
        .map(|i| {
            let mut rng = stream(cfg.seed, Purpose::Baseline, i as u64, 0);
            let hps = space.sample_uniform(&mut rng);
            let w = trainable.fresh_init(&mut rng);
            let s0 = trainable.evaluate(&w);
            (hps, w, s0)
        })
        .collect();
    let jobs: Vec<TrainJob<'_>> = configs
        .iter()
        .zip(&steps)
        .enumerate()
        .map(|(i, ((hps, w, _), &n))| TrainJob {
            weights: w,
            hps,
            inner_steps: n,
            global_step: 0,
            seed: derive_seed(cfg.seed, Purpose::Train, 1, i as u64),
        })
        .collect();
    let results = pool.train_all(trainable, &jobs);

    let mut history = RunHistory::new("random_search");
    let mut consumed = 0;
    let mut best_so_far = f64::NEG_INFINITY;
    for (i, ((hps, _, s0), (w, score))) in configs.into_iter().zip(results).enumerate() {
        consumed += steps[i];
        best_so_far = best_so_far.max(score);
        let outer = i as u64 + 1;
        history.records.push(StepRecord {
            outer_step: outer,
            iteration: 0,
            iter_step: 1,
            inner_steps: consumed,
            step_size: steps[i],
            member_id: i as u64,
            lineage_root: i as u64,
            parent: None,
            hps: hps.clone(),
            score,
            score_delta: score - s0,
            restart: false,
        });
        history.steps.push(OuterStepSummary {
            outer_step: outer,
            iteration: 0,
            step_size: steps[i],
            inner_steps: consumed,
            best_score: score,
            best_so_far,
            restart: None,
        });
        if history.best.as_ref().is_none_or(|b| score > b.score) {
            history.best = Some(BestModel {
                score,
                outer_step: outer,
                member_id: i as u64,
                hps,
                weights: w,
            });
        }
    }
    history.inner_steps = consumed;
    Ok(history)
}
