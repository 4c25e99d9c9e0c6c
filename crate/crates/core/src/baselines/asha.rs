//! Asynchronous successive halving, simulated in virtual time.
//!
//! Workers take jobs from a scheduler; a job lasts as many time units as
//! the inner steps it trains. Completions are processed in order of finish
//! time (ties by worker index), so the whole schedule is a deterministic
//! function of the seed for any worker count.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::engine::{run_job, TrainJob};
use crate::history::{BestModel, OuterStepSummary, RunHistory, StepRecord};
use crate::hpspace::{HpVector, HyperparameterSpace};
use crate::rng::{derive_seed, stream, Purpose};
use crate::trainable::{Trainable, WeightState};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AshaConfig {
    pub eta: u64,
    pub min_resource: u64,
    pub max_resource: u64,
    /// Cap on started configurations; unlimited when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_configs: Option<usize>,
    pub workers: usize,
    /// Total inner steps over all jobs.
    pub budget: u64,
    pub seed: u64,
}

impl Default for AshaConfig {
    fn default() -> Self {
        AshaConfig {
            eta: 2,
            min_resource: 125,
            max_resource: 1000,
            n_configs: None,
            workers: 1,
            budget: 80_000,
            seed: 0,
        }
    }
}

impl AshaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eta < 2 || self.min_resource == 0 || self.min_resource >= self.max_resource || self.workers == 0 {
            return Err(Error::Config(
                "asha needs eta >= 2, 0 < min_resource < max_resource and at least one worker".into(),
            ));
        }
        Ok(())
    }

    /// Cumulative resource of each rung.
    pub fn rungs(&self) -> Vec<u64> {
        let mut out = Vec::new();
        let mut r = self.min_resource;
        while r <= self.max_resource {
            out.push(r);
            match r.checked_mul(self.eta) {
                Some(next) => r = next,
                None => break,
            }
        }
        out
    }
}

struct Trial {
    hps: HpVector,
    weights: WeightState,
    resource: u64,
    score: f64,
}

struct RungEntry {
    trial: usize,
    score: f64,
    completion: u64,
    promoted: bool,
}

#[derive(Clone, Copy)]
struct Job {
    trial: usize,
    /// Rung the job ends at.
    rung: usize,
    cost: u64,
}

struct Scheduler<'a> {
    cfg: &'a AshaConfig,
    space: &'a HyperparameterSpace,
    trainable: &'a dyn Trainable,
    rungs: Vec<u64>,
    trials: Vec<Trial>,
    results: Vec<Vec<RungEntry>>,
    committed: u64,
}

impl Scheduler<'_> {
    fn remaining(&self) -> u64 {
        self.cfg.budget - self.committed
    }

    fn next_job(&mut self) -> Option<Job> {
        let remaining = self.remaining();
        for k in (0..self.rungs.len().saturating_sub(1)).rev() {
            let cost = self.rungs[k + 1] - self.rungs[k];
            if cost > remaining {
                continue;
            }
            let rung = &mut self.results[k];
            let mut order: Vec<usize> = (0..rung.len()).collect();
            order.sort_by(|&a, &b| {
                rung[b]
                    .score
                    .partial_cmp(&rung[a].score)
                    .unwrap_or(core::cmp::Ordering::Equal)
                    .then(rung[a].completion.cmp(&rung[b].completion))
            });
            let top = rung.len() / self.cfg.eta as usize;
            if let Some(&i) = order[..top].iter().find(|&&i| !rung[i].promoted) {
                rung[i].promoted = true;
                self.committed += cost;
                return Some(Job {
                    trial: rung[i].trial,
                    rung: k + 1,
                    cost,
                });
            }
        }
        let cost = self.rungs[0];
        let capped = self.cfg.n_configs.is_some_and(|n| self.trials.len() >= n);
        if cost > remaining || capped {
            return None;
        }
        let id = self.trials.len();
        let mut rng = stream(self.cfg.seed, Purpose::Init, id as u64, 0);
        let hps = self.space.sample_uniform(&mut rng);
        let weights = self.trainable.fresh_init(&mut rng);
        let score = self.trainable.evaluate(&weights);
        self.trials.push(Trial {
            hps,
            weights,
            resource: 0,
            score,
        });
        self.committed += cost;
        Some(Job {
            trial: id,
            rung: 0,
            cost,
        })
    }
}

pub fn run(cfg: &AshaConfig, space: &HyperparameterSpace, trainable: &dyn Trainable) -> Result<RunHistory> {
    cfg.validate()?;
    let rungs = cfg.rungs();
    let mut s = Scheduler {
        cfg,
        space,
        trainable,
        results: rungs.iter().map(|_| Vec::new()).collect(),
        rungs,
        trials: Vec::new(),
        committed: 0,
    };
    let mut running: Vec<Option<(u64, Job)>> = (0..cfg.workers).map(|_| None).collect();
    for slot in running.iter_mut() {
        *slot = s.next_job().map(|j| (j.cost, j));
    }

    let mut history = RunHistory::new("asha");
    let mut consumed = 0;
    let mut completion = 0;
    let mut best_so_far = f64::NEG_INFINITY;
    while let Some(worker) = (0..running.len())
        .filter(|&w| running[w].is_some())
        .min_by_key(|&w| (running[w].unwrap().0, w))
    {
        let (now, job) = running[worker].take().unwrap();
        let t = &mut s.trials[job.trial];
        let (w, score) = run_job(
            trainable,
            &TrainJob {
                weights: &t.weights,
                hps: &t.hps,
                inner_steps: job.cost,
                global_step: t.resource,
                seed: derive_seed(cfg.seed, Purpose::Train, job.trial as u64, job.rung as u64),
            },
        );
        let previous = t.score;
        t.weights = w;
        t.resource += job.cost;
        t.score = score;
        consumed += job.cost;
        completion += 1;
        best_so_far = best_so_far.max(score);
        s.results[job.rung].push(RungEntry {
            trial: job.trial,
            score,
            completion,
            promoted: false,
        });
        history.records.push(StepRecord {
            outer_step: completion,
            iteration: 0,
            iter_step: job.rung as u32 + 1,
            inner_steps: consumed,
            step_size: job.cost,
            member_id: job.trial as u64,
            lineage_root: job.trial as u64,
            parent: None,
            hps: t.hps.clone(),
            score,
            score_delta: score - previous,
            restart: false,
        });
        history.steps.push(OuterStepSummary {
            outer_step: completion,
            iteration: 0,
            step_size: job.cost,
            inner_steps: consumed,
            best_score: score,
            best_so_far,
            restart: None,
        });
        if history.best.as_ref().is_none_or(|b| score > b.score) {
            history.best = Some(BestModel {
                score,
                outer_step: completion,
                member_id: job.trial as u64,
                hps: t.hps.clone(),
                weights: t.weights.clone(),
            });
        }
        for w in 0..running.len() {
            if running[w].is_none() {
                running[w] = s.next_job().map(|j| (now + j.cost, j));
            }
        }
    }
    history.inner_steps = consumed;
    Ok(history)
}

#[cfg(test)]
mod tests {
    extern crate std;

    use super::*;
    use crate::hpspace::Dimension;
    use crate::trainable::{QuadraticBowl, QuadraticBowlParams};
    use alloc::vec;

    fn setup() -> (HyperparameterSpace, QuadraticBowl) {
        let sp = HyperparameterSpace::new(vec![Dimension::real("learning_rate", -4.0, -1.0).log(10.0)]).unwrap();
        let b = QuadraticBowl::new(
            QuadraticBowlParams {
                drift: 0.0,
                ..Default::default()
            },
            &sp,
        )
        .unwrap();
        (sp, b)
    }

    #[test]
    fn rung_schedule() {
        let cfg = AshaConfig {
            min_resource: 10,
            max_resource: 40,
            ..Default::default()
        };
        assert_eq!(cfg.rungs(), vec![10, 20, 40]);
        assert!(AshaConfig { eta: 1, ..cfg.clone() }.validate().is_err());
    }

    #[test]
    fn promotions_train_the_rung_difference() {
        let (sp, b) = setup();
        let cfg = AshaConfig {
            min_resource: 10,
            max_resource: 40,
            budget: 400,
            seed: 4,
            ..Default::default()
        };
        let h = run(&cfg, &sp, &b).unwrap();
        let promoted: Vec<_> = h.records.iter().filter(|r| r.iter_step == 2).collect();
        assert!(!promoted.is_empty());
        for r in promoted {
            assert_eq!(r.step_size, 10);
            let first = h.records.iter().find(|q| q.member_id == r.member_id).unwrap();
            assert_eq!((first.iter_step, first.step_size), (1, 10));
        }
        assert!(h.records.iter().filter(|r| r.iter_step == 3).all(|r| r.step_size == 20));
        assert!(h.inner_steps <= 400 && h.inner_steps > 400 - 10);
    }

    #[test]
    fn single_worker_schedule_is_reproducible() {
        let (sp, b) = setup();
        let cfg = AshaConfig {
            min_resource: 5,
            max_resource: 40,
            budget: 600,
            seed: 9,
            ..Default::default()
        };
        assert_eq!(run(&cfg, &sp, &b).unwrap(), run(&cfg, &sp, &b).unwrap());
        let multi = AshaConfig { workers: 3, ..cfg };
        let h = run(&multi, &sp, &b).unwrap();
        assert!(h.inner_steps <= 600);
    }

    #[test]
    fn top_rung_survivor_is_in_the_top_decile() {
        let (sp, b) = setup();
        let cfg = AshaConfig {
            min_resource: 10,
            max_resource: 80,
            n_configs: Some(1000),
            budget: 25_000,
            seed: 1,
            ..Default::default()
        };
        let h = run(&cfg, &sp, &b).unwrap();
        let survivor = h
            .records
            .iter()
            .filter(|r| r.iter_step == 4)
            .max_by(|a, c| a.score.partial_cmp(&c.score).unwrap())
            .expect("some config reaches the top rung");
        // full-length oracle for every started configuration
        let mut finals: Vec<(u64, f64)> = (0..1000u64)
            .map(|id| {
                let mut rng = stream(cfg.seed, Purpose::Init, id, 0);
                let hps = sp.sample_uniform(&mut rng);
                let w = b.fresh_init(&mut rng);
                let w = b.train(&w, &hps, 80, 0, &mut rng);
                (id, b.evaluate(&w))
            })
            .collect();
        finals.sort_by(|a, c| c.1.partial_cmp(&a.1).unwrap());
        let rank = finals.iter().position(|f| f.0 == survivor.member_id).unwrap();
        assert!(rank < 100, "rank {rank}");
    }
}
