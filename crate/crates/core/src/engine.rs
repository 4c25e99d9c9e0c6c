//! The IPBT outer loop.
//!
//! Each outer step trains every member for `step_size` inner steps, records
//! the scores, and then either exploits and explores (truncation selection
//! plus time-varying BO on the current iteration's score deltas) or, when
//! the stagnation detector fires, hands the population to [`restart`]
//! and grows the step size.
//!
//! [`restart`]: crate::restart

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::baselines::{perturb_hps, PerturbConfig};
use crate::gp::{self, FitOptions, GpInput, KernelBounds};
use crate::history::{lineage_best_scores, BestModel, OuterStepSummary, RunHistory, StepRecord};
use crate::hpspace::{HpVector, HyperparameterSpace};
use crate::restart::{self, grow_step, RestartConfig, RestartContext, RestartEntry, RestartRecord, StepGrowth};
use crate::rng::{derive_seed, stream, Purpose, StreamRng};
use crate::stagnation::{check_restart, Decision, RestartReason, StagnationConfig, TrajectoryState};
use crate::trainable::{Trainable, WeightState, SENTINEL_SCORE};
use crate::{Error, Result};

/// Settings of the surrogate used for exploration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoConfig {
    pub beta: f64,
    pub n_candidates: usize,
    /// Only the most recent `max_points` observations enter a fit.
    pub max_points: usize,
    pub fit: FitOptions,
    pub bounds: KernelBounds,
}

impl Default for BoConfig {
    fn default() -> Self {
        BoConfig {
            beta: 4.0,
            n_candidates: 1000,
            max_points: 48,
            fit: FitOptions::default(),
            bounds: KernelBounds::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExploreMode {
    #[default]
    Bo,
    RandomPerturbation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub population_size: usize,
    /// Inner steps along the training-time axis.
    pub budget: u64,
    pub initial_step_fraction: f64,
    pub selection_fraction: f64,
    pub n_multiplier: usize,
    pub step_growth: StepGrowth,
    pub stagnation: StagnationConfig,
    pub restart: RestartConfig,
    pub restarts_enabled: bool,
    pub explore: ExploreMode,
    pub perturb: PerturbConfig,
    pub bo: BoConfig,
    /// Restart after this many inner steps in an iteration regardless of
    /// the detector.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forced_restart_interval: Option<u64>,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            population_size: 8,
            budget: 10_000,
            initial_step_fraction: 0.01,
            selection_fraction: 0.25,
            n_multiplier: 2,
            step_growth: StepGrowth::Exponential,
            stagnation: StagnationConfig::default(),
            restart: RestartConfig::default(),
            restarts_enabled: true,
            explore: ExploreMode::Bo,
            perturb: PerturbConfig::default(),
            bo: BoConfig::default(),
            forced_restart_interval: None,
            seed: 0,
        }
    }
}

impl EngineConfig {
    /// Inner steps per outer step in the first iteration.
    pub fn initial_step(&self) -> u64 {
        let s = self.initial_step_fraction * self.budget as f64;
        // 0.01 · 300 lands a hair below 3
        let s = num_traits::Float::floor(s + 1e-9);
        (s as u64).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::Config("engine.population_size must be at least 2".into()));
        }
        if !(self.selection_fraction > 0.0 && self.selection_fraction <= 0.5) {
            return Err(Error::Config(alloc::format!(
                "engine.selection_fraction must lie in (0, 0.5], got {}",
                self.selection_fraction
            )));
        }
        if !(self.initial_step_fraction > 0.0 && self.initial_step_fraction < 1.0) {
            return Err(Error::Config(alloc::format!(
                "engine.initial_step_fraction must lie in (0, 1), got {}",
                self.initial_step_fraction
            )));
        }
        if self.n_multiplier < 1 {
            return Err(Error::Config("engine.n_multiplier must be at least 1".into()));
        }
        if self.budget < self.initial_step() {
            return Err(Error::Config(alloc::format!(
                "engine.budget {} is smaller than the initial step",
                self.budget
            )));
        }
        if self.bo.n_candidates < self.population_size || self.bo.max_points < 2 {
            return Err(Error::Config(
                "engine.bo.n_candidates must cover the population and max_points must be >= 2".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.perturb.resample_probability) || self.perturb.factors.is_empty() {
            return Err(Error::Config("engine.perturb needs factors and a probability in [0, 1]".into()));
        }
        if self.forced_restart_interval == Some(0) {
            return Err(Error::Config("engine.forced_restart_interval must be positive".into()));
        }
        self.stagnation.validate()?;
        self.restart.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub id: u64,
    pub hps: HpVector,
    /// Stored separately in checkpoints.
    #[serde(skip)]
    pub weights: WeightState,
    pub lineage_root: u64,
    /// Inner steps these weights have been trained for.
    pub age: u64,
    pub last_score: Option<f64>,
    pub scores_by_step: BTreeMap<u64, f64>,
    /// Member whose weights this slot copied since its last record.
    pub parent: Option<u64>,
}

impl Member {
    pub fn new(id: u64, hps: HpVector, weights: WeightState) -> Self {
        Member {
            id,
            hps,
            weights,
            lineage_root: id,
            age: 0,
            last_score: None,
            scores_by_step: BTreeMap::new(),
            parent: None,
        }
    }
}

/// Indices of `members` from best to worst; unscored members rank last and
/// ties go to the lower id.
pub fn rank_order(members: &[Member]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..members.len()).collect();
    let key = |i: usize| members[i].last_score.unwrap_or(f64::NEG_INFINITY);
    idx.sort_by(|&a, &b| {
        key(b)
            .partial_cmp(&key(a))
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(members[a].id.cmp(&members[b].id))
    });
    idx
}

/// Truncation selection: each of the worst `⌈λn⌉` ids is paired with a
/// uniformly drawn id from the best `⌈λn⌉`. Losers come worst first. The
/// count is capped at `n / 2` so the two groups never overlap.
pub fn exploit_select(scores: &[(u64, f64)], lambda: f64, rng: &mut dyn RngCore) -> Vec<(u64, u64)> {
    let n = scores.len();
    if n < 2 {
        return Vec::new();
    }
    let k = restart::selection_count(lambda, n).min(n / 2);
    let mut order: Vec<(u64, f64)> = scores.to_vec();
    order.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    let top: Vec<u64> = order[..k].iter().map(|s| s.0).collect();
    order[n - k..]
        .iter()
        .rev()
        .map(|&(loser, _)| (loser, *top.choose(rng).unwrap()))
        .collect()
}

/// One member's training request for an outer step.
#[derive(Debug, Clone, Copy)]
pub struct TrainJob<'a> {
    pub weights: &'a WeightState,
    pub hps: &'a HpVector,
    pub inner_steps: u64,
    pub global_step: u64,
    pub seed: u64,
}

/// Trains and evaluates one job on its own rng stream. Non-finite scores
/// become the sentinel.
pub fn run_job(trainable: &dyn Trainable, job: &TrainJob<'_>) -> (WeightState, f64) {
    let mut rng = StreamRng::seed_from_u64(job.seed);
    let w = trainable.train(job.weights, job.hps, job.inner_steps, job.global_step, &mut rng);
    let s = trainable.evaluate(&w);
    (w, if s.is_finite() { s } else { SENTINEL_SCORE })
}

/// Executes the training jobs of one outer step; results keep job order.
pub trait TrainPool: Sync {
    fn train_all(&self, trainable: &dyn Trainable, jobs: &[TrainJob<'_>]) -> Vec<(WeightState, f64)>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SequentialPool;

impl TrainPool for SequentialPool {
    fn train_all(&self, trainable: &dyn Trainable, jobs: &[TrainJob<'_>]) -> Vec<(WeightState, f64)> {
        jobs.iter().map(|j| run_job(trainable, j)).collect()
    }
}

/// Everything needed to continue a run, minus weights (which are skipped by
/// serde and travel separately in checkpoints).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineState {
    pub cfg: EngineConfig,
    pub outer_step: u64,
    pub inner_steps: u64,
    pub iteration: u32,
    pub iter_step: u32,
    /// Inner steps spent in the current iteration.
    pub iteration_inner_steps: u64,
    pub step_size: u64,
    pub members: Vec<Member>,
    pub next_id: u64,
    /// Index into `history.records` where the current iteration begins.
    pub iteration_start: usize,
    pub trajectory: TrajectoryState,
    pub restart_records: Vec<RestartRecord>,
    /// Ids and HPs of the current iteration's initial members.
    pub iteration_roots: Vec<(u64, HpVector)>,
    pub best_so_far: f64,
    pub history: RunHistory,
    pub done: bool,
}

pub struct Engine<'a> {
    space: &'a HyperparameterSpace,
    trainable: &'a dyn Trainable,
    state: EngineState,
}

impl<'a> Engine<'a> {
    pub fn new(cfg: EngineConfig, space: &'a HyperparameterSpace, trainable: &'a dyn Trainable) -> Result<Self> {
        Self::with_name(cfg, space, trainable, "ipbt")
    }

    /// Like [`Engine::new`] with a custom optimizer label in the history.
    pub fn with_name(
        cfg: EngineConfig,
        space: &'a HyperparameterSpace,
        trainable: &'a dyn Trainable,
        name: &str,
    ) -> Result<Self> {
        cfg.validate()?;
        let size = cfg.population_size * cfg.n_multiplier;
        let members: Vec<Member> = (0..size)
            .map(|slot| {
                let mut rng = stream(cfg.seed, Purpose::Init, slot as u64, 0);
                let w = trainable.fresh_init(&mut rng);
                Member::new(slot as u64, space.sample_uniform(&mut rng), w)
            })
            .collect();
        let state = EngineState {
            outer_step: 0,
            inner_steps: 0,
            iteration: 0,
            iter_step: 0,
            iteration_inner_steps: 0,
            step_size: cfg.initial_step(),
            next_id: size as u64,
            iteration_start: 0,
            trajectory: TrajectoryState::default(),
            restart_records: Vec::new(),
            iteration_roots: members.iter().map(|m| (m.id, m.hps.clone())).collect(),
            members,
            best_so_far: f64::NEG_INFINITY,
            history: RunHistory::new(name),
            done: false,
            cfg,
        };
        Ok(Engine {
            space,
            trainable,
            state,
        })
    }

    /// Continues from a saved state whose member and best-model weights have
    /// been restored.
    pub fn from_state(state: EngineState, space: &'a HyperparameterSpace, trainable: &'a dyn Trainable) -> Result<Self> {
        state.cfg.validate()?;
        let dim = trainable.dim();
        let bad = state.members.iter().any(|m| m.weights.dim() != dim)
            || state.history.best.as_ref().is_some_and(|b| b.weights.dim() != dim);
        if bad {
            return Err(Error::Decode("state weights do not match the trainable".into()));
        }
        for m in &state.members {
            space.validate(&m.hps)?;
        }
        Ok(Engine {
            space,
            trainable,
            state,
        })
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }

    pub fn into_state(self) -> EngineState {
        self.state
    }

    pub fn history(&self) -> &RunHistory {
        &self.state.history
    }

    pub fn into_history(self) -> RunHistory {
        self.state.history
    }

    pub fn is_done(&self) -> bool {
        self.state.done
    }

    /// Runs every remaining outer step.
    pub fn run(&mut self, pool: &dyn TrainPool) -> Result<()> {
        while self.step(pool)? {}
        Ok(())
    }

    /// Runs one outer step; returns `false` once the budget is spent.
    pub fn step(&mut self, pool: &dyn TrainPool) -> Result<bool> {
        if self.state.done {
            return Ok(false);
        }
        let trainable = self.trainable;
        let st = &mut self.state;
        let cfg = st.cfg.clone();
        let this_step = st.step_size.min(cfg.budget - st.inner_steps);
        st.outer_step += 1;
        st.iter_step += 1;
        let outer = st.outer_step;

        for m in st.members.iter_mut().filter(|m| m.last_score.is_none()) {
            let s = trainable.evaluate(&m.weights);
            m.last_score = Some(if s.is_finite() { s } else { SENTINEL_SCORE });
        }
        let results = {
            let jobs: Vec<TrainJob<'_>> = st
                .members
                .iter()
                .enumerate()
                .map(|(slot, m)| TrainJob {
                    weights: &m.weights,
                    hps: &m.hps,
                    inner_steps: this_step,
                    global_step: m.age,
                    seed: derive_seed(cfg.seed, Purpose::Train, outer, slot as u64),
                })
                .collect();
            pool.train_all(trainable, &jobs)
        };
        if results.len() != st.members.len() {
            return Err(Error::Numerical("training pool returned the wrong number of results".into()));
        }
        st.inner_steps += this_step;
        st.iteration_inner_steps += this_step;
        let mut step_best = f64::NEG_INFINITY;
        for (m, (w, score)) in st.members.iter_mut().zip(results) {
            let previous = m.last_score.unwrap_or(score);
            m.weights = w;
            m.age += this_step;
            m.last_score = Some(score);
            m.scores_by_step.insert(outer, score);
            step_best = step_best.max(score);
            st.history.records.push(StepRecord {
                outer_step: outer,
                iteration: st.iteration,
                iter_step: st.iter_step,
                inner_steps: st.inner_steps,
                step_size: this_step,
                member_id: m.id,
                lineage_root: m.lineage_root,
                parent: m.parent.take(),
                hps: m.hps.clone(),
                score,
                score_delta: score - previous,
                restart: false,
            });
        }
        st.best_so_far = st.best_so_far.max(step_best);
        if st.iter_step == 1 && st.members.len() > cfg.population_size {
            let order = rank_order(&st.members);
            let keep: Vec<usize> = order[..cfg.population_size].to_vec();
            let mut slots: Vec<Option<Member>> = core::mem::take(&mut st.members).into_iter().map(Some).collect();
            st.members = keep.iter().map(|&i| slots[i].take().unwrap()).collect();
            st.members.sort_by_key(|m| m.id);
        }
        st.trajectory.push(step_best);
        st.history.inner_steps = st.inner_steps;

        let mut summary = OuterStepSummary {
            outer_step: outer,
            iteration: st.iteration,
            step_size: this_step,
            inner_steps: st.inner_steps,
            best_score: step_best,
            best_so_far: st.best_so_far,
            restart: None,
        };

        if st.inner_steps >= cfg.budget {
            update_best(&mut st.history, &st.members, outer);
            st.history.steps.push(summary);
            st.done = true;
            return Ok(false);
        }

        let decision = if !cfg.restarts_enabled {
            Decision::Continue
        } else if cfg.forced_restart_interval.is_some_and(|n| st.iteration_inner_steps >= n) {
            Decision::Restart(RestartReason::Forced)
        } else {
            check_restart(&mut st.trajectory, &cfg.stagnation)
        };
        match decision {
            Decision::Restart(reason) => {
                summary.restart = Some(reason);
                st.history.steps.push(summary);
                self.restart()?;
            }
            Decision::Continue => {
                st.history.steps.push(summary);
                self.exploit_explore()?;
            }
        }
        Ok(true)
    }

    fn restart(&mut self) -> Result<()> {
        let space = self.space;
        let trainable = self.trainable;
        let st = &mut self.state;
        let cfg = &st.cfg;
        let outer = st.outer_step;
        for r in st.history.records.iter_mut().rev().take_while(|r| r.outer_step == outer) {
            r.restart = true;
        }
        update_best(&mut st.history, &st.members, outer);

        let achieved = lineage_best_scores(&st.history, st.iteration);
        st.restart_records.push(RestartRecord {
            iteration_index: st.iteration,
            entries: st
                .iteration_roots
                .iter()
                .filter_map(|(id, hps)| {
                    achieved.get(id).map(|&a| RestartEntry {
                        hps: hps.clone(),
                        achieved: a,
                    })
                })
                .collect(),
        });
        let ctx = RestartContext {
            space,
            trainable,
            selection_fraction: cfg.selection_fraction,
            bo: &cfg.bo,
        };
        let mut rng = stream(cfg.seed, Purpose::Restart, outer, 0);
        let target = cfg.population_size * cfg.n_multiplier;
        let (members, _) = restart::perform_restart(
            &st.members,
            &st.restart_records,
            &cfg.restart,
            &ctx,
            target,
            &mut st.next_id,
            &mut rng,
        )?;
        st.members = members;
        st.step_size = grow_step(st.step_size, cfg.step_growth, cfg.initial_step());
        st.iteration += 1;
        st.iter_step = 0;
        st.iteration_inner_steps = 0;
        st.iteration_start = st.history.records.len();
        st.trajectory.reset(cfg.stagnation.scope);
        st.iteration_roots = st.members.iter().map(|m| (m.id, m.hps.clone())).collect();
        Ok(())
    }

    fn exploit_explore(&mut self) -> Result<()> {
        let space = self.space;
        let st = &mut self.state;
        let cfg = &st.cfg;
        let scores: Vec<(u64, f64)> = st
            .members
            .iter()
            .map(|m| (m.id, m.last_score.unwrap_or(SENTINEL_SCORE)))
            .collect();
        let mut rng = stream(cfg.seed, Purpose::Exploit, st.outer_step, 0);
        let pairs = exploit_select(&scores, cfg.selection_fraction, &mut rng);
        if pairs.is_empty() {
            return Ok(());
        }
        let slot_of = |members: &[Member], id: u64| members.iter().position(|m| m.id == id).unwrap();
        let mut losers = Vec::with_capacity(pairs.len());
        for &(loser, winner) in &pairs {
            let (l, w) = (slot_of(&st.members, loser), slot_of(&st.members, winner));
            let src = st.members[w].clone();
            let dst = &mut st.members[l];
            dst.weights = src.weights;
            dst.hps = src.hps;
            dst.lineage_root = src.lineage_root;
            dst.age = src.age;
            dst.last_score = src.last_score;
            dst.scores_by_step = src.scores_by_step;
            losers.push((l, winner));
        }

        let mut rng = stream(cfg.seed, Purpose::Explore, st.outer_step, 0);
        let new_hps: Vec<HpVector> = match cfg.explore {
            ExploreMode::RandomPerturbation => losers
                .iter()
                .map(|&(l, _)| perturb_hps(space, &st.members[l].hps, &cfg.perturb, &mut rng))
                .collect(),
            ExploreMode::Bo => {
                let d_it = &st.history.records[st.iteration_start..];
                let skip = d_it.len().saturating_sub(cfg.bo.max_points);
                let points = d_it[skip..]
                    .iter()
                    .map(|r| Ok((GpInput::new(space.normalize(&r.hps)?, r.iter_step as f64), r.score_delta)))
                    .collect::<Result<Vec<_>>>()?;
                if points.len() < 2 {
                    restart::uniform_hps(space, losers.len(), &mut rng)
                } else {
                    let model = gp::fit(&points, &cfg.bo.bounds, cfg.bo.fit, &mut rng)?;
                    gp::suggest_ucb(
                        &model,
                        space,
                        st.iter_step as f64 + 1.0,
                        losers.len(),
                        cfg.bo.n_candidates.max(losers.len()),
                        cfg.bo.beta,
                        &mut rng,
                    )
                }
            }
        };
        for (&(l, winner), hp) in losers.iter().zip(new_hps) {
            st.members[l].hps = hp;
            st.members[l].parent = Some(winner);
        }
        Ok(())
    }
}

/// Keeps the best member seen at a selection point; earlier wins ties.
fn update_best(history: &mut RunHistory, members: &[Member], outer_step: u64) {
    for m in members {
        let Some(score) = m.last_score else { continue };
        if history.best.as_ref().is_none_or(|b| score > b.score) {
            history.best = Some(BestModel {
                score,
                outer_step,
                member_id: m.id,
                hps: m.hps.clone(),
                weights: m.weights.clone(),
            });
        }
    }
}

/// Runs IPBT to completion on the calling thread.
pub fn run(cfg: EngineConfig, space: &HyperparameterSpace, trainable: &dyn Trainable) -> Result<RunHistory> {
    let mut engine = Engine::new(cfg, space, trainable)?;
    engine.run(&SequentialPool)?;
    Ok(engine.into_history())
}

#[cfg(test)]
mod tests {
    extern crate std;

    use super::*;
    use crate::hpspace::Dimension;
    use crate::trainable::{LearningCurve, LearningCurveParams};
    use alloc::vec;

    fn setup(horizon: u64) -> (HyperparameterSpace, LearningCurve) {
        let sp = HyperparameterSpace::new(vec![
            Dimension::real("learning_rate", -4.0, 0.0).log(10.0),
            Dimension::real("regularization", 0.0, 1.0),
        ])
        .unwrap();
        let lc = LearningCurve::new(
            LearningCurveParams {
                horizon,
                drift: 0.5,
                ..Default::default()
            },
            &sp,
        )
        .unwrap();
        (sp, lc)
    }

    fn cfg(budget: u64) -> EngineConfig {
        EngineConfig {
            budget,
            bo: BoConfig {
                n_candidates: 200,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn exploit_select_examples() {
        let mut rng = stream(0, Purpose::Exploit, 0, 0);
        let scores: Vec<(u64, f64)> = (0..8).map(|i| (10 + i, (i + 1) as f64)).collect();
        for _ in 0..20 {
            let pairs = exploit_select(&scores, 0.25, &mut rng);
            assert_eq!(pairs.iter().map(|p| p.0).collect::<Vec<_>>(), vec![10, 11]);
            assert!(pairs.iter().all(|p| p.1 == 17 || p.1 == 16));
        }
        let flat: Vec<(u64, f64)> = (0..8).map(|i| (i, 0.5)).collect();
        let pairs = exploit_select(&flat, 0.25, &mut rng);
        assert_eq!(pairs.iter().map(|p| p.0).collect::<Vec<_>>(), vec![7, 6]);
        assert!(pairs.iter().all(|p| p.1 <= 1));
        let ten: Vec<(u64, f64)> = (0..10).map(|i| (i, i as f64)).collect();
        assert_eq!(exploit_select(&ten, 0.25, &mut rng).len(), 3);
    }

    #[test]
    fn initial_step_is_one_percent() {
        assert_eq!(cfg(100).initial_step(), 1);
        assert_eq!(cfg(300).initial_step(), 3);
        assert_eq!(cfg(10_000).initial_step(), 100);
        assert!(EngineConfig { selection_fraction: 0.6, ..cfg(100) }.validate().is_err());
        assert!(EngineConfig { n_multiplier: 0, ..cfg(100) }.validate().is_err());
    }

    #[test]
    fn over_provisioned_first_step_then_population_n() {
        let (sp, lc) = setup(100);
        let h = run(cfg(200), &sp, &lc).unwrap();
        let mut per_step: BTreeMap<u64, (u32, usize)> = BTreeMap::new();
        for r in &h.records {
            per_step.entry(r.outer_step).or_insert((r.iter_step, 0)).1 += 1;
        }
        for (iter_step, count) in per_step.values() {
            assert_eq!(*count, if *iter_step == 1 { 16 } else { 8 });
        }
    }

    #[test]
    fn budget_is_exact_and_steps_grow() {
        let (sp, lc) = setup(100);
        for budget in [200, 337] {
            let h = run(cfg(budget), &sp, &lc).unwrap();
            assert_eq!(h.inner_steps, budget);
            let total: u64 = h.steps.iter().map(|s| s.step_size).sum();
            assert_eq!(total, budget);
            let sched = h.step_size_schedule();
            let s0 = cfg(budget).initial_step();
            for (i, s) in sched.iter().enumerate().take(sched.len() - 1) {
                assert_eq!(*s, s0 << i);
            }
            assert_eq!(sched.len(), h.restart_count() + 1);
        }
    }

    #[test]
    fn exploited_weights_are_bitwise_copies() {
        let (sp, lc) = setup(100);
        let mut e = Engine::new(EngineConfig { restarts_enabled: false, ..cfg(100) }, &sp, &lc).unwrap();
        for _ in 0..5 {
            e.step(&SequentialPool).unwrap();
            let members = &e.state().members;
            let copies: Vec<&Member> = members.iter().filter(|m| m.parent.is_some()).collect();
            assert_eq!(copies.len(), 2);
            for c in copies {
                let w = members.iter().find(|m| Some(m.id) == c.parent).unwrap();
                assert_eq!(c.weights, w.weights);
                assert_eq!(c.lineage_root, w.lineage_root);
            }
        }
    }

    #[test]
    fn restart_clears_iteration_data() {
        let (sp, lc) = setup(100);
        let mut e = Engine::new(cfg(400), &sp, &lc).unwrap();
        let mut seen = 0;
        while e.step(&SequentialPool).unwrap() {
            let st = e.state();
            if st.history.steps.last().unwrap().restart.is_some() {
                seen += 1;
                assert_eq!(st.iteration_start, st.history.records.len());
                assert_eq!(st.members.len(), 16);
                assert_eq!(st.restart_records.len(), seen);
                assert!(st.members.iter().all(|m| m.lineage_root == m.id));
            }
        }
        assert!(seen >= 1);
    }

    #[test]
    fn forced_restarts_follow_the_interval() {
        let (sp, lc) = setup(100);
        let c = EngineConfig {
            forced_restart_interval: Some(20),
            step_growth: StepGrowth::Constant,
            stagnation: StagnationConfig {
                t_patience: 1000,
                t_interval: 1000,
                ..Default::default()
            },
            ..cfg(100)
        };
        let h = run(c, &sp, &lc).unwrap();
        let at: Vec<u64> = h.steps.iter().filter(|s| s.restart.is_some()).map(|s| s.inner_steps).collect();
        assert_eq!(at, vec![20, 40, 60, 80]);
        assert!(h.steps.iter().all(|s| s.restart.is_none() || s.restart == Some(RestartReason::Forced)));
    }

    #[test]
    fn runs_are_deterministic() {
        let (sp, lc) = setup(100);
        let a = run(cfg(250), &sp, &lc).unwrap();
        let b = run(cfg(250), &sp, &lc).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.best.as_ref().unwrap().weights, b.best.as_ref().unwrap().weights);
        let c = run(EngineConfig { seed: 1, ..cfg(250) }, &sp, &lc).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn best_model_comes_from_selection_points() {
        let (sp, lc) = setup(100);
        let h = run(cfg(400), &sp, &lc).unwrap();
        let best = h.best.as_ref().unwrap();
        let restart_steps: Vec<u64> = h.steps.iter().filter(|s| s.restart.is_some()).map(|s| s.outer_step).collect();
        let last = h.steps.last().unwrap().outer_step;
        let eligible = |r: &&StepRecord| restart_steps.contains(&r.outer_step) || r.outer_step == last;
        let max = h.records.iter().filter(eligible).map(|r| r.score).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(best.score, max);
        assert_eq!(lc.evaluate(&best.weights), best.score);
    }

    #[test]
    fn resuming_from_state_matches_uninterrupted_run() {
        let (sp, lc) = setup(100);
        let full = run(cfg(300), &sp, &lc).unwrap();
        let mut e = Engine::new(cfg(300), &sp, &lc).unwrap();
        for _ in 0..7 {
            e.step(&SequentialPool).unwrap();
        }
        let state = e.into_state();
        let mut resumed = Engine::from_state(state, &sp, &lc).unwrap();
        resumed.run(&SequentialPool).unwrap();
        assert_eq!(resumed.into_history(), full);
    }
}
