//! Restarts: weight reuse, hyperparameter reinitialization and step growth.
//!
//! On a restart the best `λ%` of the population donate weights to everyone
//! else, the population grows to its over-provisioned size, and two
//! independent random halves are drawn: one half of the weight slots is
//! freshly initialized while the rest is shrink-perturbed, and one half of
//! the HP slots is sampled uniformly while the rest comes from a
//! time-varying GP fitted across iterations ("meta" BO).

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::engine::{rank_order, BoConfig, Member};
use crate::gp::{self, GpInput};
use crate::hpspace::{HpVector, HyperparameterSpace};
use crate::trainable::{Trainable, WeightState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepGrowth {
    #[default]
    Exponential,
    Linear,
    Constant,
}

/// Step size of the next iteration.
pub fn grow_step(step: u64, mode: StepGrowth, initial: u64) -> u64 {
    match mode {
        StepGrowth::Exponential => step.saturating_mul(2),
        StepGrowth::Linear => step.saturating_add(initial),
        StepGrowth::Constant => step,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RestartConfig {
    pub shrink: f64,
    pub perturb: f64,
    pub weight_reinit_fraction: f64,
    pub hp_random_fraction: f64,
    pub meta_beta: f64,
}

impl Default for RestartConfig {
    fn default() -> Self {
        RestartConfig {
            shrink: 0.2,
            perturb: 0.1,
            weight_reinit_fraction: 0.5,
            hp_random_fraction: 0.5,
            meta_beta: 4.0,
        }
    }
}

impl RestartConfig {
    pub fn validate(&self) -> Result<()> {
        let frac = |v: f64| (0.0..=1.0).contains(&v);
        if !(frac(self.weight_reinit_fraction) && frac(self.hp_random_fraction)) {
            return Err(Error::Config("restart fractions must lie in [0, 1]".into()));
        }
        if !(self.shrink >= 0.0 && self.perturb >= 0.0 && self.meta_beta >= 0.0) {
            return Err(Error::Config(
                "restart.shrink, restart.perturb and restart.meta_beta must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartEntry {
    pub hps: HpVector,
    /// Best score reached by any descendant within the iteration.
    pub achieved: f64,
}

/// Initial HPs of one iteration and how far their lineages got.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartRecord {
    pub iteration_index: u32,
    pub entries: Vec<RestartEntry>,
}

/// `shrink · w + perturb · w_fresh` with `w_fresh` a fresh initialization.
pub fn shrink_perturb(
    w: &WeightState,
    shrink: f64,
    perturb: f64,
    trainable: &dyn Trainable,
    rng: &mut dyn RngCore,
) -> WeightState {
    let fresh = trainable.fresh_init(rng);
    WeightState::new(
        w.values
            .iter()
            .zip(&fresh.values)
            .map(|(a, f)| shrink * a + perturb * f)
            .collect(),
    )
}

fn ceil_count(fraction: f64, n: usize) -> usize {
    let k = fraction * n as f64;
    // guard against 0.25 * 8 = 2.0000000000000004
    let r = k.round();
    let k = if (k - r).abs() < 1e-9 { r } else { k.ceil() };
    (k as usize).min(n)
}

/// Number of members replaced (and donating) at selection fraction `lambda`.
pub fn selection_count(lambda: f64, n: usize) -> usize {
    ceil_count(lambda, n).max(1).min(n)
}

/// Everything a restart reads besides the population.
pub struct RestartContext<'a> {
    pub space: &'a HyperparameterSpace,
    pub trainable: &'a dyn Trainable,
    pub selection_fraction: f64,
    pub bo: &'a BoConfig,
}

/// Which slots were reinitialized or took random HPs, for logging and tests.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RestartPlan {
    pub fresh_weight_slots: Vec<usize>,
    pub random_hp_slots: Vec<usize>,
}

/// Builds the next iteration's population of exactly `target_size` members.
///
/// `records` must already contain the iteration that just ended. New member
/// ids are taken from `next_id`.
pub fn perform_restart(
    population: &[Member],
    records: &[RestartRecord],
    cfg: &RestartConfig,
    ctx: &RestartContext<'_>,
    target_size: usize,
    next_id: &mut u64,
    rng: &mut dyn RngCore,
) -> Result<(Vec<Member>, RestartPlan)> {
    if population.is_empty() || target_size == 0 {
        return Err(Error::Argument("restart needs a non-empty population".into()));
    }
    let order = rank_order(population);
    let top = &order[..selection_count(ctx.selection_fraction, population.len())];

    // best members keep their weights, everyone else copies a random top member
    let mut weights: Vec<WeightState> = order
        .iter()
        .map(|&i| {
            if top.contains(&i) {
                population[i].weights.clone()
            } else {
                population[*top.choose(rng).unwrap()].weights.clone()
            }
        })
        .collect();
    weights.truncate(target_size);
    while weights.len() < target_size {
        weights.push(population[*top.choose(rng).unwrap()].weights.clone());
    }

    let mut slots: Vec<usize> = (0..target_size).collect();
    slots.shuffle(rng);
    let mut fresh_weight_slots = slots[..ceil_count(cfg.weight_reinit_fraction, target_size)].to_vec();
    fresh_weight_slots.sort_unstable();
    for (slot, w) in weights.iter_mut().enumerate() {
        *w = if fresh_weight_slots.binary_search(&slot).is_ok() {
            ctx.trainable.fresh_init(rng)
        } else {
            shrink_perturb(w, cfg.shrink, cfg.perturb, ctx.trainable, rng)
        };
    }

    slots.shuffle(rng);
    let mut random_hp_slots = slots[..ceil_count(cfg.hp_random_fraction, target_size)].to_vec();
    random_hp_slots.sort_unstable();
    let n_meta = target_size - random_hp_slots.len();
    let mut meta = if n_meta == 0 {
        Vec::new()
    } else {
        meta_suggestions(records, cfg, ctx, n_meta, rng)?
    }
    .into_iter();
    let hps: Vec<HpVector> = (0..target_size)
        .map(|slot| {
            if random_hp_slots.binary_search(&slot).is_ok() {
                ctx.space.sample_uniform(rng)
            } else {
                meta.next().expect("one suggestion per meta slot")
            }
        })
        .collect();

    let members = weights
        .into_iter()
        .zip(hps)
        .map(|(w, h)| {
            let id = *next_id;
            *next_id += 1;
            Member::new(id, h, w)
        })
        .collect();
    Ok((
        members,
        RestartPlan {
            fresh_weight_slots,
            random_hp_slots,
        },
    ))
}

/// Meta-BO over iteration-initial HPs; uniform samples when there is no
/// history yet.
pub fn meta_suggestions(
    records: &[RestartRecord],
    cfg: &RestartConfig,
    ctx: &RestartContext<'_>,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<HpVector>> {
    let mut points: Vec<(GpInput, f64)> = Vec::new();
    for rec in records {
        for e in &rec.entries {
            let u = ctx.space.normalize(&e.hps)?;
            points.push((GpInput::new(u, rec.iteration_index as f64), e.achieved));
        }
    }
    let Some(last) = records.iter().map(|r| r.iteration_index).max() else {
        return Ok((0..n).map(|_| ctx.space.sample_uniform(rng)).collect());
    };
    if points.len() > ctx.bo.max_points {
        points.drain(..points.len() - ctx.bo.max_points);
    }
    let model = gp::fit(&points, &ctx.bo.bounds, ctx.bo.fit, rng)?;
    Ok(gp::suggest_ucb(
        &model,
        ctx.space,
        last as f64 + 1.0,
        n,
        ctx.bo.n_candidates.max(n),
        cfg.meta_beta,
        rng,
    ))
}

pub(crate) fn uniform_hps(space: &HyperparameterSpace, n: usize, rng: &mut dyn RngCore) -> Vec<HpVector> {
    (0..n).map(|_| space.sample_uniform(rng)).collect()
}
