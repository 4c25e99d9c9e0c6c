//! Reference optimizers: PBT with random perturbation, random search and
//! ASHA. All of them log a [`RunHistory`](crate::history::RunHistory).

pub mod asha;
pub mod random_search;

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::engine::{Engine, EngineConfig, ExploreMode, TrainPool};
use crate::history::RunHistory;
use crate::hpspace::{DimensionKind, HpVector, HyperparameterSpace};
use crate::restart::StepGrowth;
use crate::trainable::Trainable;
use crate::Result;

pub use asha::AshaConfig;
pub use random_search::RandomSearchConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbConfig {
    /// Chance that a dimension is resampled instead of perturbed.
    pub resample_probability: f64,
    pub factors: Vec<f64>,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        PerturbConfig {
            resample_probability: 0.25,
            factors: vec![0.8, 1.2],
        }
    }
}

/// PBT explore step, one dimension at a time.
///
/// Linear real dims are multiplied by a drawn factor, log dims get the
/// factor's logarithm added to the exponent, integer dims move one lattice
/// step. Results are clamped to the range.
pub fn perturb_hps(space: &HyperparameterSpace, hps: &HpVector, cfg: &PerturbConfig, rng: &mut dyn RngCore) -> HpVector {
    HpVector(
        space
            .dims()
            .iter()
            .zip(hps.values())
            .map(|(d, &x)| {
                if rng.random::<f64>() < cfg.resample_probability {
                    return d.sample(rng);
                }
                let e = d.encode(x);
                let moved = match (d.kind, d.log_base) {
                    (DimensionKind::Integer, _) => {
                        if rng.random::<bool>() {
                            e + 1.0
                        } else {
                            e - 1.0
                        }
                    }
                    (DimensionKind::Real, None) => e * cfg.factors.choose(rng).unwrap(),
                    (DimensionKind::Real, Some(b)) => {
                        e + num_traits::Float::ln(*cfg.factors.choose(rng).unwrap()) / num_traits::Float::ln(b)
                    }
                };
                d.decode(d.snap(moved))
            })
            .collect(),
    )
}

/// Vanilla PBT: the engine loop with a constant step size, no restarts, no
/// over-provisioning and random-perturbation exploration.
pub fn pbt_config(mut cfg: EngineConfig) -> EngineConfig {
    cfg.restarts_enabled = false;
    cfg.step_growth = StepGrowth::Constant;
    cfg.n_multiplier = 1;
    cfg.explore = ExploreMode::RandomPerturbation;
    cfg
}

pub fn pbt_engine<'a>(cfg: EngineConfig, space: &'a HyperparameterSpace, trainable: &'a dyn Trainable) -> Result<Engine<'a>> {
    Engine::with_name(pbt_config(cfg), space, trainable, "pbt")
}

pub fn run_pbt(cfg: EngineConfig, space: &HyperparameterSpace, trainable: &dyn Trainable, pool: &dyn TrainPool) -> Result<RunHistory> {
    let mut engine = pbt_engine(cfg, space, trainable)?;
    engine.run(pool)?;
    Ok(engine.into_history())
}
