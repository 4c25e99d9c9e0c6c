//! The trainable contract and three desk-scale synthetic tasks.
//!
//! A trainable owns no per-member state: weights travel in a
//! [`WeightState`], and `train` maps old weights to new ones. Scores are
//! always "higher is better".

mod learning_curve;
mod quadratic_bowl;
mod tiny_mlp;
mod weights;

use alloc::boxed::Box;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::hpspace::{HpVector, HyperparameterSpace};
use crate::Result;

pub use learning_curve::{LearningCurve, LearningCurveParams};
pub use quadratic_bowl::{QuadraticBowl, QuadraticBowlParams};
pub use tiny_mlp::{DatasetVariant, TinyMlp, TinyMlpParams};
pub use weights::{TrainableKind, WeightState, WEIGHT_HEADER_LEN};

/// Score reported for diverged or crashed weights. Finite, and below any
/// score a shipped trainable can legitimately produce.
pub const SENTINEL_SCORE: f64 = -1e30;

/// Magnitude at which weights count as diverged.
pub(crate) const DIVERGENCE_LIMIT: f64 = 1e6;

pub trait Trainable: Send + Sync {
    fn kind(&self) -> TrainableKind;

    /// Length of every [`WeightState`] this trainable produces.
    fn dim(&self) -> usize;

    fn fresh_init(&self, rng: &mut dyn RngCore) -> WeightState;

    /// Runs `inner_steps` weight updates starting at training time
    /// `global_step`. Deterministic given the inputs and the rng state.
    fn train(
        &self,
        weights: &WeightState,
        hps: &HpVector,
        inner_steps: u64,
        global_step: u64,
        rng: &mut dyn RngCore,
    ) -> WeightState;

    /// Validation score; pure.
    fn evaluate(&self, weights: &WeightState) -> f64;
}

/// Tagged trainable description, as found in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainableSpec {
    QuadraticBowl(QuadraticBowlParams),
    LearningCurve(LearningCurveParams),
    TinyMlp(TinyMlpParams),
}

impl TrainableSpec {
    /// Instantiates the trainable, checking that `space` has the
    /// hyperparameters it reads.
    pub fn build(&self, space: &HyperparameterSpace) -> Result<Box<dyn Trainable>> {
        Ok(match self {
            TrainableSpec::QuadraticBowl(p) => Box::new(QuadraticBowl::new(p.clone(), space)?),
            TrainableSpec::LearningCurve(p) => Box::new(LearningCurve::new(p.clone(), space)?),
            TrainableSpec::TinyMlp(p) => Box::new(TinyMlp::new(p.clone(), space)?),
        })
    }
}

/// Clamps diverged coordinates so weights stay finite. Returns whether any
/// coordinate had diverged.
pub(crate) fn clamp_diverged(values: &mut [f64]) -> bool {
    let mut diverged = false;
    for v in values.iter_mut() {
        if v.is_nan() {
            *v = DIVERGENCE_LIMIT;
            diverged = true;
        } else if v.abs() >= DIVERGENCE_LIMIT {
            *v = DIVERGENCE_LIMIT.copysign(*v);
            diverged = true;
        }
    }
    diverged
}

pub(crate) fn is_diverged(values: &[f64]) -> bool {
    values.iter().any(|v| !(v.abs() < DIVERGENCE_LIMIT))
}

fn missing_hp(name: &str, trainable: &str) -> crate::Error {
    crate::Error::Config(alloc::format!(
        "trainable `{trainable}` needs a `{name}` dimension in the search space"
    ))
}
