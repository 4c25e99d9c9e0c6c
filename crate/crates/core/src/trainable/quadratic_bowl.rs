use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{clamp_diverged, is_diverged, missing_hp, Trainable, TrainableKind, WeightState, SENTINEL_SCORE};
use crate::hpspace::{HpVector, HyperparameterSpace};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadraticBowlParams {
    pub dim: usize,
    /// Smallest and largest curvature at step 0.
    pub min_curvature: f64,
    pub max_curvature: f64,
    /// Growth of the largest curvature by the end of `horizon`: the top
    /// eigenvalue is multiplied by `1 + drift`.
    pub drift: f64,
    pub horizon: u64,
    /// Std of additive gradient noise.
    pub gradient_noise: f64,
}

impl Default for QuadraticBowlParams {
    fn default() -> Self {
        QuadraticBowlParams {
            dim: 4,
            min_curvature: 0.1,
            max_curvature: 10.0,
            drift: 4.0,
            horizon: 1000,
            gradient_noise: 0.0,
        }
    }
}

/// Gradient descent on `½ wᵀA(t)w` with diagonal `A(t)` whose conditioning
/// grows with training time, so the largest stable learning rate shrinks.
/// The score is `−½ wᵀA(0)w`.
#[derive(Debug, Clone)]
pub struct QuadraticBowl {
    params: QuadraticBowlParams,
    lr_index: usize,
}

impl QuadraticBowl {
    pub fn new(params: QuadraticBowlParams, space: &HyperparameterSpace) -> Result<Self> {
        if params.dim == 0
            || !(params.min_curvature > 0.0 && params.max_curvature >= params.min_curvature)
            || params.drift < 0.0
            || params.horizon == 0
            || params.gradient_noise < 0.0
        {
            return Err(Error::Config(alloc::format!(
                "invalid quadratic_bowl parameters {params:?}"
            )));
        }
        let lr_index = space
            .index_of("learning_rate")
            .ok_or_else(|| missing_hp("learning_rate", "quadratic_bowl"))?;
        Ok(QuadraticBowl { params, lr_index })
    }

    /// Diagonal of `A` at training time `step`.
    pub fn curvatures(&self, step: u64) -> Vec<f64> {
        let p = &self.params;
        let frac = (step as f64 / p.horizon as f64).min(1.0);
        let growth = 1.0 + p.drift * frac;
        (0..p.dim)
            .map(|j| {
                let pos = if p.dim == 1 {
                    1.0
                } else {
                    j as f64 / (p.dim - 1) as f64
                };
                let base = p.min_curvature * (p.max_curvature / p.min_curvature).powf(pos);
                base * growth.powf(pos)
            })
            .collect()
    }

    pub fn loss(&self, w: &[f64], step: u64) -> f64 {
        0.5 * self
            .curvatures(step)
            .iter()
            .zip(w)
            .map(|(l, x)| l * x * x)
            .sum::<f64>()
    }
}

impl Trainable for QuadraticBowl {
    fn kind(&self) -> TrainableKind {
        TrainableKind::QuadraticBowl
    }

    fn dim(&self) -> usize {
        self.params.dim
    }

    fn fresh_init(&self, rng: &mut dyn RngCore) -> WeightState {
        WeightState::new((0..self.params.dim).map(|_| rng.sample(StandardNormal)).collect())
    }

    fn train(
        &self,
        weights: &WeightState,
        hps: &HpVector,
        inner_steps: u64,
        global_step: u64,
        rng: &mut dyn RngCore,
    ) -> WeightState {
        let lr = hps.0[self.lr_index];
        let mut w = weights.values.clone();
        if is_diverged(&w) {
            return WeightState::new(w);
        }
        for k in 0..inner_steps {
            let lambda = self.curvatures(global_step + k);
            for (x, l) in w.iter_mut().zip(&lambda) {
                let mut g = l * *x;
                if self.params.gradient_noise > 0.0 {
                    let z: f64 = rng.sample(StandardNormal);
                    g += self.params.gradient_noise * z;
                }
                *x -= lr * g;
            }
            if clamp_diverged(&mut w) {
                break;
            }
        }
        WeightState::new(w)
    }

    fn evaluate(&self, weights: &WeightState) -> f64 {
        if is_diverged(&weights.values) {
            return SENTINEL_SCORE;
        }
        -self.loss(&weights.values, 0)
    }
}

#[cfg(test)]
mod tests {
    extern crate std;

    use super::*;
    use crate::hpspace::Dimension;
    use crate::rng::{stream, Purpose};
    use alloc::vec;

    fn space() -> HyperparameterSpace {
        HyperparameterSpace::new(vec![Dimension::real("learning_rate", -4.0, 0.0).log(10.0)]).unwrap()
    }

    fn still(dim: usize, lo: f64, hi: f64) -> QuadraticBowl {
        QuadraticBowl::new(
            QuadraticBowlParams {
                dim,
                min_curvature: lo,
                max_curvature: hi,
                drift: 0.0,
                ..Default::default()
            },
            &space(),
        )
        .unwrap()
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let b = QuadraticBowl::new(QuadraticBowlParams::default(), &space()).unwrap();
        let mut rng = stream(0, Purpose::Train, 0, 0);
        let w = b.fresh_init(&mut rng);
        let w2 = b.train(&w, &HpVector(vec![0.0]), 50, 0, &mut rng);
        assert_eq!(w, w2);
        assert_eq!(b.evaluate(&w), b.evaluate(&w2));
    }

    #[test]
    fn newton_step_converges_in_one_step() {
        let b = still(1, 4.0, 4.0);
        let w = WeightState::new(vec![3.0]);
        let w2 = b.train(&w, &HpVector(vec![0.25]), 1, 0, &mut stream(0, Purpose::Train, 0, 0));
        assert_eq!(w2.values, vec![0.0]);
        assert_eq!(b.evaluate(&w2), 0.0);
    }

    #[test]
    fn contraction_matches_closed_form() {
        // per mode: w_k = (1 - lr λ)^k w_0
        let b = still(3, 0.5, 8.0);
        let w0 = WeightState::new(vec![1.0, -2.0, 0.5]);
        let lr = 0.3; // above 2/8: top mode diverges
        let w = b.train(&w0, &HpVector(vec![lr]), 10, 0, &mut stream(0, Purpose::Train, 0, 0));
        for ((x, x0), l) in w.values.iter().zip(&w0.values).zip(b.curvatures(0)) {
            let expected = (1.0 - lr * l).powi(10) * x0;
            assert!((x - expected).abs() <= 1e-9 * expected.abs().max(1.0));
        }
        assert!(b.evaluate(&w) < b.evaluate(&w0));
    }

    #[test]
    fn divergence_yields_sentinel() {
        let b = still(2, 1.0, 10.0);
        let w = b.train(&WeightState::new(vec![1.0, 1.0]), &HpVector(vec![1.0]), 500, 0, &mut stream(0, Purpose::Train, 0, 0));
        assert!(w.values.iter().all(|v| v.is_finite()));
        assert_eq!(b.evaluate(&w), SENTINEL_SCORE);
    }

    #[test]
    fn conditioning_drifts_upward() {
        let b = QuadraticBowl::new(QuadraticBowlParams::default(), &space()).unwrap();
        let c0 = b.curvatures(0);
        let c1 = b.curvatures(1000);
        assert_eq!(c0[0], c1[0]);
        assert!((c1[3] / c0[3] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn requires_learning_rate() {
        let other = HyperparameterSpace::new(vec![Dimension::real("momentum", 0.0, 1.0)]).unwrap();
        assert!(QuadraticBowl::new(QuadraticBowlParams::default(), &other).is_err());
    }
}
