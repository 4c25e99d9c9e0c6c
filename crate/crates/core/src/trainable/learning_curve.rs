#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{missing_hp, Trainable, TrainableKind, WeightState};
use crate::hpspace::{HpVector, HyperparameterSpace};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningCurveParams {
    /// Length of one full training run in inner steps.
    pub horizon: u64,
    /// Ceiling lost by the greediest learning rate.
    pub kappa: f64,
    /// Per-step saturation rate of the greediest learning rate.
    pub fast_rate: f64,
    /// Fraction of `horizon` at which the most patient setting overtakes
    /// the greediest one (both trained from scratch with fixed HPs).
    pub crossover: f64,
    /// Std of per-step process noise on the skill.
    pub noise: f64,
    /// How far the optimal `regularization` (normalized) moves over `horizon`.
    pub drift: f64,
    /// Ceiling penalty per squared normalized distance from the optimal
    /// `regularization`.
    pub drift_penalty: f64,
}

impl Default for LearningCurveParams {
    fn default() -> Self {
        LearningCurveParams {
            horizon: 1000,
            kappa: 0.5,
            fast_rate: 0.05,
            crossover: 0.4,
            noise: 0.002,
            drift: 0.0,
            drift_penalty: 0.4,
        }
    }
}

/// A scalar "skill" that saturates towards an HP-dependent ceiling.
///
/// The normalized `learning_rate` coordinate `u ∈ [0, 1]` sets the per-step
/// rate `r(u) = r_slow^{1−u} · r_fast^u` and lowers the ceiling by `κu`, so
/// greedy settings win early and lose late. An optional `regularization`
/// dimension has an optimum that moves with training time.
#[derive(Debug, Clone)]
pub struct LearningCurve {
    params: LearningCurveParams,
    space: HyperparameterSpace,
    lr_index: usize,
    reg_index: Option<usize>,
    slow_rate: f64,
}

impl LearningCurve {
    pub fn new(params: LearningCurveParams, space: &HyperparameterSpace) -> Result<Self> {
        let p = &params;
        if p.horizon == 0
            || !(0.0..1.0).contains(&p.kappa)
            || !(p.fast_rate >= 0.0 && p.fast_rate < 1.0)
            || !(p.crossover > 0.0 && p.crossover <= 1.0)
            || p.noise < 0.0
            || p.drift_penalty < 0.0
        {
            return Err(Error::Config(alloc::format!(
                "invalid learning_curve parameters {params:?}"
            )));
        }
        let lr_index = space
            .index_of("learning_rate")
            .ok_or_else(|| missing_hp("learning_rate", "learning_curve"))?;
        let reg_index = space.index_of("regularization");
        // (1 − κ)(1 − (1 − r_fast)^T) = 1 − (1 − r_slow)^T at T = crossover · horizon
        let t = p.crossover * p.horizon as f64;
        let greedy_at_t = (1.0 - p.kappa) * (1.0 - (1.0 - p.fast_rate).powf(t));
        let slow_rate = 1.0 - (1.0 - greedy_at_t).powf(1.0 / t);
        Ok(LearningCurve {
            params,
            space: space.clone(),
            lr_index,
            reg_index,
            slow_rate,
        })
    }

    pub fn slow_rate(&self) -> f64 {
        self.slow_rate
    }

    fn unit(&self, hps: &HpVector, index: usize) -> f64 {
        let d = &self.space.dims()[index];
        ((d.encode(hps.0[index]) - d.low) / (d.high - d.low)).max(0.0).min(1.0)
    }

    /// Per-step saturation rate for a normalized learning rate.
    pub fn rate(&self, u: f64) -> f64 {
        self.slow_rate.powf(1.0 - u) * self.params.fast_rate.powf(u)
    }

    /// Optimal normalized `regularization` at training time `step`.
    pub fn regularization_optimum(&self, step: u64) -> f64 {
        let frac = (step as f64 / self.params.horizon as f64).min(1.0);
        (0.2 + self.params.drift * frac).min(1.0)
    }

    pub fn ceiling(&self, hps: &HpVector, step: u64) -> f64 {
        let u = self.unit(hps, self.lr_index);
        let mut c = 1.0 - self.params.kappa * u;
        if let Some(ri) = self.reg_index {
            let d = self.unit(hps, ri) - self.regularization_optimum(step);
            c -= self.params.drift_penalty * d * d;
        }
        c
    }
}

impl Trainable for LearningCurve {
    fn kind(&self) -> TrainableKind {
        TrainableKind::LearningCurve
    }

    fn dim(&self) -> usize {
        1
    }

    fn fresh_init(&self, _rng: &mut dyn RngCore) -> WeightState {
        WeightState::new(alloc::vec![0.0])
    }

    fn train(
        &self,
        weights: &WeightState,
        hps: &HpVector,
        inner_steps: u64,
        global_step: u64,
        rng: &mut dyn RngCore,
    ) -> WeightState {
        let r = self.rate(self.unit(hps, self.lr_index));
        let mut skill = weights.values[0];
        for k in 0..inner_steps {
            let c = self.ceiling(hps, global_step + k);
            skill += r * (c - skill);
            if self.params.noise > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                skill += self.params.noise * z;
            }
        }
        WeightState::new(alloc::vec![skill])
    }

    fn evaluate(&self, weights: &WeightState) -> f64 {
        weights.values[0]
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

    fn quiet() -> LearningCurve {
        LearningCurve::new(
            LearningCurveParams {
                noise: 0.0,
                ..Default::default()
            },
            &space(),
        )
        .unwrap()
    }

    fn run(lc: &LearningCurve, lr: f64, steps: u64) -> f64 {
        let w = lc.train(&WeightState::new(vec![0.0]), &HpVector(vec![lr]), steps, 0, &mut stream(0, Purpose::Train, 0, 0));
        lc.evaluate(&w)
    }

    #[test]
    fn zero_rate_keeps_skill() {
        let lc = LearningCurve::new(
            LearningCurveParams {
                fast_rate: 0.0,
                noise: 0.0,
                ..Default::default()
            },
            &space(),
        )
        .unwrap();
        assert_eq!(lc.rate(0.7), 0.0);
        let w = WeightState::new(vec![0.3]);
        let out = lc.train(&w, &HpVector(vec![1e-2]), 50, 0, &mut stream(0, Purpose::Train, 0, 0));
        assert_eq!(out, w);
    }

    #[test]
    fn noiseless_curve_follows_geometric_recurrence() {
        let lc = quiet();
        for &lr in &[1e-4, 1e-2, 1.0] {
            let hp = HpVector(vec![lr]);
            let u = (lr.log10() + 4.0) / 4.0;
            let r = lc.rate(u);
            let c = lc.ceiling(&hp, 0);
            for steps in [1u64, 7, 120] {
                let expected = c - c * (1.0 - r).powi(steps as i32);
                assert!((run(&lc, lr, steps) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn greedy_leads_early_patient_leads_late() {
        let lc = quiet();
        assert!(run(&lc, 1.0, 100) > run(&lc, 1e-4, 100));
        assert!(run(&lc, 1e-4, 1000) > run(&lc, 1.0, 1000));
        // crossover pinned at 40% of the horizon
        assert!((run(&lc, 1.0, 400) - run(&lc, 1e-4, 400)).abs() < 1e-9);
    }

    #[test]
    fn regularization_optimum_drifts() {
        let space = HyperparameterSpace::new(vec![
            Dimension::real("learning_rate", -4.0, 0.0).log(10.0),
            Dimension::real("regularization", 0.0, 1.0),
        ])
        .unwrap();
        let lc = LearningCurve::new(
            LearningCurveParams {
                drift: 0.6,
                ..Default::default()
            },
            &space,
        )
        .unwrap();
        let early = HpVector(vec![1e-2, 0.2]);
        let late = HpVector(vec![1e-2, 0.8]);
        assert!(lc.ceiling(&early, 0) > lc.ceiling(&late, 0));
        assert!(lc.ceiling(&late, 1000) > lc.ceiling(&early, 1000));
    }
}
