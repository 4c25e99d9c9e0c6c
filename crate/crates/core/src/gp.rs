//! Gaussian-process regression with a time-decaying Matérn-5/2 kernel.
//!
//! The covariance between `(x, t)` and `(x', t')` is
//! `σ² · matern52(x, x') · (1 − ε)^{|t − t'| / 2}`, so observations lose
//! correlation with the present as they age. Targets are standardized before
//! fitting; hyperparameters are chosen by multi-start coordinate-wise
//! golden-section search on the log marginal likelihood.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::hpspace::{HpVector, HyperparameterSpace};
use crate::linalg::{Cholesky, SquareMatrix};
use crate::rng::{stream, Purpose};
use crate::{Error, Result};

const SQRT5: f64 = 2.236_067_977_499_79;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// A GP input: a point of the unit cube and a time index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpInput {
    pub x: Vec<f64>,
    pub t: f64,
}

impl GpInput {
    pub fn new(x: Vec<f64>, t: f64) -> Self {
        GpInput { x, t }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub signal_variance: f64,
    pub lengthscales: Vec<f64>,
    pub noise_variance: f64,
    /// Temporal forgetting rate in `[0, 1)`.
    pub epsilon: f64,
}

impl KernelParams {
    pub fn default_for(dim: usize) -> Self {
        KernelParams {
            signal_variance: 1.0,
            lengthscales: vec![0.5; dim],
            noise_variance: 1e-2,
            epsilon: 0.1,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.signal_variance > 0.0
            && self.noise_variance > 0.0
            && self.lengthscales.iter().all(|&l| l > 0.0)
            && (0.0..1.0).contains(&self.epsilon);
        if ok {
            Ok(())
        } else {
            Err(Error::Argument(alloc::format!("invalid kernel parameters {self:?}")))
        }
    }
}

/// Closed interval for one kernel parameter. `low == high` pins it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub low: f64,
    pub high: f64,
}

impl ParamRange {
    pub const fn new(low: f64, high: f64) -> Self {
        ParamRange { low, high }
    }

    pub const fn fixed(v: f64) -> Self {
        ParamRange { low: v, high: v }
    }

    fn is_fixed(&self) -> bool {
        self.low == self.high
    }
}

/// Search ranges for marginal-likelihood fitting (standardized target units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelBounds {
    pub signal_variance: ParamRange,
    pub lengthscale: ParamRange,
    pub noise_variance: ParamRange,
    pub epsilon: ParamRange,
}

impl Default for KernelBounds {
    fn default() -> Self {
        KernelBounds {
            signal_variance: ParamRange::new(0.05, 20.0),
            lengthscale: ParamRange::new(0.01, 10.0),
            noise_variance: ParamRange::new(1e-6, 1.0),
            epsilon: ParamRange::new(1e-3, 0.5),
        }
    }
}

/// Optimizer budget for [`fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub restarts: usize,
    /// Likelihood evaluations per restart.
    pub iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            restarts: 8,
            iterations: 50,
        }
    }
}

pub fn matern52(a: &[f64], b: &[f64], lengthscales: &[f64]) -> f64 {
    let r2: f64 = a
        .iter()
        .zip(b)
        .zip(lengthscales)
        .map(|((x, y), l)| {
            let d = (x - y) / l;
            d * d
        })
        .sum();
    matern52_r2(r2)
}

#[inline]
fn matern52_r2(r2: f64) -> f64 {
    let r = r2.sqrt();
    (1.0 + SQRT5 * r + 5.0 / 3.0 * r2) * (-SQRT5 * r).exp()
}

#[inline]
fn temporal_decay(dt: f64, epsilon: f64) -> f64 {
    if epsilon == 0.0 || dt == 0.0 {
        1.0
    } else {
        ((1.0 - epsilon).ln() * dt / 2.0).exp()
    }
}

/// Covariance between two inputs.
pub fn kernel(a: &GpInput, b: &GpInput, p: &KernelParams) -> f64 {
    p.signal_variance
        * matern52(&a.x, &b.x, &p.lengthscales)
        * temporal_decay((a.t - b.t).abs(), p.epsilon)
}

/// Noise-free Gram matrix `K(X, X)`.
pub fn gram(inputs: &[GpInput], p: &KernelParams) -> SquareMatrix {
    SquareMatrix::from_fn(inputs.len(), |i, j| kernel(&inputs[i], &inputs[j], p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Standardizer {
    mean: f64,
    scale: f64,
}

impl Standardizer {
    fn from_targets(y: &[f64]) -> (Self, bool) {
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let scale = var.sqrt();
        if scale <= 1e-12 * (1.0 + mean.abs()) {
            (Standardizer { mean, scale: 1.0 }, true)
        } else {
            (Standardizer { mean, scale }, false)
        }
    }

    fn forward(&self, y: f64) -> f64 {
        (y - self.mean) / self.scale
    }

    fn inverse(&self, z: f64) -> f64 {
        z * self.scale + self.mean
    }
}

/// A conditioned Gaussian process.
#[derive(Debug, Clone)]
pub struct GpModel {
    params: KernelParams,
    inputs: Vec<GpInput>,
    /// Standardized targets.
    targets: Vec<f64>,
    standardizer: Standardizer,
    /// All targets equal: predictions are the constant.
    degenerate: bool,
    chol: Option<Cholesky>,
    alpha: Vec<f64>,
    lml: f64,
    best_start_lml: f64,
}

impl GpModel {
    /// The prior: mean 0, variance `signal_variance` everywhere.
    pub fn prior(params: KernelParams) -> Self {
        GpModel {
            params,
            inputs: Vec::new(),
            targets: Vec::new(),
            standardizer: Standardizer {
                mean: 0.0,
                scale: 1.0,
            },
            degenerate: false,
            chol: None,
            alpha: Vec::new(),
            lml: 0.0,
            best_start_lml: 0.0,
        }
    }

    /// Conditions on `points` with fixed kernel parameters.
    pub fn condition(points: &[(GpInput, f64)], params: KernelParams) -> Result<Self> {
        check_points(points)?;
        params.validate()?;
        let y: Vec<f64> = points.iter().map(|p| p.1).collect();
        let (standardizer, degenerate) = Standardizer::from_targets(&y);
        let inputs: Vec<GpInput> = points.iter().map(|p| p.0.clone()).collect();
        let targets: Vec<f64> = y.iter().map(|&v| standardizer.forward(v)).collect();
        let mut model = GpModel {
            params,
            inputs,
            targets,
            standardizer,
            degenerate,
            chol: None,
            alpha: Vec::new(),
            lml: 0.0,
            best_start_lml: 0.0,
        };
        if !degenerate {
            let (chol, alpha, lml) = factorize(&model.inputs, &model.targets, &model.params)?;
            model.chol = Some(chol);
            model.alpha = alpha;
            model.lml = lml;
            model.best_start_lml = lml;
        }
        Ok(model)
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Log marginal likelihood of the standardized targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        self.lml
    }

    /// Best likelihood among the optimizer's random starting points.
    pub fn best_start_log_marginal_likelihood(&self) -> f64 {
        self.best_start_lml
    }

    /// Maps a target value into the model's standardized units.
    pub fn standardize(&self, y: f64) -> f64 {
        self.standardizer.forward(y)
    }

    pub fn destandardize(&self, z: f64) -> f64 {
        self.standardizer.inverse(z)
    }

    /// Posterior mean and variance in target units.
    pub fn predict(&self, q: &GpInput) -> (f64, f64) {
        if self.degenerate {
            return (self.standardizer.mean, self.params.signal_variance);
        }
        let chol = match &self.chol {
            None => return (0.0, self.params.signal_variance),
            Some(c) => c,
        };
        let k: Vec<f64> = self
            .inputs
            .iter()
            .map(|x| kernel(x, q, &self.params))
            .collect();
        let mean: f64 = k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let v = chol.solve_lower(&k);
        let var = (self.params.signal_variance - v.iter().map(|x| x * x).sum::<f64>()).max(0.0);
        let s = self.standardizer.scale;
        (self.standardizer.inverse(mean), var * s * s)
    }
}

fn check_points(points: &[(GpInput, f64)]) -> Result<()> {
    let first = points
        .first()
        .ok_or_else(|| Error::Argument("GP needs at least one observation".into()))?;
    let d = first.0.x.len();
    for (inp, y) in points {
        if inp.x.len() != d {
            return Err(Error::Argument("GP inputs differ in dimension".into()));
        }
        if !y.is_finite() || !inp.t.is_finite() || inp.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("GP observations must be finite".into()));
        }
    }
    Ok(())
}

fn factorize(
    inputs: &[GpInput],
    y: &[f64],
    p: &KernelParams,
) -> Result<(Cholesky, Vec<f64>, f64)> {
    let mut k = gram(inputs, p);
    for i in 0..k.n() {
        k.set(i, i, k.get(i, i) + p.noise_variance);
    }
    let chol = Cholesky::with_jitter(&k, p.signal_variance)?;
    let alpha = chol.solve(y);
    let lml = -0.5 * y.iter().zip(&alpha).map(|(a, b)| a * b).sum::<f64>()
        - 0.5 * chol.log_det()
        - 0.5 * y.len() as f64 * LN_2PI;
    Ok((chol, alpha, lml))
}

/// Pairwise input geometry, reused across likelihood evaluations.
struct PairCache {
    n: usize,
    dim: usize,
    /// Per pair `(i < j)`: squared coordinate differences, then `|Δt|`.
    sq: Vec<f64>,
    dt: Vec<f64>,
}

impl PairCache {
    fn new(inputs: &[GpInput]) -> Self {
        let n = inputs.len();
        let dim = inputs[0].x.len();
        let mut sq = Vec::with_capacity(n * (n - 1) / 2 * dim);
        let mut dt = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in 0..i {
                for (a, b) in inputs[i].x.iter().zip(&inputs[j].x) {
                    sq.push((a - b) * (a - b));
                }
                dt.push((inputs[i].t - inputs[j].t).abs());
            }
        }
        PairCache { n, dim, sq, dt }
    }

    fn lml(&self, y: &[f64], p: &KernelParams) -> f64 {
        let n = self.n;
        let inv_l2: Vec<f64> = p.lengthscales.iter().map(|l| 1.0 / (l * l)).collect();
        let log_decay = if p.epsilon > 0.0 {
            (1.0 - p.epsilon).ln() / 2.0
        } else {
            0.0
        };
        let mut k = SquareMatrix::zeros(n);
        let mut pair = 0;
        for i in 0..n {
            k.set(i, i, p.signal_variance + p.noise_variance);
            for j in 0..i {
                let base = pair * self.dim;
                let r2: f64 = self.sq[base..base + self.dim]
                    .iter()
                    .zip(&inv_l2)
                    .map(|(s, w)| s * w)
                    .sum();
                let mut v = p.signal_variance * matern52_r2(r2);
                if log_decay != 0.0 && self.dt[pair] != 0.0 {
                    v *= (log_decay * self.dt[pair]).exp();
                }
                k.set(i, j, v);
                k.set(j, i, v);
                pair += 1;
            }
        }
        match Cholesky::with_jitter(&k, p.signal_variance) {
            Ok(chol) => {
                let alpha = chol.solve(y);
                -0.5 * y.iter().zip(&alpha).map(|(a, b)| a * b).sum::<f64>()
                    - 0.5 * chol.log_det()
                    - 0.5 * n as f64 * LN_2PI
            }
            Err(_) => f64::NEG_INFINITY,
        }
    }
}

/// Free parameters in log space, in the order: signal variance,
/// lengthscales, noise variance, epsilon.
struct Coordinates {
    ranges: Vec<(f64, f64)>,
    slots: Vec<usize>,
    template: KernelParams,
}

impl Coordinates {
    fn new(dim: usize, bounds: &KernelBounds) -> Self {
        let mut template = KernelParams::default_for(dim);
        let mut ranges = Vec::new();
        let mut slots = Vec::new();
        let mut all: Vec<ParamRange> = vec![bounds.signal_variance];
        all.extend(core::iter::repeat(bounds.lengthscale).take(dim));
        all.push(bounds.noise_variance);
        all.push(bounds.epsilon);
        for (slot, r) in all.iter().enumerate() {
            if r.is_fixed() {
                set_slot(&mut template, slot, r.low);
            } else {
                ranges.push((r.low.ln(), r.high.ln()));
                slots.push(slot);
            }
        }
        // Defaults clamped into range become the first start.
        for (slot, &(lo, hi)) in slots.iter().zip(&ranges) {
            let v = get_slot(&template, *slot).ln().max(lo).min(hi);
            set_slot(&mut template, *slot, v.exp());
        }
        Coordinates {
            ranges,
            slots,
            template,
        }
    }

    fn params(&self, theta: &[f64]) -> KernelParams {
        let mut p = self.template.clone();
        for (slot, v) in self.slots.iter().zip(theta) {
            set_slot(&mut p, *slot, v.exp());
        }
        p
    }

    fn initial(&self) -> Vec<f64> {
        self.slots
            .iter()
            .map(|&s| get_slot(&self.template, s).ln())
            .collect()
    }
}

fn set_slot(p: &mut KernelParams, slot: usize, v: f64) {
    let d = p.lengthscales.len();
    match slot {
        0 => p.signal_variance = v,
        s if s <= d => p.lengthscales[s - 1] = v,
        s if s == d + 1 => p.noise_variance = v,
        _ => p.epsilon = v,
    }
}

fn get_slot(p: &KernelParams, slot: usize) -> f64 {
    let d = p.lengthscales.len();
    match slot {
        0 => p.signal_variance,
        s if s <= d => p.lengthscales[s - 1],
        s if s == d + 1 => p.noise_variance,
        _ => p.epsilon,
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const GOLDEN_STEPS: usize = 5;

/// Coordinate-wise golden-section ascent from `theta`, accepting only
/// improvements. Spends at most `budget` likelihood evaluations.
fn coordinate_ascent(
    f: &impl Fn(&[f64]) -> f64,
    ranges: &[(f64, f64)],
    theta: &mut Vec<f64>,
    mut best: f64,
    budget: usize,
) -> f64 {
    let mut used = 0;
    let mut width: Vec<f64> = ranges.iter().map(|(lo, hi)| hi - lo).collect();
    'outer: while used < budget {
        for c in 0..ranges.len() {
            if used + 2 > budget {
                break 'outer;
            }
            let (lo_b, hi_b) = ranges[c];
            let mut lo = (theta[c] - width[c] / 2.0).max(lo_b);
            let mut hi = (theta[c] + width[c] / 2.0).min(hi_b);
            let eval = |v: f64, theta: &Vec<f64>| {
                let mut t = theta.clone();
                t[c] = v;
                f(&t)
            };
            let mut x1 = hi - INV_PHI * (hi - lo);
            let mut x2 = lo + INV_PHI * (hi - lo);
            let mut f1 = eval(x1, theta);
            let mut f2 = eval(x2, theta);
            used += 2;
            let mut step = 0;
            while step < GOLDEN_STEPS && used < budget {
                if f1 >= f2 {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - INV_PHI * (hi - lo);
                    f1 = eval(x1, theta);
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + INV_PHI * (hi - lo);
                    f2 = eval(x2, theta);
                }
                used += 1;
                step += 1;
            }
            let (xb, fb) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
            if fb > best {
                best = fb;
                theta[c] = xb;
            }
            width[c] *= 0.5;
        }
    }
    best
}

/// Fits kernel parameters by maximizing the log marginal likelihood.
///
/// The first start is the default parameter set clamped into `bounds`; the
/// remaining starts are uniform in log space.
pub fn fit<R: Rng + ?Sized>(
    points: &[(GpInput, f64)],
    bounds: &KernelBounds,
    options: FitOptions,
    rng: &mut R,
) -> Result<GpModel> {
    check_points(points)?;
    let dim = points[0].0.x.len();
    let coords = Coordinates::new(dim, bounds);
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (standardizer, degenerate) = Standardizer::from_targets(&y);
    if degenerate || coords.ranges.is_empty() {
        return GpModel::condition(points, coords.params(&coords.initial()));
    }
    let inputs: Vec<GpInput> = points.iter().map(|p| p.0.clone()).collect();
    let z: Vec<f64> = y.iter().map(|&v| standardizer.forward(v)).collect();
    let cache = PairCache::new(&inputs);
    let objective = |theta: &[f64]| cache.lml(&z, &coords.params(theta));

    let mut best_theta = coords.initial();
    let mut best = f64::NEG_INFINITY;
    let mut best_start = f64::NEG_INFINITY;
    for start in 0..options.restarts.max(1) {
        let mut theta = if start == 0 {
            coords.initial()
        } else {
            coords
                .ranges
                .iter()
                .map(|&(lo, hi)| rng.random_range(lo..=hi))
                .collect()
        };
        let f0 = objective(&theta);
        best_start = best_start.max(f0);
        let budget = options.iterations.saturating_sub(1);
        let fin = coordinate_ascent(&objective, &coords.ranges, &mut theta, f0, budget);
        if fin > best {
            best = fin;
            best_theta = theta;
        }
    }
    if !best.is_finite() {
        return Err(Error::Numerical(
            "no kernel parameters gave a finite likelihood".into(),
        ));
    }
    let mut model = GpModel::condition(points, coords.params(&best_theta))?;
    model.best_start_lml = best_start;
    Ok(model)
}

/// Upper-confidence-bound suggestions from `n_candidates` uniform samples.
///
/// Candidates are scored by `mean + sqrt(beta)·std` at time `now`; the best
/// distinct ones are returned, ties keeping candidate order. If fewer than
/// `n_suggestions` distinct candidates exist, the best is repeated.
pub fn suggest_ucb<R: Rng + ?Sized>(
    model: &GpModel,
    space: &HyperparameterSpace,
    now: f64,
    n_suggestions: usize,
    n_candidates: usize,
    beta: f64,
    rng: &mut R,
) -> Vec<HpVector> {
    assert!(
        n_suggestions >= 1 && n_candidates >= n_suggestions,
        "need n_candidates >= n_suggestions >= 1"
    );
    let root_beta = beta.max(0.0).sqrt();
    let mut scored: Vec<(f64, Vec<f64>, HpVector)> = (0..n_candidates)
        .map(|_| {
            let hp = space.sample_uniform(rng);
            let u = space
                .normalize(&hp)
                .expect("sampled points lie in the space");
            let (m, v) = model.predict(&GpInput::new(u.clone(), now));
            (m + root_beta * v.sqrt(), u, hp)
        })
        .collect();
    // stable: equal scores keep sampling order
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(core::cmp::Ordering::Equal));
    let mut out: Vec<(Vec<f64>, HpVector)> = Vec::with_capacity(n_suggestions);
    for (_, u, hp) in scored.iter() {
        if out.len() == n_suggestions {
            break;
        }
        if !out.iter().any(|(o, _)| o == u) {
            out.push((u.clone(), hp.clone()));
        }
    }
    let mut out: Vec<HpVector> = out.into_iter().map(|(_, hp)| hp).collect();
    while out.len() < n_suggestions {
        out.push(out[0].clone());
    }
    out
}

/// Z-scores with the population standard deviation; a constant input maps to zeros.
pub fn zscore(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    if !(std > 1e-12 * (1.0 + mean.abs())) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - mean) / std).collect()
}

/// Kernel search ranges used by [`smooth_trajectory`]. Inputs are step
/// indices rescaled to `[0, 1]`; there is no temporal term.
pub fn smoother_bounds() -> KernelBounds {
    KernelBounds {
        signal_variance: ParamRange::new(0.1, 10.0),
        lengthscale: ParamRange::new(0.1, 10.0),
        noise_variance: ParamRange::new(1e-3, 1.0),
        epsilon: ParamRange::fixed(0.0),
    }
}

/// Smooths a score trajectory: z-scores it, fits a 1-D GP over the step
/// indices and returns the posterior mean at every index, in z units.
pub fn smooth_trajectory(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.len() < 2 {
        return Err(Error::Argument(
            "trajectory smoothing needs at least two scores".into(),
        ));
    }
    let z = zscore(scores);
    if z.iter().all(|&v| v == 0.0) {
        return Ok(z);
    }
    let last = (scores.len() - 1) as f64;
    let points: Vec<(GpInput, f64)> = z
        .iter()
        .enumerate()
        .map(|(i, &v)| (GpInput::new(vec![i as f64 / last], 0.0), v))
        .collect();
    let mut rng = stream(0, Purpose::Fit, scores.len() as u64, 0);
    let model = fit(&points, &smoother_bounds(), FitOptions::default(), &mut rng)?;
    Ok(points.iter().map(|(x, _)| model.predict(x).0).collect())
}

#[cfg(test)]
mod tests {
    extern crate std;

    use super::*;
    use crate::hpspace::Dimension;
    use rand_distr::{Distribution, Normal};

    fn p1(eps: f64) -> KernelParams {
        KernelParams {
            signal_variance: 2.0,
            lengthscales: vec![0.3],
            noise_variance: 1e-3,
            epsilon: eps,
        }
    }

    #[test]
    fn kernel_at_identical_points_is_signal_variance() {
        let a = GpInput::new(vec![0.3], 5.0);
        assert_eq!(kernel(&a, &a, &p1(0.1)), 2.0);
    }

    #[test]
    fn kernel_temporal_decay() {
        let a = GpInput::new(vec![0.3], 0.0);
        let b = GpInput::new(vec![0.3], 2.0);
        assert!((kernel(&a, &b, &p1(0.19)) - 2.0 * 0.81).abs() < 1e-12);
        let c = GpInput::new(vec![0.5], 0.0);
        let d = GpInput::new(vec![0.5], 40.0);
        let spatial = kernel(&a, &c, &p1(0.0));
        assert_eq!(kernel(&a, &d, &p1(0.0)), spatial);
    }

    #[test]
    fn single_point_is_interpolated() {
        let pts = [(GpInput::new(vec![0.2, 0.7], 1.0), 3.5)];
        let m = fit(&pts, &KernelBounds::default(), FitOptions::default(), &mut stream(1, Purpose::Fit, 0, 0)).unwrap();
        let (mean, _) = m.predict(&pts[0].0);
        assert!((mean - 3.5).abs() < 1e-9);
    }

    #[test]
    fn constant_targets_predict_constant() {
        let pts: Vec<_> = (0..5)
            .map(|i| (GpInput::new(vec![i as f64 / 5.0], i as f64), 7.25))
            .collect();
        let m = fit(&pts, &KernelBounds::default(), FitOptions::default(), &mut stream(1, Purpose::Fit, 0, 0)).unwrap();
        assert!(m.is_degenerate());
        for q in [0.0, 0.33, 1.0] {
            assert_eq!(m.predict(&GpInput::new(vec![q], 3.0)).0, 7.25);
        }
    }

    #[test]
    fn prior_predicts_zero_mean_signal_variance() {
        let m = GpModel::prior(p1(0.1));
        assert_eq!(m.predict(&GpInput::new(vec![0.4], 0.0)), (0.0, 2.0));
    }

    #[test]
    fn noise_free_training_point_has_tiny_variance() {
        let mut p = p1(0.1);
        p.noise_variance = 1e-12;
        let pts: Vec<_> = (0..6)
            .map(|i| (GpInput::new(vec![i as f64 / 6.0], 0.0), (i as f64).sin()))
            .collect();
        let m = GpModel::condition(&pts, p).unwrap();
        for (x, _) in &pts {
            assert!(m.predict(x).1 <= 1e-8 * 2.0 * m.destandardize(1.0).abs().max(1.0));
        }
    }

    #[test]
    fn variance_is_nonnegative() {
        let mut rng = stream(3, Purpose::Fit, 0, 0);
        let pts: Vec<_> = (0..15)
            .map(|i| {
                let x: f64 = rng.random();
                (GpInput::new(vec![x, rng.random()], (i / 3) as f64), x * 2.0 + rng.random::<f64>())
            })
            .collect();
        let m = fit(&pts, &KernelBounds::default(), FitOptions::default(), &mut rng).unwrap();
        for _ in 0..1000 {
            let q = GpInput::new(vec![rng.random(), rng.random()], rng.random_range(0.0..6.0));
            assert!(m.predict(&q).1 >= 0.0);
        }
    }

    #[test]
    fn fit_is_monotone_over_starts() {
        let mut rng = stream(4, Purpose::Fit, 0, 0);
        let pts: Vec<_> = (0..20)
            .map(|i| {
                let x = i as f64 / 20.0;
                (GpInput::new(vec![x], 0.0), (6.0 * x).sin() + 0.1 * rng.random::<f64>())
            })
            .collect();
        let m = fit(&pts, &KernelBounds::default(), FitOptions::default(), &mut rng).unwrap();
        assert!(m.log_marginal_likelihood() >= m.best_start_log_marginal_likelihood());
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(
            fit(&[], &KernelBounds::default(), FitOptions::default(), &mut stream(0, Purpose::Fit, 0, 0)),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn standardization_round_trips() {
        let pts: Vec<_> = [3.0, -1.5, 8.25, 1e3]
            .iter()
            .enumerate()
            .map(|(i, &y)| (GpInput::new(vec![i as f64 / 4.0], 0.0), y))
            .collect();
        let m = GpModel::condition(&pts, p1(0.0)).unwrap();
        for (_, y) in &pts {
            assert!((m.destandardize(m.standardize(*y)) - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    fn one_dim_space() -> HyperparameterSpace {
        HyperparameterSpace::new(vec![Dimension::real("x", 0.0, 1.0)]).unwrap()
    }

    #[test]
    fn pure_exploitation_picks_mean_argmax() {
        // peak at x = 0.7
        let pts: Vec<_> = (0..=20)
            .map(|i| {
                let x = i as f64 / 20.0;
                (GpInput::new(vec![x], 0.0), -(x - 0.7) * (x - 0.7))
            })
            .collect();
        let m = fit(&pts, &KernelBounds::default(), FitOptions::default(), &mut stream(5, Purpose::Fit, 0, 0)).unwrap();
        let s = suggest_ucb(&m, &one_dim_space(), 0.0, 3, 1000, 0.0, &mut stream(6, Purpose::Explore, 0, 0));
        for v in &s {
            assert!((v.0[0] - 0.7).abs() < 0.02, "{v}");
        }
    }

    #[test]
    fn untrained_model_gives_candidate_order() {
        let m = GpModel::prior(KernelParams::default_for(1));
        let space = one_dim_space();
        let s = suggest_ucb(&m, &space, 0.0, 4, 50, 4.0, &mut stream(7, Purpose::Explore, 0, 0));
        let mut rng = stream(7, Purpose::Explore, 0, 0);
        let first: Vec<_> = (0..4).map(|_| space.sample_uniform(&mut rng)).collect();
        assert_eq!(s, first);
    }

    #[test]
    fn all_candidates_returned_when_requested() {
        let m = GpModel::prior(KernelParams::default_for(1));
        let s = suggest_ucb(&m, &one_dim_space(), 0.0, 10, 10, 1.0, &mut stream(8, Purpose::Explore, 0, 0));
        assert_eq!(s.len(), 10);
    }

    #[test]
    fn smoothing_linear_input_is_increasing() {
        let s: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let out = smooth_trajectory(&s).unwrap();
        for w in out.windows(2) {
            assert!(w[1] > w[0], "{out:?}");
        }
    }

    #[test]
    fn smoothing_constant_input_is_zero() {
        assert_eq!(smooth_trajectory(&[4.0; 7]).unwrap(), vec![0.0; 7]);
        assert!(smooth_trajectory(&[1.0]).is_err());
    }

    #[test]
    fn smoothing_noisy_step_is_nearly_monotone() {
        let normal = Normal::new(0.0, 0.05).unwrap();
        let mut rng = stream(11, Purpose::Fit, 0, 0);
        let s: Vec<f64> = (0..20)
            .map(|i| if i < 10 { 0.0 } else { 1.0 } + normal.sample(&mut rng))
            .collect();
        let out = smooth_trajectory(&s).unwrap();
        // tolerance is in score units; the smoother reports z units
        let mean = s.iter().sum::<f64>() / 20.0;
        let std = (s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 20.0).sqrt();
        for w in out.windows(2) {
            assert!((w[1] - w[0]) * std >= -0.05, "{out:?}");
        }
    }
}
