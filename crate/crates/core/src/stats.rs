//! Aggregate scoring across tasks and seeds: per-task min-max
//! normalization, interquartile mean, stratified bootstrap intervals, a
//! paired bootstrap test and Holm's step-down correction.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{stream, Purpose};
use crate::{Error, Result};

/// Final scores: task → algorithm → one score per seed index.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScoreTable {
    pub scores: BTreeMap<String, BTreeMap<String, Vec<f64>>>,
}

impl ScoreTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores `score` at `seed_index`, growing the seed list with NaN holes.
    pub fn insert(&mut self, task: &str, algorithm: &str, seed_index: usize, score: f64) {
        let v = self
            .scores
            .entry(task.into())
            .or_default()
            .entry(algorithm.into())
            .or_default();
        if v.len() <= seed_index {
            v.resize(seed_index + 1, f64::NAN);
        }
        v[seed_index] = score;
    }

    pub fn tasks(&self) -> impl Iterator<Item = &str> {
        self.scores.keys().map(|s| s.as_str())
    }

    /// Algorithms present in any task, sorted.
    pub fn algorithms(&self) -> Vec<String> {
        let mut out: Vec<String> = self.scores.values().flat_map(|m| m.keys().cloned()).collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn get(&self, task: &str, algorithm: &str) -> Option<&[f64]> {
        self.scores.get(task)?.get(algorithm).map(|v| v.as_slice())
    }

    /// Every cell `(task, algorithm, seed)` that is absent or not finite.
    pub fn missing_cells(&self) -> Vec<(String, String, usize)> {
        let algs = self.algorithms();
        let n = self.seed_count_max();
        let mut out = Vec::new();
        for (task, row) in &self.scores {
            for a in &algs {
                let v = row.get(a).map(|v| v.as_slice()).unwrap_or(&[]);
                for s in 0..n {
                    if !v.get(s).is_some_and(|x| x.is_finite()) {
                        out.push((task.clone(), a.clone(), s));
                    }
                }
            }
        }
        out
    }

    fn seed_count_max(&self) -> usize {
        self.scores.values().flat_map(|m| m.values()).map(|v| v.len()).max().unwrap_or(0)
    }

    /// Common seed count of a fully aligned table.
    pub fn aligned_seed_count(&self) -> Result<usize> {
        if self.scores.is_empty() {
            return Err(Error::Argument("score table is empty".into()));
        }
        let missing = self.missing_cells();
        if let Some((t, a, s)) = missing.first() {
            return Err(Error::Argument(alloc::format!(
                "score table is not aligned: {} missing cell(s), first is task `{t}`, algorithm `{a}`, seed {s}",
                missing.len()
            )));
        }
        Ok(self.seed_count_max())
    }
}

/// Min-max normalization per task over all algorithms and seeds; a task
/// with a single distinct value maps to 0.5.
pub fn normalize_per_task(t: &ScoreTable) -> ScoreTable {
    let mut out = t.clone();
    for row in out.scores.values_mut() {
        let vals = row.values().flatten().copied().filter(|x| x.is_finite());
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
        for v in row.values_mut().flat_map(|v| v.iter_mut()) {
            if v.is_finite() {
                *v = if hi > lo { (*v - lo) / (hi - lo) } else { 0.5 };
            }
        }
    }
    out
}

/// Mean after dropping `floor(n/4)` values from each end.
pub fn iqm(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "iqm of an empty list");
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let k = v.len() / 4;
    let kept = &v[k..v.len() - k];
    kept.iter().sum::<f64>() / kept.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    #[default]
    Percentile,
    /// Reflects the percentile bounds around the point estimate.
    Basic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub point: f64,
    pub low: f64,
    pub high: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = num_traits::Float::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn resample_indices<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

fn algorithm_rows<'t>(t: &'t ScoreTable, algorithm: &str) -> Result<Vec<&'t [f64]>> {
    t.scores
        .values()
        .map(|row| row.get(algorithm).map(|v| v.as_slice()))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::Argument(alloc::format!("algorithm `{algorithm}` must appear in every task")))
}

/// Replicate IQMs of a stratified bootstrap: each replicate resamples seeds
/// independently per task, pools the tasks and takes the IQM. Replicate `r`
/// draws from its own stream keyed by `r`.
pub fn stratified_bootstrap_replicates(t: &ScoreTable, algorithm: &str, replicates: usize, seed: u64) -> Result<Vec<f64>> {
    let n = t.aligned_seed_count()?;
    let rows = algorithm_rows(t, algorithm)?;
    Ok((0..replicates)
        .map(|r| {
            let mut rng = stream(seed, Purpose::Bootstrap, r as u64, 0);
            let mut sample = Vec::with_capacity(rows.len() * n);
            for row in &rows {
                for i in resample_indices(n, &mut rng) {
                    sample.push(row[i]);
                }
            }
            iqm(&sample)
        })
        .collect())
}

/// IQM of one algorithm with a stratified bootstrap interval.
pub fn stratified_bootstrap_iqm(
    t: &ScoreTable,
    algorithm: &str,
    replicates: usize,
    confidence: f64,
    method: CiMethod,
    seed: u64,
) -> Result<Interval> {
    if replicates == 0 || !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Argument("need replicates >= 1 and confidence in (0, 1)".into()));
    }
    let mut reps = stratified_bootstrap_replicates(t, algorithm, replicates, seed)?;
    let pooled: Vec<f64> = algorithm_rows(t, algorithm)?.iter().flat_map(|r| r.iter().copied()).collect();
    let point = iqm(&pooled);
    reps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let alpha = (1.0 - confidence) / 2.0;
    let (ql, qh) = (quantile_sorted(&reps, alpha), quantile_sorted(&reps, 1.0 - alpha));
    let (low, high) = match method {
        CiMethod::Percentile => (ql, qh),
        CiMethod::Basic => (2.0 * point - qh, 2.0 * point - ql),
    };
    Ok(Interval { point, low, high })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// `a` scores lower than `b`.
    Less,
    /// `a` scores higher than `b`.
    Greater,
}

/// IQM difference `a − b` over a table, with seed indices `idx` applied to
/// every task and both algorithms.
pub fn paired_iqm_difference(rows: &[(&[f64], &[f64])], idx: &[usize]) -> f64 {
    let mut a = Vec::with_capacity(rows.len() * idx.len());
    let mut b = Vec::with_capacity(rows.len() * idx.len());
    for (ra, rb) in rows {
        for &i in idx {
            a.push(ra[i]);
            b.push(rb[i]);
        }
    }
    iqm(&a) - iqm(&b)
}

fn paired_rows<'t>(t: &'t ScoreTable, a: &str, b: &str) -> Result<(Vec<(&'t [f64], &'t [f64])>, usize)> {
    let n = t.aligned_seed_count()?;
    let rows = t
        .scores
        .values()
        .map(|row| Some((row.get(a)?.as_slice(), row.get(b)?.as_slice())))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::Argument(alloc::format!("algorithms `{a}` and `{b}` must appear in every task")))?;
    Ok((rows, n))
}

/// Paired bootstrap test on the IQM difference `a − b`.
///
/// Each replicate draws one tuple of seed indices with replacement and uses
/// it for both algorithms on every task. Replicate differences are centred
/// on the observed difference and the p-value is the add-one corrected
/// proportion of centred replicates at least as extreme as the observation.
pub fn paired_bootstrap_test(
    t: &ScoreTable,
    a: &str,
    b: &str,
    replicates: usize,
    alternative: Alternative,
    seed: u64,
) -> Result<f64> {
    let (rows, n) = paired_rows(t, a, b)?;
    if replicates == 0 {
        return Err(Error::Argument("need at least one replicate".into()));
    }
    let identity: Vec<usize> = (0..n).collect();
    let observed = paired_iqm_difference(&rows, &identity);
    let mut count = 0usize;
    for r in 0..replicates {
        let mut rng = stream(seed, Purpose::Bootstrap, r as u64, 1);
        let idx = resample_indices(n, &mut rng);
        let centred = paired_iqm_difference(&rows, &idx) - observed;
        if exceeds(centred, observed, alternative) {
            count += 1;
        }
    }
    Ok((count + 1) as f64 / (replicates + 1) as f64)
}

/// Whether a centred replicate is at least as extreme as the observation.
/// A relative tolerance absorbs rounding in the IQM sums.
pub fn exceeds(centred: f64, observed: f64, alternative: Alternative) -> bool {
    let tol = 1e-12 * (1.0 + observed.abs());
    match alternative {
        Alternative::TwoSided => centred.abs() >= observed.abs() - tol,
        Alternative::Less => centred <= observed + tol,
        Alternative::Greater => centred >= observed - tol,
    }
}

/// Holm step-down adjustment, returned in input order.
pub fn holm_correct(p_values: &[f64]) -> Vec<f64> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].partial_cmp(&p_values[b]).unwrap_or(core::cmp::Ordering::Equal));
    let mut out = alloc::vec![0.0; m];
    let mut running: f64 = 0.0;
    for (j, &i) in order.iter().enumerate() {
        running = running.max(((m - j) as f64 * p_values[i]).min(1.0));
        out[i] = running;
    }
    out
}
