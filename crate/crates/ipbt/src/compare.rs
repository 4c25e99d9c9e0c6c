//! Statistical comparison of finished runs.
//!
//! Inputs are `summary.json` files (directories are searched recursively)
//! or tab-separated tables with columns `task algorithm seed score`. Scores
//! are min-max normalized per task, aggregated by IQM with stratified
//! bootstrap intervals, and every algorithm is tested against a reference
//! with the paired bootstrap test and Holm's correction.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ipbt_core::stats::{self, Alternative, CiMethod, ScoreTable};

use crate::runner::{SeedSummary, SUMMARY_FILE};
use crate::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub task: String,
    pub algorithm: String,
    pub seed: u64,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct CompareOptions {
    /// Defaults to `ipbt` when present, else the first algorithm by name.
    pub reference: Option<String>,
    pub replicates: usize,
    pub seed: u64,
    pub confidence: f64,
    pub ci_method: CiMethod,
    pub alpha: f64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            reference: None,
            replicates: 50_000,
            seed: 0,
            confidence: 0.95,
            ci_method: CiMethod::Percentile,
            alpha: 0.05,
        }
    }
}

pub fn load_inputs(paths: &[PathBuf]) -> Result<Vec<ScoreRow>> {
    let mut rows = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found = Vec::new();
            find_summaries(p, &mut found)?;
            if found.is_empty() {
                return Err(CliError::Config(format!("no {SUMMARY_FILE} under {}", p.display())));
            }
            for f in found {
                rows.push(summary_row(&f)?);
            }
        } else if p.extension().is_some_and(|e| e == "json") {
            rows.push(summary_row(p)?);
        } else {
            rows.extend(read_table(p)?);
        }
    }
    Ok(rows)
}

fn find_summaries(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()
        .map_err(|e| CliError::io(dir, e))?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_summaries(&p, out)?;
        } else if p.file_name().is_some_and(|n| n == SUMMARY_FILE) {
            out.push(p);
        }
    }
    Ok(())
}

fn summary_row(path: &Path) -> Result<ScoreRow> {
    let s = SeedSummary::load(path)?;
    let score = match (s.complete, s.best_score) {
        (true, Some(v)) => v,
        _ => return Err(CliError::Config(format!("{}: run is incomplete", path.display()))),
    };
    Ok(ScoreRow {
        task: s.task,
        algorithm: s.algorithm,
        seed: s.seed,
        score,
    })
}

/// Reads `task algorithm seed score` rows; `#` starts a comment and a first
/// row starting with `task` is a header.
pub fn read_table(path: &Path) -> Result<Vec<ScoreRow>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = if line.contains('\t') {
            line.split('\t').map(str::trim).collect()
        } else {
            line.split_whitespace().collect()
        };
        if rows.is_empty() && f.first() == Some(&"task") {
            continue;
        }
        let at = |m: &str| CliError::Config(format!("{}:{}: {m}", path.display(), i + 1));
        if f.len() != 4 {
            return Err(at(&format!("expected 4 columns, found {}", f.len())));
        }
        rows.push(ScoreRow {
            task: f[0].into(),
            algorithm: f[1].into(),
            seed: f[2].parse().map_err(|_| at(&format!("bad seed `{}`", f[2])))?,
            score: f[3]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| at(&format!("bad score `{}`", f[3])))?,
        });
    }
    Ok(rows)
}

/// Builds a seed-aligned table; index `i` of every cell is the `i`-th
/// smallest seed of the task.
pub fn build_table(rows: &[ScoreRow]) -> Result<ScoreTable> {
    let mut cells: BTreeMap<(&str, &str), BTreeMap<u64, f64>> = BTreeMap::new();
    for r in rows {
        if cells
            .entry((&r.task, &r.algorithm))
            .or_default()
            .insert(r.seed, r.score)
            .is_some()
        {
            return Err(CliError::Config(format!(
                "duplicate score for ({}, {}, seed {})",
                r.task, r.algorithm, r.seed
            )));
        }
    }
    let algorithms: BTreeSet<&str> = rows.iter().map(|r| r.algorithm.as_str()).collect();
    let tasks: BTreeSet<&str> = rows.iter().map(|r| r.task.as_str()).collect();
    let mut missing = Vec::new();
    let mut table = ScoreTable::new();
    let mut seed_counts = BTreeSet::new();
    for &task in &tasks {
        let seeds: BTreeSet<u64> = rows.iter().filter(|r| r.task == task).map(|r| r.seed).collect();
        seed_counts.insert(seeds.len());
        for &alg in &algorithms {
            let cell = cells.get(&(task, alg));
            for (i, s) in seeds.iter().enumerate() {
                match cell.and_then(|c| c.get(s)) {
                    Some(&v) => table.insert(task, alg, i, v),
                    None => missing.push(format!("({task}, {alg}, seed {s})")),
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(CliError::Config(format!(
            "seeds are not aligned, missing cells: {}",
            missing.join(", ")
        )));
    }
    if seed_counts.len() > 1 {
        return Err(CliError::Config(format!(
            "tasks have different seed counts: {seed_counts:?}"
        )));
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    pub iqm: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub algorithm: String,
    pub p: f64,
    pub p_holm: f64,
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub tasks: Vec<String>,
    pub seeds: usize,
    pub reference: String,
    pub summaries: Vec<AlgorithmSummary>,
    pub comparisons: Vec<Comparison>,
}

pub fn compare(table: &ScoreTable, opts: &CompareOptions) -> Result<Report> {
    let seeds = table.aligned_seed_count()?;
    let algorithms = table.algorithms();
    let reference = match &opts.reference {
        Some(r) if algorithms.contains(r) => r.clone(),
        Some(r) => return Err(CliError::Config(format!("reference `{r}` is not among {algorithms:?}"))),
        None if algorithms.iter().any(|a| a == "ipbt") => "ipbt".into(),
        None => algorithms
            .first()
            .cloned()
            .ok_or_else(|| CliError::Config("no scores to compare".into()))?,
    };
    let order: Vec<&String> = std::iter::once(&reference)
        .chain(algorithms.iter().filter(|a| **a != reference))
        .collect();
    let norm = stats::normalize_per_task(table);
    let mut summaries = Vec::new();
    for a in &order {
        let ci = stats::stratified_bootstrap_iqm(&norm, a, opts.replicates, opts.confidence, opts.ci_method, opts.seed)?;
        summaries.push(AlgorithmSummary {
            algorithm: (*a).clone(),
            iqm: ci.point,
            ci_low: ci.low,
            ci_high: ci.high,
        });
    }
    let others = &order[1..];
    let p: Vec<f64> = others
        .iter()
        .map(|a| stats::paired_bootstrap_test(&norm, &reference, a, opts.replicates, Alternative::TwoSided, opts.seed))
        .collect::<ipbt_core::Result<_>>()?;
    let p_holm = stats::holm_correct(&p);
    let comparisons = others
        .iter()
        .zip(p.iter().zip(&p_holm))
        .map(|(a, (&p, &h))| Comparison {
            algorithm: (*a).clone(),
            p,
            p_holm: h,
            rejected: h < opts.alpha,
        })
        .collect();
    Ok(Report {
        tasks: table.tasks().map(String::from).collect(),
        seeds,
        reference,
        summaries,
        comparisons,
    })
}

/// Plain-text rendering; stable byte for byte for a given input.
pub fn render(r: &Report, opts: &CompareOptions) -> String {
    let w = r
        .summaries
        .iter()
        .map(|s| s.algorithm.len())
        .max()
        .unwrap_or(0)
        .max("algorithm".len());
    let method = match opts.ci_method {
        CiMethod::Percentile => "percentile",
        CiMethod::Basic => "basic",
    };
    let mut out = String::new();
    let _ = writeln!(out, "tasks: {}", r.tasks.join(", "));
    let _ = writeln!(out, "seeds per task: {}", r.seeds);
    let _ = writeln!(out, "normalization: per-task min-max over all algorithms");
    let _ = writeln!(
        out,
        "bootstrap: {} replicates, seed {}, {}% {method} intervals",
        opts.replicates,
        opts.seed,
        opts.confidence * 100.0
    );
    let _ = writeln!(out);
    let _ = writeln!(out, "{:<w$}  {:>8}  {:>8}  {:>8}", "algorithm", "iqm", "ci_low", "ci_high");
    for s in &r.summaries {
        let _ = writeln!(out, "{:<w$}  {:>8.5}  {:>8.5}  {:>8.5}", s.algorithm, s.iqm, s.ci_low, s.ci_high);
    }
    if !r.comparisons.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "paired bootstrap against `{}`, two-sided, Holm-corrected at alpha {}",
            r.reference, opts.alpha
        );
        let _ = writeln!(out, "{:<w$}  {:>8}  {:>8}  {:>8}", "algorithm", "rejected", "p", "p_holm");
        for c in &r.comparisons {
            let rejected = if c.rejected { "yes" } else { "no" };
            let _ = writeln!(out, "{:<w$}  {:>8}  {:>8.5}  {:>8.5}", c.algorithm, rejected, c.p, c.p_holm);
        }
    }
    out
}
