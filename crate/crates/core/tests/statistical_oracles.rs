//! Enumeration, Monte-Carlo, finite-difference and KS checks.

use std::collections::BTreeMap;

use ipbt_core::baselines::{perturb_hps, PerturbConfig};
use ipbt_core::engine::{BoConfig, Member};
use ipbt_core::hpspace::{Dimension, HyperparameterSpace};
use ipbt_core::restart::{perform_restart, shrink_perturb, RestartConfig, RestartContext};
use ipbt_core::rng::{stream, Purpose};
use ipbt_core::stats::{self, Alternative, ScoreTable};
use ipbt_core::trainable::{LearningCurve, LearningCurveParams, TinyMlp, TinyMlpParams, Trainable};
use rand::Rng;

fn iqm(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = s.len() / 4;
    let kept = &s[k..s.len() - k];
    kept.iter().sum::<f64>() / kept.len() as f64
}

/// All length-`n` tuples over `0..n`.
fn tuples(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..n).map(move |i| {
                    let mut u = t.clone();
                    u.push(i);
                    u
                })
            })
            .collect();
    }
    out
}

fn table(rows: &[(&str, &str, &[f64])]) -> ScoreTable {
    let mut t = ScoreTable::new();
    for (task, alg, vals) in rows {
        for (i, v) in vals.iter().enumerate() {
            t.insert(task, alg, i, *v);
        }
    }
    t
}

#[test]
fn stratified_replicates_lie_in_the_enumerated_set() {
    let t = table(&[("x", "a", &[0.1, 0.7]), ("y", "a", &[0.4, 0.9])]);
    let (x, y) = ([0.1, 0.7], [0.4, 0.9]);
    let mut freq: BTreeMap<u64, usize> = BTreeMap::new();
    for ix in tuples(2) {
        for iy in tuples(2) {
            let pooled: Vec<f64> = ix.iter().map(|&i| x[i]).chain(iy.iter().map(|&i| y[i])).collect();
            *freq.entry(iqm(&pooled).to_bits()).or_default() += 1;
        }
    }
    let reps = stats::stratified_bootstrap_replicates(&t, "a", 4, 17).unwrap();
    assert_eq!(reps.len(), 4);
    assert!(reps.iter().all(|r| freq.contains_key(&r.to_bits())));

    // frequencies over many replicates match the 16 equally likely resamples
    let n = 32_000;
    let reps = stats::stratified_bootstrap_replicates(&t, "a", n, 3).unwrap();
    for (bits, count) in &freq {
        let p = *count as f64 / 16.0;
        let seen = reps.iter().filter(|r| r.to_bits() == *bits).count() as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((seen - p).abs() < 5.0 * se, "{seen} vs {p}");
    }
    let ci = stats::stratified_bootstrap_iqm(&t, "a", 4, 0.95, stats::CiMethod::Percentile, 17).unwrap();
    let lo = freq.keys().map(|b| f64::from_bits(*b)).fold(f64::INFINITY, f64::min);
    let hi = freq.keys().map(|b| f64::from_bits(*b)).fold(f64::NEG_INFINITY, f64::max);
    assert!(lo <= ci.low && ci.high <= hi);
}

/// Exact two-sided p over all shared seed-index tuples.
fn exhaustive_p(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    let diff = |idx: &[usize]| {
        let pa: Vec<f64> = a.iter().flat_map(|r| idx.iter().map(move |&i| r[i])).collect();
        let pb: Vec<f64> = b.iter().flat_map(|r| idx.iter().map(move |&i| r[i])).collect();
        iqm(&pa) - iqm(&pb)
    };
    let observed = diff(&[0, 1, 2]);
    let all = tuples(3);
    let hits = all
        .iter()
        .filter(|idx| (diff(idx) - observed).abs() >= observed.abs() - 1e-12 * (1.0 + observed.abs()))
        .count();
    hits as f64 / all.len() as f64
}

#[test]
fn paired_test_agrees_with_exhaustive_enumeration_up_to_monte_carlo_error() {
    let a = [[0.9, 0.4, 0.7], [0.6, 0.8, 0.3]];
    let b = [[0.5, 0.3, 0.65], [0.2, 0.7, 0.4]];
    let t = table(&[("x", "a", &a[0]), ("y", "a", &a[1]), ("x", "b", &b[0]), ("y", "b", &b[1])]);
    let exact = exhaustive_p(&a, &b);
    assert!(exact > 0.0 && exact < 1.0);
    let r = 50_000;
    let p = stats::paired_bootstrap_test(&t, "a", "b", r, Alternative::TwoSided, 0).unwrap();
    let se = (exact * (1.0 - exact) / r as f64).sqrt();
    assert!((p - exact).abs() < 5.0 * se + 2.0 / r as f64, "p {p} exact {exact} se {se}");
}

fn mlp_space() -> HyperparameterSpace {
    HyperparameterSpace::new(vec![
        Dimension::real("learning_rate", -3.0, 0.0).log(10.0),
        Dimension::real("momentum", 0.0, 0.95),
        Dimension::real("weight_decay", -6.0, -2.0).log(10.0),
    ])
    .unwrap()
}

#[test]
fn shrink_perturb_moments_on_mlp_weights() {
    let sp = mlp_space();
    let mlp = TinyMlp::new(TinyMlpParams::default(), &sp).unwrap();
    let w = mlp.fresh_init(&mut stream(99, Purpose::Init, 0, 0));
    let draws: Vec<Vec<f64>> = (0..1000)
        .map(|i| shrink_perturb(&w, 0.2, 0.1, &mlp, &mut stream(5, Purpose::Restart, i, 0)).values)
        .collect();
    // Glorot limits of the two weight matrices; biases and momentum start at zero
    let p = TinyMlpParams::default();
    let a1 = (6.0 / (p.input_dim + p.hidden) as f64).sqrt();
    let a2 = (6.0 / (p.hidden + p.classes) as f64).sqrt();
    let n1 = p.hidden * p.input_dim;
    let n2 = p.classes * p.hidden;
    let fresh_var = |j: usize| {
        if j < n1 {
            a1 * a1 / 3.0
        } else if (n1 + p.hidden..n1 + p.hidden + n2).contains(&j) {
            a2 * a2 / 3.0
        } else {
            0.0
        }
    };
    for j in 0..w.dim() {
        let col: Vec<f64> = draws.iter().map(|d| d[j]).collect();
        let mean = col.iter().sum::<f64>() / 1000.0;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 999.0;
        let se = (var / 1000.0).sqrt();
        assert!((mean - 0.2 * w.values[j]).abs() <= 3.0 * se + 1e-15, "coord {j}");
        let target = 0.01 * fresh_var(j);
        if target == 0.0 {
            assert!(var < 1e-30);
        } else {
            assert!((var / target - 1.0).abs() <= 0.15, "coord {j}: {var} vs {target}");
        }
    }
}

#[test]
fn mlp_gradient_matches_central_differences() {
    let sp = mlp_space();
    let mlp = TinyMlp::new(
        TinyMlpParams {
            variant: ipbt_core::trainable::DatasetVariant::Xor,
            ..Default::default()
        },
        &sp,
    )
    .unwrap();
    let mut rng = stream(3, Purpose::Init, 1, 0);
    let batch: Vec<usize> = (0..16).map(|_| rng.random_range(0..mlp.train_size())).collect();
    for _ in 0..10 {
        let theta: Vec<f64> = (0..mlp.n_params()).map(|_| rng.random_range(-1.5..1.5)).collect();
        let (_, g) = mlp.loss_and_grad(&theta, &batch);
        for j in 0..theta.len() {
            let h = 1e-5;
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (mlp.loss(&up, &batch) - mlp.loss(&dn, &batch)) / (2.0 * h);
            let err = (g[j] - fd).abs() / g[j].abs().max(fd.abs()).max(1e-6);
            assert!(err < 1e-4, "param {j}: {} vs {fd}", g[j]);
        }
    }
}

/// Two-sample Kolmogorov-Smirnov p-value (asymptotic distribution).
fn ks_p(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let en = (n * m / (n + m)).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * f64::from(k * k) * lambda * lambda).exp();
        p += term;
    }
    p.clamp(0.0, 1.0)
}

fn two_dim_space() -> HyperparameterSpace {
    HyperparameterSpace::new(vec![
        Dimension::real("learning_rate", -4.0, 0.0).log(10.0),
        Dimension::real("regularization", 0.0, 1.0),
    ])
    .unwrap()
}

#[test]
fn restart_without_records_samples_uniformly() {
    let sp = two_dim_space();
    let lc = LearningCurve::new(LearningCurveParams::default(), &sp).unwrap();
    let bo = BoConfig::default();
    let ctx = RestartContext {
        space: &sp,
        trainable: &lc,
        selection_fraction: 0.25,
        bo: &bo,
    };
    let pop: Vec<Member> = (0..8)
        .map(|i| {
            let mut m = Member::new(i, sp.sample_uniform(&mut stream(1, Purpose::Init, i, 0)), lc.fresh_init(&mut stream(1, Purpose::Init, i, 1)));
            m.last_score = Some(i as f64);
            m
        })
        .collect();
    let mut drawn = Vec::new();
    let mut next = 100;
    let mut r = 0;
    while drawn.len() < 1000 {
        let (out, _) = perform_restart(&pop, &[], &RestartConfig::default(), &ctx, 16, &mut next, &mut stream(2, Purpose::Restart, r, 0)).unwrap();
        drawn.extend(out.into_iter().map(|m| m.hps));
        r += 1;
    }
    drawn.truncate(1000);
    let mut rng = stream(3, Purpose::Baseline, 0, 0);
    let reference: Vec<_> = (0..1000).map(|_| sp.sample_uniform(&mut rng)).collect();
    for d in 0..2 {
        let enc = |v: &ipbt_core::HpVector| sp.dims()[d].encode(v.0[d]);
        let p = ks_p(drawn.iter().map(enc).collect(), reference.iter().map(enc).collect());
        assert!(p > 0.01, "dim {d}: p = {p}");
    }
}

#[test]
fn full_resampling_perturbation_is_uniform() {
    let sp = two_dim_space();
    let cfg = PerturbConfig {
        resample_probability: 1.0,
        ..Default::default()
    };
    let start = sp.denormalize(&[0.9, 0.1]);
    let mut rng = stream(4, Purpose::Explore, 0, 0);
    let drawn: Vec<_> = (0..1000).map(|_| perturb_hps(&sp, &start, &cfg, &mut rng)).collect();
    let mut rng = stream(5, Purpose::Baseline, 0, 0);
    let reference: Vec<_> = (0..1000).map(|_| sp.sample_uniform(&mut rng)).collect();
    for d in 0..2 {
        let enc = |v: &ipbt_core::HpVector| sp.dims()[d].encode(v.0[d]);
        assert!(ks_p(drawn.iter().map(enc).collect(), reference.iter().map(enc).collect()) > 0.01);
    }
}

#[test]
fn ks_oracle_detects_a_shift() {
    let a: Vec<f64> = (0..500).map(|i| i as f64 / 500.0).collect();
    let b: Vec<f64> = a.iter().map(|x| x * 0.8).collect();
    assert!(ks_p(a.clone(), a.clone()) > 0.99);
    assert!(ks_p(a, b) < 1e-3);
}
