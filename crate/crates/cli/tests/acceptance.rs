//! The acceptance gates, one PASS/FAIL line each. Runs as its own target:
//! `cargo test -p hedonic-cli --test acceptance`.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use hedonic_core::activation::Activation;
use hedonic_core::embeddings::{cosine_similarity, window_loss, window_loss_gradient, EmbeddingMatrix, Word2VecConfig};
use hedonic_core::features::{catalog_features, train_catalog_embeddings, TextWeighting};
use hedonic_core::indices::{
    annualized_rate, bilateral_hedonic, bilateral_jevons, bilateral_matched, chained_series, fisher, jevons,
    laspeyres, paasche, Formula, HedonicSurface, IndexKind,
};
use hedonic_core::inference::{hedonic_ci, ols_fit, OlsFit, OlsOptions};
use hedonic_core::linalg::Matrix;
use hedonic_core::net::{
    evaluate, loss, loss_and_gradient, r_squared, split_stratified, train, train_on_tables, AdamConfig,
    HedonicNetwork, NetworkConfig, PriceTable, PriceTransform, TrainingConfig,
};
use hedonic_core::stats::rank_sum_greater;
use hedonic_core::synth::{drift_experiment, generate_panel, MarketSpec};
use hedonic_core::{Features, Generated};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

// ---------------------------------------------------------------- 1

fn index_kernels() -> Outcome {
    let (p0, q0, p1, q1): ([f64; 2], [f64; 2], [f64; 2], [f64; 2]) = ([1.0, 1.0], [1.0, 1.0], [2.0, 1.0], [1.0, 3.0]);
    let l = laspeyres(&p1, &p0, &q0).unwrap();
    let p = paasche(&p1, &p0, &q1).unwrap();
    let f = fisher(&p1, &p0, &q1, &q0).unwrap();
    let hand = (l - 1.5).abs() <= 1e-12 && (p - 1.25).abs() <= 1e-12 && (f - 1.875f64.sqrt()).abs() <= 1e-12;

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut failures = Vec::new();
    let baskets = 1000;
    for b in 0..baskets {
        let n = rng.random_range(1..9);
        let mut draw = |lo: f64, hi: f64| (0..n).map(|_| rng.random_range(lo..hi)).collect::<Vec<f64>>();
        let (pb, pc, qb, qc) = (draw(0.1, 50.0), draw(0.1, 50.0), draw(0.1, 20.0), draw(0.1, 20.0));
        let c = rng.random_range(0.1..10.0);
        let all = |pc: &[f64], pb: &[f64], qc: &[f64], qb: &[f64]| {
            [
                laspeyres(pc, pb, qb).unwrap(),
                paasche(pc, pb, qc).unwrap(),
                fisher(pc, pb, qc, qb).unwrap(),
                jevons(pc, pb).unwrap(),
            ]
        };
        let base = all(&pc, &pb, &qc, &qb);
        let ratios: Vec<f64> = pc.iter().zip(&pb).map(|(a, b)| a / b).collect();
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if base.iter().any(|&v| v < lo * (1.0 - 1e-12) || v > hi * (1.0 + 1e-12)) {
            failures.push(format!("basket {b}: mean value"));
        }
        let scaled: Vec<f64> = pc.iter().map(|v| v * c).collect();
        if all(&scaled, &pb, &qc, &qb).iter().zip(&base).any(|(s, v)| rel(*s, c * v) > 1e-12) {
            failures.push(format!("basket {b}: homogeneity"));
        }
        let back = all(&pb, &pc, &qb, &qc);
        if (base[2] * back[2] - 1.0).abs() > 1e-12 || (base[3] * back[3] - 1.0).abs() > 1e-12 {
            failures.push(format!("basket {b}: time reversal"));
        }
        if all(&pb, &pb, &qc, &qb).iter().any(|v| (v - 1.0).abs() > 1e-12) {
            failures.push(format!("basket {b}: identity"));
        }
        let (sqc, sqb): (Vec<f64>, Vec<f64>) = (qc.iter().map(|q| q * c).collect(), qb.iter().map(|q| q * c).collect());
        if all(&pc, &pb, &sqc, &sqb).iter().zip(&base).any(|(s, v)| rel(*s, *v) > 1e-12) {
            failures.push(format!("basket {b}: quantity scale"));
        }
    }
    outcome(
        hand && failures.is_empty(),
        format!(
            "L={l} P={p} F={f:.12}; {baskets} baskets, {} invariant failures{}",
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    )
}

// ---------------------------------------------------------------- 2

fn features_for(g: &Generated, cfg: &Word2VecConfig) -> Features {
    let (vocab, model) = train_catalog_embeddings::<f64>(&g.catalog, 1, cfg).unwrap();
    catalog_features(&g.catalog, &vocab, &model.embeddings, TextWeighting::Uniform, true).unwrap()
}

fn uniform_inflation() -> Outcome {
    let g: Generated = generate_panel(&MarketSpec::uniform_inflation(1)).unwrap();
    let truth = g.truth.surface(&g.panel);
    let mut worst: f64 = 0.0;
    for t in 1..g.panel.n_periods() {
        for v in [
            bilateral_matched(&g.panel, t, 1, Formula::Fisher).unwrap(),
            bilateral_hedonic(&truth, &g.panel, t, 1, Formula::Fisher).unwrap(),
            bilateral_jevons(&g.panel, t, 1).unwrap(),
        ] {
            worst = worst.max((v - 1.02).abs());
        }
    }

    let features = features_for(
        &g,
        &Word2VecConfig {
            epochs: 3,
            parallel: true,
            ..Default::default()
        },
    );
    let split = split_stratified(&g.panel, (0.8, 0.2, 0.0), 1).unwrap();
    let net_cfg = NetworkConfig::new(vec![features.width(), 64, 32, 16], Activation::Relu, g.panel.n_periods());
    let cfg = TrainingConfig {
        epochs: 300,
        adam: AdamConfig {
            learning_rate: 0.003,
            ..Default::default()
        },
        final_lr_fraction: 0.01,
        parallel: true,
        ..Default::default()
    };
    let out = train(&g.panel, &features, &split, &net_cfg, &cfg).unwrap();
    let prices: Vec<Vec<f64>> = g
        .panel
        .products()
        .iter()
        .map(|id| out.network.hedonic_prices(features.get(id).unwrap()).unwrap())
        .collect();
    let surface = HedonicSurface::from_fn(&g.panel, |i, t| Some(prices[i][t]));
    let model = chained_series(&g.panel, Some(&surface), IndexKind::HedonicF, 12, 0).unwrap();
    let exact = chained_series(&g.panel, Some(&truth), IndexKind::HedonicF, 12, 0).unwrap();
    let end = *model.levels.keys().next_back().unwrap();
    let (a, b) = (annualized_rate(&model, 0, end).unwrap(), annualized_rate(&exact, 0, end).unwrap());
    outcome(
        worst <= 1e-10 && (a - b).abs() <= 0.5,
        format!("max per-step error {worst:.1e}; yearly hedonic Fisher {a:.3}% vs truth {b:.3}% (gap {:.3}pp)", (a - b).abs()),
    )
}

// ---------------------------------------------------------------- 3

fn benchmark_r2(seed: u64) -> (f64, f64) {
    let g: Generated = generate_panel(&MarketSpec::benchmark(seed)).unwrap();
    let features = features_for(
        &g,
        &Word2VecConfig {
            epochs: 3,
            parallel: true,
            seed,
            ..Default::default()
        },
    );
    let split = split_stratified(&g.panel, (0.6, 0.2, 0.2), seed).unwrap();
    let table = |ids: &[String]| {
        PriceTable::from_panel(&g.panel, &features, ids, PriceTransform::Identity, false)
            .unwrap()
            .without_empty_rows()
    };
    let (train_t, val_t, test_t) = (table(&split.train), table(&split.validation), table(&split.test));
    let periods = g.panel.n_periods();
    let widths = vec![features.width(), 64, 32, 16];
    let cfg = TrainingConfig {
        epochs: 60,
        batch_size: 64,
        seed,
        parallel: true,
        adam: AdamConfig {
            learning_rate: 0.003,
            ..Default::default()
        },
        ..Default::default()
    };
    let multi = train_on_tables(&train_t, Some(&val_t), &NetworkConfig::new(widths.clone(), Activation::Relu, periods), &cfg)
        .unwrap();
    let (_, multi_r2) = evaluate(&multi.network, &test_t, 0.0, true).unwrap();

    // one network of the same width per period
    let mut pred = Matrix::zeros(test_t.len(), periods);
    for t in 0..periods {
        let single = NetworkConfig::new(widths.clone(), Activation::Relu, 1);
        let o = train_on_tables(
            &train_t.single_period(t).unwrap(),
            Some(&val_t.single_period(t).unwrap()),
            &single,
            &cfg,
        )
        .unwrap();
        for r in 0..test_t.len() {
            if test_t.is_observed(r, t) {
                pred[(r, t)] = o.network.hedonic_prices(test_t.features.row(r)).unwrap()[0];
            }
        }
    }
    let single_r2 = r_squared(&pred, &test_t.targets, &test_t.observed, Some(&test_t.quantities))
        .unwrap()
        .pooled;
    (multi_r2.unwrap(), single_r2.unwrap())
}

fn predictive_accuracy() -> Outcome {
    let runs: Vec<(f64, f64)> = (1..=5).map(benchmark_r2).collect();
    let mean = |f: fn(&(f64, f64)) -> f64| runs.iter().map(f).sum::<f64>() / runs.len() as f64;
    let (m, s) = (mean(|r| r.0), mean(|r| r.1));
    let min_multi = runs.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let per: Vec<String> = runs.iter().map(|(a, b)| format!("{a:.3}/{b:.3}")).collect();
    outcome(
        min_multi >= 0.80 && m >= s,
        format!("multi/single pooled holdout R2 by seed [{}]; means {m:.3} vs {s:.3}", per.join(", ")),
    )
}

// ---------------------------------------------------------------- 4

const STEP: f64 = 1e-6;

fn vec_rel(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / norm(a).max(norm(b)).max(1e-12)
}

fn central<F: Fn(&[f64]) -> f64>(f: F, at: &[f64]) -> Vec<f64> {
    (0..at.len())
        .map(|k| {
            let (mut plus, mut minus) = (at.to_vec(), at.to_vec());
            plus[k] += STEP;
            minus[k] -= STEP;
            (f(&plus) - f(&minus)) / (2.0 * STEP)
        })
        .collect()
}

fn network_gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
    let inputs = rng.random_range(2..5);
    let mut widths = vec![inputs];
    for _ in 0..rng.random_range(1..4) {
        widths.push(rng.random_range(2..5));
    }
    let periods = rng.random_range(2..5);
    let act = if seed % 2 == 0 { Activation::Sigmoid } else { Activation::Relu };
    let config = NetworkConfig::new(widths, act, periods);
    let init = HedonicNetwork::<f64>::initialize(config.clone(), seed).unwrap();
    let shift = init.input_shift().to_vec();
    let scale = init.input_scale().to_vec();
    // moved off ReLU kinks, which zero biases would otherwise sit on
    let flat: Vec<f64> = init.params().flatten().iter().map(|v| v + rng.random_range(-0.1..0.1)).collect();
    let build = |theta: &[f64]| {
        let mut p = init.params().clone();
        p.assign_flat(theta).unwrap();
        HedonicNetwork::from_parts(config.clone(), p, shift.clone(), scale.clone(), PriceTransform::Identity).unwrap()
    };
    let rows = rng.random_range(3..7);
    let m = |r: usize, c: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng| {
        Matrix::from_vec(r, c, (0..r * c).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
    };
    let x = m(rows, inputs, -1.0, 1.0, &mut rng);
    let y = m(rows, periods, -2.0, 2.0, &mut rng);
    let q = m(rows, periods, 0.5, 3.0, &mut rng);
    let mut observed: Vec<bool> = (0..rows * periods).map(|_| rng.random_bool(0.75)).collect();
    observed[0] = true;
    let table = PriceTable::new((0..rows).map(|r| format!("p{r}")).collect(), x, y, q, observed).unwrap();
    let all: Vec<usize> = (0..rows).collect();
    let lambda = if seed % 3 == 0 { 0.0 } else { rng.random_range(0.1..1.0) };
    let (_, grad) = loss_and_gradient(&build(&flat), &table, &all, lambda, false, None).unwrap();
    let numeric = central(|th| loss(&build(th), &table, &all, lambda).unwrap(), &flat);
    vec_rel(&grad.flatten(), &numeric)
}

fn word2vec_gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
    let dim = rng.random_range(2..6);
    let vocab = rng.random_range(3..9);
    let values: Vec<f64> = (0..dim * vocab).map(|_| rng.random_range(-0.8..0.8)).collect();
    let k = 2 * rng.random_range(1..3);
    let context: Vec<usize> = (0..k).map(|_| rng.random_range(0..vocab)).collect();
    let center = rng.random_range(0..vocab);
    let omega = EmbeddingMatrix::unnamed(dim, vocab, values.clone()).unwrap();
    let mut analytic = vec![0.0; values.len()];
    window_loss_gradient(&omega, &context, center, &mut analytic).unwrap();
    let numeric = central(
        |v| window_loss(&EmbeddingMatrix::unnamed(dim, vocab, v.to_vec()).unwrap(), &context, center).unwrap(),
        &values,
    );
    vec_rel(&analytic, &numeric)
}

fn gradient_integrity() -> Outcome {
    let n = 25;
    let net = (0..n).map(network_gradient_error).fold(0.0, f64::max);
    let w2v = (0..n).map(word2vec_gradient_error).fold(0.0, f64::max);
    outcome(
        net < 1e-4 && w2v < 1e-4,
        format!("{n} instances each; worst relative error network {net:.1e}, word2vec {w2v:.1e}"),
    )
}

// ---------------------------------------------------------------- 5

fn inference_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let p = rng.random_range(1..7);
        let n = rng.random_range(p + 2..60);
        let x: Vec<f64> = (0..n * p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let xm = DMatrix::from_row_slice(n, p, &x);
        let yv = DVector::from_column_slice(&y);
        let inv = (xm.transpose() * &xm).try_inverse().unwrap();
        let theta = &inv * xm.transpose() * &yv;
        let sigma2 = (&yv - &xm * &theta).norm_squared() / (n - p) as f64;
        let fit = ols_fit(&Matrix::from_vec(n, p, x).unwrap(), &y, 0, &OlsOptions::default()).unwrap();
        let (ts, cs) = (theta.amax(), (&inv * sigma2).amax());
        for k in 0..p {
            worst = worst.max((fit.theta_hat[k] - theta[k]).abs() / ts);
            for j in 0..p {
                worst = worst.max((fit.covariance[(k, j)] - inv[(k, j)] * sigma2).abs() / cs);
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (n, p) = (60, 3);
    let theta = [2.0, -1.0, 0.5];
    let x = Matrix::from_vec(n, p, (0..n * p).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
    let v = [1.0, 0.5, -2.0];
    let target: f64 = theta.iter().zip(&v).map(|(a, b)| a * b).sum();
    let mean = x.matvec(&theta);
    let reps = 2000;
    let mut hits = 0;
    for _ in 0..reps {
        let y: Vec<f64> = mean
            .iter()
            .map(|m| m + 1.5 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect();
        let ci = hedonic_ci(&ols_fit(&x, &y, 0, &OlsOptions::default()).unwrap(), &v, 0.10).unwrap();
        if ci.lower <= target && target <= ci.upper {
            hits += 1;
        }
    }
    let coverage = hits as f64 / reps as f64;

    let fit = OlsFit {
        period: 0,
        theta_hat: vec![114.6],
        covariance: Matrix::from_vec(1, 1, vec![0.05 * 0.05]).unwrap(),
        residual_variance: 0.0,
        n_obs: 100,
        ridge: None,
    };
    let ci = hedonic_ci(&fit, &[1.0], 0.10).unwrap();
    let round = |v: f64| (v * 10.0).round() / 10.0;
    let table = (round(ci.lower), round(ci.upper));
    outcome(
        worst <= 1e-8 && (coverage - 0.90).abs() <= 0.03 && table == (114.5, 114.7),
        format!("OLS worst relative gap {worst:.1e}; 90% coverage {coverage:.4} over {reps}; interval [{}, {}]", table.0, table.1),
    )
}

// ---------------------------------------------------------------- 6

fn chain_drift() -> Outcome {
    let r = drift_experiment(&MarketSpec::chain_drift(1), 50, 36).unwrap();
    outcome(
        r.monthly_exceeds_share >= 0.80,
        format!(
            "monthly drift larger in {:.0}% of 50 replications; mean |log drift| monthly {:.4}, yearly {:.4}",
            100.0 * r.monthly_exceeds_share,
            r.mean_monthly,
            r.mean_yearly
        ),
    )
}

// ---------------------------------------------------------------- 7

fn embedding_sanity() -> Outcome {
    let spec = MarketSpec::new(300, 2, 5);
    let g: Generated = generate_panel(&spec).unwrap();
    let cfg = Word2VecConfig {
        dim: 16,
        epochs: 3,
        learning_rate: 0.01,
        parallel: true,
        ..Default::default()
    };
    let (vocab, model) = train_catalog_embeddings::<f64>(&g.catalog, 1, &cfg).unwrap();
    let mut words = Vec::new();
    for k in 0..spec.attributes {
        for l in 0..spec.levels {
            for w in spec.bucket_words(k, l) {
                if let Some(j) = vocab.index_of(&w) {
                    words.push(((k, l), j));
                }
            }
        }
    }
    let (mut same, mut cross) = (Vec::new(), Vec::new());
    for a in 0..words.len() {
        for b in a + 1..words.len() {
            let c = cosine_similarity(model.embeddings.column(words[a].1), model.embeddings.column(words[b].1)).unwrap();
            if words[a].0 == words[b].0 {
                same.push(c);
            } else {
                cross.push(c);
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (_, p) = rank_sum_greater(&same, &cross).unwrap();
    let (ms, mc) = (mean(&same), mean(&cross));
    outcome(
        ms > mc && p < 0.01,
        format!("mean cosine same-bucket {ms:.3} vs cross-bucket {mc:.3}; rank-sum p {p:.1e}"),
    )
}

// ---------------------------------------------------------------- 8

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            let name = p.file_name()?.to_str()?.to_string();
            (name.ends_with(".csv") || name.ends_with(".svg")).then(|| (name, std::fs::read(&p).unwrap()))
        })
        .collect();
    out.sort();
    out
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_hedonic"))
            .args(["pipeline", "--seed", "11", "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        artifacts(&out)
    };
    let (a, b) = (run("first"), run("second"));
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    let names_match = a.iter().map(|x| &x.0).eq(b.iter().map(|x| &x.0));
    let svgs = a.iter().filter(|x| x.0.ends_with(".svg")).count();
    outcome(
        names_match && differing.is_empty() && svgs == 4,
        format!("{} artifacts ({svgs} SVG) compared; differing: {differing:?}", a.len()),
    )
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 8] = [
        ("index kernel correctness", Duration::from_secs(10), index_kernels),
        ("uniform-inflation recovery", Duration::from_secs(300), uniform_inflation),
        ("predictive accuracy", Duration::from_secs(600), predictive_accuracy),
        ("gradient integrity", Duration::from_secs(60), gradient_integrity),
        ("inference correctness", Duration::from_secs(120), inference_correctness),
        ("chain-drift direction", Duration::from_secs(300), chain_drift),
        ("embedding sanity", Duration::from_secs(120), embedding_sanity),
        ("determinism", Duration::from_secs(600), determinism),
    ];
    let mut failed = 0;
    for (k, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let took = start.elapsed();
        let pass = o.pass && took <= *budget;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {} ({name}): {} - {} [{:.1}s of {}s]",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
