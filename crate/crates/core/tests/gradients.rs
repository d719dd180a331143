//! Analytic gradients against central finite differences.

use hedonic_core::activation::Activation;
use hedonic_core::embeddings::{window_loss, window_loss_gradient, EmbeddingMatrix};
use hedonic_core::linalg::Matrix;
use hedonic_core::net::{loss, loss_and_gradient, HedonicNetwork, NetworkConfig, PriceTable, PriceTransform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-6;

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}

fn random_table(rng: &mut ChaCha8Rng, rows: usize, inputs: usize, periods: usize) -> PriceTable<f64> {
    let x = Matrix::from_vec(rows, inputs, (0..rows * inputs).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let y = Matrix::from_vec(rows, periods, (0..rows * periods).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
    let q = Matrix::from_vec(rows, periods, (0..rows * periods).map(|_| rng.random_range(0.5..3.0)).collect()).unwrap();
    let mut observed: Vec<bool> = (0..rows * periods).map(|_| rng.random_bool(0.75)).collect();
    observed[0] = true;
    PriceTable::new((0..rows).map(|r| format!("p{r}")).collect(), x, y, q, observed).unwrap()
}

fn network_instance(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs = rng.random_range(2..5);
    let mut widths = vec![inputs];
    for _ in 0..rng.random_range(1..4) {
        widths.push(rng.random_range(2..5));
    }
    let periods = rng.random_range(2..5);
    let activation = if seed % 2 == 0 { Activation::Sigmoid } else { Activation::Relu };
    let config = NetworkConfig::new(widths, activation, periods);
    // Zero initial biases put dead ReLU rows exactly on a kink; jitter every
    // parameter so the check runs at a differentiable point.
    let init = HedonicNetwork::<f64>::initialize(config.clone(), seed).unwrap();
    let mut params = init.params().clone();
    let jittered: Vec<f64> = params.flatten().iter().map(|v| v + rng.random_range(-0.1..0.1)).collect();
    params.assign_flat(&jittered).unwrap();
    let net = HedonicNetwork::from_parts(
        config.clone(),
        params,
        init.input_shift().to_vec(),
        init.input_scale().to_vec(),
        PriceTransform::Identity,
    )
    .unwrap();
    let n_rows = rng.random_range(3..7);
    let table = random_table(&mut rng, n_rows, inputs, periods);
    let rows: Vec<usize> = (0..table.len()).collect();
    let lambda = if seed % 3 == 0 { 0.0 } else { rng.random_range(0.1..1.0) };

    let (_, grad) = loss_and_gradient(&net, &table, &rows, lambda, false, None).unwrap();
    let analytic = grad.flatten();
    let base = net.params().clone();
    let flat = base.flatten();
    let at = |theta: &[f64]| {
        let mut p = base.clone();
        p.assign_flat(theta).unwrap();
        let n = HedonicNetwork::from_parts(
            config.clone(),
            p,
            net.input_shift().to_vec(),
            net.input_scale().to_vec(),
            PriceTransform::Identity,
        )
        .unwrap();
        loss(&n, &table, &rows, lambda).unwrap()
    };
    let numeric: Vec<f64> = (0..flat.len())
        .map(|k| {
            let mut plus = flat.clone();
            let mut minus = flat.clone();
            plus[k] += STEP;
            minus[k] -= STEP;
            (at(&plus) - at(&minus)) / (2.0 * STEP)
        })
        .collect();
    relative_error(&analytic, &numeric)
}

#[test]
fn network_gradient_matches_finite_differences() {
    for seed in 0..24 {
        let err = network_instance(seed);
        assert!(err < 1e-4, "instance {seed}: relative error {err:e}");
    }
}

#[test]
fn sequential_and_parallel_gradients_agree_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let config = NetworkConfig::new(vec![3, 8, 4], Activation::Relu, 3);
    let net = HedonicNetwork::<f64>::initialize(config, 2).unwrap();
    let table = random_table(&mut rng, 150, 3, 3);
    let rows: Vec<usize> = (0..150).collect();
    let (ls, gs) = loss_and_gradient(&net, &table, &rows, 0.2, false, None).unwrap();
    let (lp, gp) = loss_and_gradient(&net, &table, &rows, 0.2, true, None).unwrap();
    assert_eq!(ls.to_bits(), lp.to_bits());
    assert_eq!(gs.flatten(), gp.flatten());
}

fn word2vec_instance(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
    let dim = rng.random_range(2..6);
    let vocab = rng.random_range(3..9);
    let omega = EmbeddingMatrix::unnamed(dim, vocab, (0..dim * vocab).map(|_| rng.random_range(-0.8..0.8)).collect()).unwrap();
    let k = 2 * rng.random_range(1..3);
    let context: Vec<usize> = (0..k).map(|_| rng.random_range(0..vocab)).collect();
    let center = rng.random_range(0..vocab);

    let mut analytic = vec![0.0; dim * vocab];
    window_loss_gradient(&omega, &context, center, &mut analytic).unwrap();
    let values = omega.values().to_vec();
    let at = |v: Vec<f64>| window_loss(&EmbeddingMatrix::unnamed(dim, vocab, v).unwrap(), &context, center).unwrap();
    let numeric: Vec<f64> = (0..values.len())
        .map(|j| {
            let mut plus = values.clone();
            let mut minus = values.clone();
            plus[j] += STEP;
            minus[j] -= STEP;
            (at(plus) - at(minus)) / (2.0 * STEP)
        })
        .collect();
    relative_error(&analytic, &numeric)
}

#[test]
fn word2vec_gradient_matches_finite_differences() {
    for seed in 0..24 {
        let err = word2vec_instance(seed);
        assert!(err < 1e-4, "instance {seed}: relative error {err:e}");
    }
}
