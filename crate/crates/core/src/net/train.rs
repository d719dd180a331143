use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::loss_and_gradient;
use super::{
    adam_step, r_squared, AdamState, DataSplit, FeatureTable, HedonicNetwork, NetworkConfig, PriceTable,
    PriceTransform, TrainingConfig,
};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::market::TransactionPanel;
use crate::scalar::Real;

/// One row of the learning curve. Losses are divided by the total observed
/// quantity of their table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_r2: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// parameters at the selected epoch
    pub network: HedonicNetwork<T>,
    pub curve: Vec<EpochRecord>,
    /// 1-based; 0 when no epoch ran
    pub best_epoch: usize,
}

/// Trains on the split's training products, selecting the epoch with the lowest
/// validation loss (training loss when the validation set is empty).
pub fn train<T: Real>(
    panel: &TransactionPanel<T>,
    features: &FeatureTable<T>,
    split: &DataSplit,
    net_config: &NetworkConfig,
    cfg: &TrainingConfig,
) -> Result<TrainOutcome<T>> {
    let table = |ids| {
        PriceTable::from_panel(panel, features, ids, cfg.price_transform, cfg.include_zero_prices)
            .map(|t| t.without_empty_rows())
    };
    let train_table = table(&split.train)?;
    let val_table = table(&split.validation)?;
    let val = (!val_table.is_empty()).then_some(&val_table);
    train_on_tables(&train_table, val, net_config, cfg)
}

/// Predictions `θ_tᵀV_i` for every row and period, in the network's target
/// space (log prices under the log transform).
pub fn predict<T: Real>(net: &HedonicNetwork<T>, features: &Matrix<T>, parallel: bool) -> Result<Matrix<T>> {
    let rows: Vec<usize> = (0..features.rows()).collect();
    let one = |&r: &usize| net.forward(features.row(r)).map(|f| f.prices);
    let out: Vec<Vec<T>> = if parallel {
        rows.par_iter().map(one).collect::<Result<_>>()?
    } else {
        rows.iter().map(one).collect::<Result<_>>()?
    };
    Matrix::from_vec(features.rows(), net.config().periods, out.concat())
}

fn table_loss<T: Real>(table: &PriceTable<T>, pred: &Matrix<T>, lambda: f64) -> f64 {
    let periods = table.periods();
    let mut total = 0.0;
    for r in 0..table.len() {
        for t in 0..periods {
            if table.is_observed(r, t) {
                let e = (table.targets[(r, t)] - pred[(r, t)]).as_f64();
                total += e * e * table.quantities[(r, t)].as_f64();
            }
            if t + 1 < periods {
                total += lambda * (pred[(r, t + 1)] - pred[(r, t)]).as_f64().abs();
            }
        }
    }
    total
}

fn currency<T: Real>(m: &Matrix<T>, transform: PriceTransform) -> Matrix<T> {
    match transform {
        PriceTransform::Identity => m.clone(),
        PriceTransform::Log => {
            Matrix::from_vec(m.rows(), m.cols(), m.as_slice().iter().map(|v| v.exp()).collect()).unwrap()
        }
    }
}

/// Holdout-style metrics of a network on a table: quantity-normalized loss and
/// pooled R² in currency units.
pub fn evaluate<T: Real>(net: &HedonicNetwork<T>, table: &PriceTable<T>, lambda: f64, parallel: bool) -> Result<(f64, Option<f64>)> {
    let pred = predict(net, &table.features, parallel)?;
    let q = table.observed_quantity().as_f64();
    let loss = table_loss(table, &pred, lambda) / if q > 0.0 { q } else { 1.0 };
    let r2 = r_squared(
        &currency(&pred, net.price_transform()),
        &currency(&table.targets, net.price_transform()),
        &table.observed,
        Some(&table.quantities),
    )?;
    Ok((loss, r2.pooled))
}

fn input_normalization<T: Real>(x: &Matrix<T>) -> (Vec<T>, Vec<T>) {
    let n = x.rows().max(1) as f64;
    let mut shift = vec![T::zero(); x.cols()];
    let mut scale = vec![T::one(); x.cols()];
    for c in 0..x.cols() {
        let mean = (0..x.rows()).map(|r| x[(r, c)].as_f64()).sum::<f64>() / n;
        let var = (0..x.rows()).map(|r| (x[(r, c)].as_f64() - mean).powi(2)).sum::<f64>() / n;
        shift[c] = T::of(mean);
        if var.sqrt() > 1e-12 {
            scale[c] = T::of(var.sqrt());
        }
    }
    (shift, scale)
}

/// Trains on prepared tables. Inputs are standardized with training-set
/// moments, and targets and quantities are rescaled internally to order one
/// (with λ adjusted so the minimizer is unchanged); the returned network works
/// in the original units.
pub fn train_on_tables<T: Real>(
    train: &PriceTable<T>,
    validation: Option<&PriceTable<T>>,
    net_config: &NetworkConfig,
    cfg: &TrainingConfig,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    net_config.validate()?;
    for table in std::iter::once(train).chain(validation) {
        if table.periods() != net_config.periods || table.features.cols() != net_config.input_dim() {
            return Err(Error::Dimension(format!(
                "table is {} periods × {} features, network expects {} × {}",
                table.periods(),
                table.features.cols(),
                net_config.periods,
                net_config.input_dim()
            )));
        }
    }
    let train = train.without_empty_rows();
    if train.is_empty() {
        return Err(Error::DegenerateBatch);
    }

    let qsum = train.observed_quantity().as_f64();
    let nobs = train.observed_count() as f64;
    let q_scale = if qsum > 0.0 { qsum / nobs } else { 1.0 };
    // Quantity-weighted mean |target|; brings targets to order one for either
    // transform.
    let p_scale = {
        let periods = train.periods();
        let mut num = 0.0;
        for r in 0..train.len() {
            for t in 0..periods {
                if train.is_observed(r, t) {
                    let w = if qsum > 0.0 { train.quantities[(r, t)].as_f64() } else { 1.0 };
                    num += w * train.targets[(r, t)].as_f64().abs();
                }
            }
        }
        let m = num / if qsum > 0.0 { qsum } else { nobs };
        if m > 1e-12 {
            m
        } else {
            1.0
        }
    };
    let mut scaled = train.clone();
    for v in scaled.targets.as_mut_slice() {
        *v /= T::of(p_scale);
    }
    for v in scaled.quantities.as_mut_slice() {
        *v /= T::of(q_scale);
    }
    let lambda = T::of(cfg.smoothness / (p_scale * q_scale));

    let mut net = HedonicNetwork::initialize(net_config.clone(), cfg.seed)?;
    let (shift, scale) = input_normalization(&train.features);
    net.set_input_normalization(shift, scale);
    net.set_price_transform(cfg.price_transform);

    let to_original = |net: &HedonicNetwork<T>| {
        let mut out = net.clone();
        for h in out.params_mut().heads.as_mut_slice() {
            *h *= T::of(p_scale);
        }
        out
    };

    let mut flat = net.params().flatten();
    let mut adam = AdamState::new(flat.len());
    let mut order: Vec<usize> = (0..scaled.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, HedonicNetwork<T>)> = None;

    for epoch in 1..=cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add((epoch as u64).wrapping_mul(0xA24B_AED4_963E_E407)));
        order.shuffle(&mut rng);
        let dropout_seed = net_config
            .dropout
            .as_ref()
            .map(|_| cfg.seed ^ (epoch as u64).wrapping_mul(0x9FB2_1C65_1E98_DF25));
        let progress = if cfg.epochs > 1 { (epoch - 1) as f64 / (cfg.epochs - 1) as f64 } else { 0.0 };
        let anneal = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
        let adam_cfg = super::AdamConfig {
            learning_rate: cfg.adam.learning_rate * (cfg.final_lr_fraction + (1.0 - cfg.final_lr_fraction) * anneal),
            ..cfg.adam
        };
        for batch in order.chunks(cfg.batch_size) {
            let (loss, grad) = match loss_and_gradient(&net, &scaled, batch, lambda, cfg.parallel, dropout_seed) {
                Ok(v) => v,
                Err(Error::DegenerateBatch) => continue,
                Err(e) => return Err(e),
            };
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged {
                    epoch,
                    message: format!("batch loss {loss}"),
                });
            }
            adam_step(&mut adam, &mut flat, &grad.flatten(), &adam_cfg).map_err(|e| match e {
                Error::TrainingDiverged { message, .. } => Error::TrainingDiverged { epoch, message },
                other => other,
            })?;
            net.params_mut().assign_flat(&flat)?;
        }

        let current = to_original(&net);
        let (train_loss, _) = evaluate(&current, &train, cfg.smoothness, cfg.parallel)?;
        if !train_loss.is_finite() {
            return Err(Error::TrainingDiverged {
                epoch,
                message: format!("training loss {train_loss}"),
            });
        }
        let (val_loss, val_r2) = match validation {
            Some(v) if v.observed_count() > 0 => {
                let (l, r) = evaluate(&current, v, cfg.smoothness, cfg.parallel)?;
                (Some(l), r)
            }
            _ => (None, None),
        };
        let score = val_loss.unwrap_or(train_loss);
        if best.as_ref().is_none_or(|b| score < b.0) {
            best = Some((score, epoch, current));
        }
        curve.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_r2,
        });
    }

    let (network, best_epoch) = match best {
        Some((_, e, n)) => (n, e),
        None => (to_original(&net), 0),
    };
    Ok(TrainOutcome {
        network,
        curve,
        best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::Activation;

    fn linear_table(n: usize, periods: usize, seed: u64) -> PriceTable<f64> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Matrix::from_vec(n, 3, (0..n * 3).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        let beta = [3.0, 1.0, 2.0];
        let mut y = Matrix::zeros(n, periods);
        for r in 0..n {
            for t in 0..periods {
                let g = 1.0 + 0.05 * t as f64;
                y[(r, t)] = 10.0 + g * (0..3).map(|k| beta[k] * x[(r, k)]).sum::<f64>();
            }
        }
        let q = Matrix::from_vec(n, periods, vec![1.0; n * periods]).unwrap();
        PriceTable::new((0..n).map(|i| format!("{i:03}")).collect(), x, y, q, vec![true; n * periods]).unwrap()
    }

    #[test]
    fn fits_affine_prices_with_linear_trunk() {
        let table = linear_table(200, 3, 1);
        let val = linear_table(50, 3, 2);
        let cfg = TrainingConfig {
            epochs: 150,
            batch_size: 32,
            adam: super::super::AdamConfig {
                learning_rate: 0.01,
                ..Default::default()
            },
            ..Default::default()
        };
        let out = train_on_tables(&table, Some(&val), &NetworkConfig::new(vec![3, 4], Activation::Linear, 3), &cfg).unwrap();
        assert_eq!(out.curve.len(), 150);
        let (_, r2) = evaluate(&out.network, &val, 0.0, false).unwrap();
        assert!(r2.unwrap() > 0.99, "{r2:?}");
    }

    #[test]
    fn deterministic_across_runs_and_parallelism() {
        let table = linear_table(80, 2, 3);
        let cfg = TrainingConfig {
            epochs: 5,
            batch_size: 40,
            ..Default::default()
        };
        let nc = NetworkConfig::new(vec![3, 8, 4], Activation::Relu, 2);
        let a = train_on_tables(&table, None, &nc, &cfg).unwrap();
        let b = train_on_tables(&table, None, &nc, &TrainingConfig { parallel: true, ..cfg }).unwrap();
        assert_eq!(a.network, b.network);
        assert_eq!(a.curve, b.curve);
    }

    #[test]
    fn zero_epochs_returns_initial_network() {
        let table = linear_table(10, 2, 3);
        let cfg = TrainingConfig {
            epochs: 0,
            ..Default::default()
        };
        let out = train_on_tables(&table, None, &NetworkConfig::new(vec![3, 2], Activation::Relu, 2), &cfg).unwrap();
        assert_eq!(out.best_epoch, 0);
        assert!(out.curve.is_empty());
    }
}
