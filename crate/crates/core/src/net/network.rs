use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{NetworkConfig, PriceTable, PriceTransform};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{dot, Real};

/// Rows per gradient shard; fixed so the reduction order never depends on the
/// number of threads.
const SHARD: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    /// out × in
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
}

/// Trunk parameters `η` and the period heads `θ_1..θ_T` (one row per period).
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams<T> {
    pub layers: Vec<DenseLayer<T>>,
    pub heads: Matrix<T>,
}

impl<T: Real> NetworkParams<T> {
    pub fn zeros(config: &NetworkConfig) -> Self {
        let layers = config
            .layer_widths
            .windows(2)
            .map(|w| DenseLayer {
                weights: Matrix::zeros(w[1], w[0]),
                bias: vec![T::zero(); w[1]],
            })
            .collect();
        Self {
            layers,
            heads: Matrix::zeros(config.periods, config.value_dim()),
        }
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.bias.len())
            .sum::<usize>()
            + self.heads.as_slice().len()
    }

    /// Layer weights and biases in order, then the heads.
    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out.extend_from_slice(self.heads.as_slice());
        out
    }

    pub fn assign_flat(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::Dimension(format!(
                "{} values for {} parameters",
                flat.len(),
                self.n_params()
            )));
        }
        let mut at = 0;
        let mut take = |dst: &mut [T]| {
            dst.copy_from_slice(&flat[at..at + dst.len()]);
            at += dst.len();
        };
        for l in &mut self.layers {
            take(l.weights.as_mut_slice());
            take(&mut l.bias);
        }
        take(self.heads.as_mut_slice());
        Ok(())
    }

    fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, &y) in a.weights.as_mut_slice().iter_mut().zip(b.weights.as_slice()) {
                *x += y;
            }
            for (x, &y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
        for (x, &y) in self.heads.as_mut_slice().iter_mut().zip(other.heads.as_slice()) {
            *x += y;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.is_finite() && l.bias.iter().all(|b| b.is_finite()))
            && self.heads.is_finite()
    }
}

/// Output of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward<T> {
    pub value_embedding: Vec<T>,
    /// `θ_tᵀ V` for every period, in the training target space
    pub prices: Vec<T>,
}

/// Network with its configuration, input standardization, and the price
/// transform its heads were trained in.
#[derive(Debug, Clone, PartialEq)]
pub struct HedonicNetwork<T> {
    config: NetworkConfig,
    params: NetworkParams<T>,
    input_shift: Vec<T>,
    input_scale: Vec<T>,
    price_transform: PriceTransform,
}

impl<T: Real> HedonicNetwork<T> {
    /// Seeded symmetric uniform fan-in initialization `U(−1/√fan_in, 1/√fan_in)`,
    /// zero biases.
    pub fn initialize(config: NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = NetworkParams::zeros(&config);
        for layer in &mut params.layers {
            let bound = 1.0 / (layer.weights.cols() as f64).sqrt();
            for w in layer.weights.as_mut_slice() {
                *w = T::of(rng.random_range(-bound..bound));
            }
        }
        let bound = 1.0 / (config.value_dim() as f64).sqrt();
        for w in params.heads.as_mut_slice() {
            *w = T::of(rng.random_range(-bound..bound));
        }
        let n = config.input_dim();
        Ok(Self {
            config,
            params,
            input_shift: vec![T::zero(); n],
            input_scale: vec![T::one(); n],
            price_transform: PriceTransform::Identity,
        })
    }

    pub fn from_parts(
        config: NetworkConfig,
        params: NetworkParams<T>,
        input_shift: Vec<T>,
        input_scale: Vec<T>,
        price_transform: PriceTransform,
    ) -> Result<Self> {
        config.validate()?;
        let shapes_ok = params.layers.len() == config.hidden_layers()
            && params
                .layers
                .iter()
                .zip(config.layer_widths.windows(2))
                .all(|(l, w)| l.weights.rows() == w[1] && l.weights.cols() == w[0] && l.bias.len() == w[1])
            && params.heads.rows() == config.periods
            && params.heads.cols() == config.value_dim()
            && input_shift.len() == config.input_dim()
            && input_scale.len() == config.input_dim();
        if !shapes_ok {
            return Err(Error::Dimension("parameters do not match the network config".into()));
        }
        if !params.is_finite() {
            return Err(Error::NonFinite("network parameters".into()));
        }
        if input_scale.iter().any(|&s| !(s > T::zero())) {
            return Err(Error::Validation("input scales must be positive".into()));
        }
        Ok(Self {
            config,
            params,
            input_shift,
            input_scale,
            price_transform,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn params(&self) -> &NetworkParams<T> {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut NetworkParams<T> {
        &mut self.params
    }

    pub fn input_shift(&self) -> &[T] {
        &self.input_shift
    }

    pub fn input_scale(&self) -> &[T] {
        &self.input_scale
    }

    pub fn price_transform(&self) -> PriceTransform {
        self.price_transform
    }

    pub(crate) fn set_input_normalization(&mut self, shift: Vec<T>, scale: Vec<T>) {
        self.input_shift = shift;
        self.input_scale = scale;
    }

    pub(crate) fn set_price_transform(&mut self, t: PriceTransform) {
        self.price_transform = t;
    }

    fn normalize(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .zip(&self.input_shift)
            .zip(&self.input_scale)
            .map(|((&v, &m), &s)| (v - m) / s)
            .collect()
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.config.input_dim() {
            return Err(Error::Dimension(format!(
                "input has {} features, network expects {}",
                x.len(),
                self.config.input_dim()
            )));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("network input".into()));
        }
        Ok(())
    }

    /// Pre-activations and activations of every hidden layer. `acts[0]` is the
    /// normalized input.
    fn trunk(&self, xn: Vec<T>, masks: Option<&[Vec<T>]>) -> (Vec<Vec<T>>, Vec<Vec<T>>) {
        let mut zs = Vec::with_capacity(self.params.layers.len());
        let mut acts = Vec::with_capacity(self.params.layers.len() + 1);
        acts.push(xn);
        for (l, layer) in self.params.layers.iter().enumerate() {
            let mut z = layer.weights.matvec(acts.last().unwrap());
            for (zi, &b) in z.iter_mut().zip(&layer.bias) {
                *zi += b;
            }
            let mut a = self.config.activations[l].apply_all(&z);
            if let Some(m) = masks {
                for (ai, &mi) in a.iter_mut().zip(&m[l]) {
                    *ai *= mi;
                }
            }
            zs.push(z);
            acts.push(a);
        }
        (zs, acts)
    }

    /// `V = g_m ∘ … ∘ g_1(x)` and `θ_tᵀ V` for all periods. Dropout is off.
    pub fn forward(&self, x: &[T]) -> Result<Forward<T>> {
        self.check_input(x)?;
        let (_, mut acts) = self.trunk(self.normalize(x), None);
        let v = acts.pop().unwrap();
        let prices = self.params.heads.matvec(&v);
        Ok(Forward {
            value_embedding: v,
            prices,
        })
    }

    pub fn value_embedding(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self.forward(x)?.value_embedding)
    }

    /// Hedonic prices in currency units (undoing the log transform if used).
    pub fn hedonic_prices(&self, x: &[T]) -> Result<Vec<T>> {
        let f = self.forward(x)?;
        Ok(match self.price_transform {
            PriceTransform::Identity => f.prices,
            PriceTransform::Log => f.prices.into_iter().map(T::exp).collect(),
        })
    }

    fn dropout_masks(&self, rng: &mut ChaCha8Rng) -> Option<Vec<Vec<T>>> {
        let rates = self.config.dropout.as_ref()?;
        Some(
            rates
                .iter()
                .zip(&self.config.layer_widths[1..])
                .map(|(&rate, &w)| {
                    let keep = T::of(1.0 / (1.0 - rate));
                    (0..w)
                        .map(|_| if rng.random::<f64>() < rate { T::zero() } else { keep })
                        .collect()
                })
                .collect(),
        )
    }

    /// Adds the gradient of one row's loss into `grad` and returns that loss.
    fn accumulate_row(
        &self,
        table: &PriceTable<T>,
        row: usize,
        lambda: T,
        masks: Option<&[Vec<T>]>,
        grad: &mut NetworkParams<T>,
    ) -> T {
        let (zs, acts) = self.trunk(self.normalize(table.features.row(row)), masks);
        let v = acts.last().unwrap();
        let heads = &self.params.heads;
        let periods = heads.rows();
        let h: Vec<T> = (0..periods).map(|t| dot(heads.row(t), v)).collect();

        let two = T::of(2.0);
        let mut loss = T::zero();
        let mut dh = vec![T::zero(); periods];
        for t in 0..periods {
            if table.is_observed(row, t) {
                let q = table.quantities[(row, t)];
                let e = h[t] - table.targets[(row, t)];
                loss += e * e * q;
                dh[t] += two * q * e;
            }
        }
        if lambda > T::zero() {
            for t in 0..periods.saturating_sub(1) {
                let diff = h[t + 1] - h[t];
                loss += lambda * diff.abs();
                // subgradient 0 at exact ties
                let s = if diff > T::zero() {
                    T::one()
                } else if diff < T::zero() {
                    -T::one()
                } else {
                    T::zero()
                };
                dh[t + 1] += lambda * s;
                dh[t] -= lambda * s;
            }
        }

        let mut dv = vec![T::zero(); v.len()];
        for (t, &g) in dh.iter().enumerate() {
            if g == T::zero() {
                continue;
            }
            for ((gh, dvk), (&vk, &th)) in grad
                .heads
                .row_mut(t)
                .iter_mut()
                .zip(dv.iter_mut())
                .zip(v.iter().zip(heads.row(t)))
            {
                *gh += g * vk;
                *dvk += g * th;
            }
        }

        let mut da = dv;
        for l in (0..self.params.layers.len()).rev() {
            if let Some(m) = masks {
                for (d, &mi) in da.iter_mut().zip(&m[l]) {
                    *d *= mi;
                }
            }
            let act = self.config.activations[l];
            let dz: Vec<T> = da
                .iter()
                .zip(&zs[l])
                .map(|(&d, &z)| d * act.derivative(z))
                .collect();
            let input = &acts[l];
            let gl = &mut grad.layers[l];
            for (r, &dzr) in dz.iter().enumerate() {
                if dzr == T::zero() {
                    continue;
                }
                gl.bias[r] += dzr;
                for (gw, &a) in gl.weights.row_mut(r).iter_mut().zip(input) {
                    *gw += dzr * a;
                }
            }
            if l > 0 {
                da = self.params.layers[l].weights.tr_matvec(&dz);
            }
        }
        loss
    }
}

fn check_table<T: Real>(net: &HedonicNetwork<T>, table: &PriceTable<T>, rows: &[usize]) -> Result<()> {
    if table.periods() != net.config.periods {
        return Err(Error::Dimension(format!(
            "table has {} periods, network has {}",
            table.periods(),
            net.config.periods
        )));
    }
    if table.features.cols() != net.config.input_dim() {
        return Err(Error::Dimension("table feature width does not match network".into()));
    }
    if rows.iter().any(|&r| r >= table.len()) {
        return Err(Error::Dimension("row index out of range".into()));
    }
    if !rows
        .iter()
        .any(|&r| (0..table.periods()).any(|t| table.is_observed(r, t)))
    {
        return Err(Error::DegenerateBatch);
    }
    Ok(())
}

/// `Σ_t Σ_i Q_it (P_it − θ_tᵀV_i)²` over observed cells plus
/// `λ Σ_i Σ_t |θ_{t+1}ᵀV_i − θ_tᵀV_i|`, over the given rows.
pub fn loss<T: Real>(net: &HedonicNetwork<T>, table: &PriceTable<T>, rows: &[usize], lambda: T) -> Result<T> {
    check_table(net, table, rows)?;
    let mut total = T::zero();
    for &r in rows {
        let f = net.forward(table.features.row(r))?;
        for (t, &h) in f.prices.iter().enumerate() {
            if table.is_observed(r, t) {
                let e = table.targets[(r, t)] - h;
                total += e * e * table.quantities[(r, t)];
            }
        }
        for w in f.prices.windows(2) {
            total += lambda * (w[1] - w[0]).abs();
        }
    }
    Ok(total)
}

/// Loss and its gradient over `rows`. With `dropout_seed` set (and dropout
/// configured) each row draws its masks from a generator keyed by the seed and
/// the row, so sequential and parallel evaluation agree bit for bit.
pub fn loss_and_gradient<T: Real>(
    net: &HedonicNetwork<T>,
    table: &PriceTable<T>,
    rows: &[usize],
    lambda: T,
    parallel: bool,
    dropout_seed: Option<u64>,
) -> Result<(T, NetworkParams<T>)> {
    check_table(net, table, rows)?;
    let shard = |ids: &[usize]| {
        let mut g = NetworkParams::zeros(&net.config);
        let mut loss = T::zero();
        for &r in ids {
            let masks = dropout_seed.and_then(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s ^ (r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                net.dropout_masks(&mut rng)
            });
            loss += net.accumulate_row(table, r, lambda, masks.as_deref(), &mut g);
        }
        (loss, g)
    };
    let parts: Vec<(T, NetworkParams<T>)> = if parallel {
        rows.par_chunks(SHARD).map(shard).collect()
    } else {
        rows.chunks(SHARD).map(shard).collect()
    };
    let mut total = T::zero();
    let mut grad = NetworkParams::zeros(&net.config);
    for (l, g) in &parts {
        total += *l;
        grad.add_assign(g);
    }
    Ok((total, grad))
}
