//! CBOW-style word embeddings with a full softmax over the vocabulary and tied
//! input/output parameters: the logit of token `t` given a context is
//! `u_tᵀ ū` where `ū` is the plain average of the context embeddings.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EmbeddingMatrix, Vocabulary};
use crate::error::{Error, Result};
use crate::net::{adam_step, AdamConfig, AdamState};
use crate::scalar::{dot, softmax, Real};

/// Windows per gradient shard; fixed so results do not depend on thread count.
const SHARD: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Word2VecConfig {
    /// embedding dimension r
    pub dim: usize,
    /// number of context words K (even; K/2 on each side of the center)
    pub window: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// shard gradients across threads; results are identical either way
    pub parallel: bool,
    /// optional cap on the number of training windows (seeded subsample)
    pub max_windows: Option<usize>,
}

impl Default for Word2VecConfig {
    fn default() -> Self {
        Self {
            dim: 24,
            window: 4,
            epochs: 5,
            learning_rate: 0.01,
            batch_size: 64,
            seed: 7,
            parallel: false,
            max_windows: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextWindow {
    pub center: usize,
    pub context: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Word2VecModel<T> {
    pub embeddings: EmbeddingMatrix<T>,
    /// mean negative log-likelihood per window, one entry per epoch
    pub epoch_losses: Vec<T>,
}

/// Every full subsentence of `window + 1` tokens: `window/2` words on each side
/// of the center. Windows never cross sentence boundaries.
pub fn context_windows(corpus: &[Vec<usize>], window: usize) -> Result<Vec<ContextWindow>> {
    if window < 2 || window % 2 != 0 {
        return Err(Error::Precondition(format!(
            "window must be an even number >= 2, got {window}"
        )));
    }
    let half = window / 2;
    let mut out = Vec::new();
    for sentence in corpus {
        if sentence.len() < window + 1 {
            continue;
        }
        for c in half..sentence.len() - half {
            let mut context = Vec::with_capacity(window);
            context.extend_from_slice(&sentence[c - half..c]);
            context.extend_from_slice(&sentence[c + 1..=c + half]);
            out.push(ContextWindow {
                center: sentence[c],
                context,
            });
        }
    }
    if out.is_empty() {
        return Err(Error::NoTrainingExamples(format!(
            "no sentence has at least {} tokens",
            window + 1
        )));
    }
    Ok(out)
}

fn context_mean<T: Real>(omega: &EmbeddingMatrix<T>, context: &[usize]) -> Result<Vec<T>> {
    if context.is_empty() {
        return Err(Error::Precondition("empty context".into()));
    }
    let mut mean = vec![T::zero(); omega.dim()];
    for &o in context {
        omega.check_index(o)?;
        for (m, &u) in mean.iter_mut().zip(omega.column(o)) {
            *m += u;
        }
    }
    let k = T::of(context.len() as f64);
    mean.iter_mut().for_each(|m| *m /= k);
    Ok(mean)
}

fn logits<T: Real>(omega: &EmbeddingMatrix<T>, mean: &[T]) -> Vec<T> {
    (0..omega.vocab_size())
        .map(|t| dot(omega.column(t), mean))
        .collect()
}

/// Probability of every vocabulary token as the center word given `context`.
pub fn word_probabilities<T: Real>(omega: &EmbeddingMatrix<T>, context: &[usize]) -> Result<Vec<T>> {
    let mean = context_mean(omega, context)?;
    Ok(softmax(&logits(omega, &mean)))
}

pub fn word_probability<T: Real>(
    omega: &EmbeddingMatrix<T>,
    context: &[usize],
    target: usize,
) -> Result<T> {
    omega.check_index(target)?;
    Ok(word_probabilities(omega, context)?[target])
}

/// `−log p(center | context)`.
pub fn window_loss<T: Real>(omega: &EmbeddingMatrix<T>, context: &[usize], center: usize) -> Result<T> {
    omega.check_index(center)?;
    let mean = context_mean(omega, context)?;
    Ok(neg_log_softmax(&logits(omega, &mean), center))
}

fn neg_log_softmax<T: Real>(z: &[T], target: usize) -> T {
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = max + z.iter().map(|&x| (x - max).exp()).sum::<T>().ln();
    lse - z[target]
}

/// Adds `∂(−log p(center | context)) / ∂ω` into `grad` (column-major, same
/// layout as the matrix) and returns the loss. Both roles of each column are
/// differentiated: as an output logit vector and as a context input.
pub fn window_loss_gradient<T: Real>(
    omega: &EmbeddingMatrix<T>,
    context: &[usize],
    center: usize,
    grad: &mut [T],
) -> Result<T> {
    omega.check_index(center)?;
    let r = omega.dim();
    let mean = context_mean(omega, context)?;
    let z = logits(omega, &mean);
    let loss = neg_log_softmax(&z, center);
    let mut delta = softmax(&z);
    delta[center] -= T::one();

    let mut d_mean = vec![T::zero(); r];
    for (t, &dt) in delta.iter().enumerate() {
        let col = omega.column(t);
        let g = &mut grad[t * r..(t + 1) * r];
        for k in 0..r {
            g[k] += dt * mean[k];
            d_mean[k] += dt * col[k];
        }
    }
    let inv_k = T::one() / T::of(context.len() as f64);
    for &o in context {
        let g = &mut grad[o * r..(o + 1) * r];
        for k in 0..r {
            g[k] += d_mean[k] * inv_k;
        }
    }
    Ok(loss)
}

pub fn mean_log_loss<T: Real>(omega: &EmbeddingMatrix<T>, windows: &[ContextWindow]) -> Result<T> {
    let mut total = T::zero();
    for w in windows {
        total += window_loss(omega, &w.context, w.center)?;
    }
    Ok(total / T::of(windows.len().max(1) as f64))
}

fn batch_gradient<T: Real>(
    omega: &EmbeddingMatrix<T>,
    windows: &[ContextWindow],
    batch: &[usize],
    parallel: bool,
) -> Result<(T, Vec<T>)> {
    let n = omega.values().len();
    let shard = |ids: &[usize]| -> Result<(T, Vec<T>)> {
        let mut g = vec![T::zero(); n];
        let mut loss = T::zero();
        for &w in ids {
            loss += window_loss_gradient(omega, &windows[w].context, windows[w].center, &mut g)?;
        }
        Ok((loss, g))
    };
    let parts: Vec<Result<(T, Vec<T>)>> = if parallel {
        batch.par_chunks(SHARD).map(shard).collect()
    } else {
        batch.chunks(SHARD).map(shard).collect()
    };
    let mut loss = T::zero();
    let mut grad = vec![T::zero(); n];
    for part in parts {
        let (l, g) = part?;
        loss += l;
        grad.iter_mut().zip(&g).for_each(|(a, &b)| *a += b);
    }
    Ok((loss, grad))
}

/// Maximizes the CBOW quasi-likelihood `Σ_s log p_s(center | context)` over all
/// windows of the corpus with minibatch Adam.
pub fn train_word2vec<T: Real>(
    corpus: &[Vec<usize>],
    vocab: &Vocabulary,
    config: &Word2VecConfig,
) -> Result<Word2VecModel<T>> {
    if config.dim == 0 || config.batch_size == 0 {
        return Err(Error::Precondition("dim and batch_size must be positive".into()));
    }
    let d = vocab.len();
    if d < 2 {
        return Err(Error::Precondition("vocabulary needs at least 2 tokens".into()));
    }
    let mut windows = context_windows(corpus, config.window)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    if let Some(max) = config.max_windows {
        if windows.len() > max {
            windows.shuffle(&mut rng);
            windows.truncate(max);
        }
    }
    let r = config.dim;
    let scale = 0.5 / (r as f64).sqrt();
    let init = (0..r * d)
        .map(|_| T::of(rng.random_range(-scale..scale)))
        .collect();
    let mut omega = EmbeddingMatrix::from_columns(r, d, init, vocab.tokens().to_vec())?;
    let adam = AdamConfig {
        learning_rate: config.learning_rate,
        ..AdamConfig::default()
    };
    let mut state = AdamState::new(r * d);
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = T::zero();
        for batch in order.chunks(config.batch_size) {
            let (loss, mut grad) = batch_gradient(&omega, &windows, batch, config.parallel)?;
            let inv = T::one() / T::of(batch.len() as f64);
            grad.iter_mut().for_each(|g| *g *= inv);
            adam_step(&mut state, omega.values_mut(), &grad, &adam).map_err(|e| match e {
                Error::TrainingDiverged { message, .. } => Error::TrainingDiverged { epoch, message },
                other => other,
            })?;
            total += loss;
        }
        let mean = total / T::of(windows.len() as f64);
        if !mean.is_finite() {
            return Err(Error::TrainingDiverged {
                epoch,
                message: "non-finite word2vec loss".into(),
            });
        }
        epoch_losses.push(mean);
    }
    Ok(Word2VecModel {
        embeddings: omega,
        epoch_losses,
    })
}
