use super::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::scalar::{dot, Real};

/// Per-word weights used when averaging word vectors into a text embedding.
#[derive(Debug, Clone, Copy)]
pub enum SentenceWeights<'a> {
    Uniform,
    /// `λ_j ∝ 1 / freq_j`, rescaled to mean 1 over the text; indexed by token.
    InverseFrequency(&'a [u64]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceEmbedding<T> {
    pub vector: Vec<T>,
    pub word_count: usize,
    /// set when the text had no tokens and the vector is all zeros
    pub empty: bool,
}

/// `(1/J) Σ_j λ_j u_j` over the tokens of a text.
pub fn sentence_embedding<T: Real>(
    omega: &EmbeddingMatrix<T>,
    tokens: &[usize],
    weights: SentenceWeights<'_>,
) -> Result<SentenceEmbedding<T>> {
    let r = omega.dim();
    if tokens.is_empty() {
        return Ok(SentenceEmbedding {
            vector: vec![T::zero(); r],
            word_count: 0,
            empty: true,
        });
    }
    for &t in tokens {
        omega.check_index(t)?;
    }
    let lambdas: Vec<T> = match weights {
        SentenceWeights::Uniform => vec![T::one(); tokens.len()],
        SentenceWeights::InverseFrequency(freq) => {
            let raw: Vec<T> = tokens
                .iter()
                .map(|&t| T::one() / T::of(freq.get(t).copied().unwrap_or(1).max(1) as f64))
                .collect();
            let mean = raw.iter().copied().sum::<T>() / T::of(raw.len() as f64);
            raw.into_iter().map(|x| x / mean).collect()
        }
    };
    let mut v = vec![T::zero(); r];
    for (&t, &lam) in tokens.iter().zip(&lambdas) {
        for (acc, &u) in v.iter_mut().zip(omega.column(t)) {
            *acc += lam * u;
        }
    }
    let j = T::of(tokens.len() as f64);
    v.iter_mut().for_each(|x| *x /= j);
    Ok(SentenceEmbedding {
        vector: v,
        word_count: tokens.len(),
        empty: false,
    })
}

/// First `max_words` token embeddings stacked in order, zero-padded.
pub fn concat_embedding<T: Real>(
    omega: &EmbeddingMatrix<T>,
    tokens: &[usize],
    max_words: usize,
) -> Result<Vec<T>> {
    if max_words == 0 {
        return Err(Error::Precondition("max_words must be at least 1".into()));
    }
    let r = omega.dim();
    let mut out = vec![T::zero(); r * max_words];
    for (slot, &t) in tokens.iter().take(max_words).enumerate() {
        omega.check_index(t)?;
        out[slot * r..(slot + 1) * r].copy_from_slice(omega.column(t));
    }
    Ok(out)
}

/// `uᵀv / (‖u‖‖v‖)`, clamped to `[-1, 1]`.
pub fn cosine_similarity<T: Real>(u: &[T], v: &[T]) -> Result<T> {
    if u.len() != v.len() {
        return Err(Error::Dimension(format!("lengths {} and {}", u.len(), v.len())));
    }
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if !(nu > T::zero()) || !(nv > T::zero()) {
        return Err(Error::UndefinedSimilarity);
    }
    Ok((dot(u, v) / (nu * nv)).max(-T::one()).min(T::one()))
}
