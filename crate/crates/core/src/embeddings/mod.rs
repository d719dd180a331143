//! Word embeddings trained from the catalog corpus, sentence-level product
//! embeddings, and the attention / residual-block forward kernels.

mod attention;
mod io;
mod residual;
mod sentence;
mod vocab;
mod word2vec;

pub use attention::{attention_forward, attention_weights, AttentionHead, AttentionParams};
pub use io::{read_embeddings, write_embeddings, EMBEDDING_MAGIC};
pub use residual::{residual_block_forward, ResidualBlockParams};
pub use sentence::{
    concat_embedding, cosine_similarity, sentence_embedding, SentenceEmbedding, SentenceWeights,
};
pub use vocab::{tokenize, Vocabulary, UNK_INDEX, UNK_TOKEN};
pub use word2vec::{
    context_windows, mean_log_loss, train_word2vec, window_loss, window_loss_gradient,
    word_probabilities, word_probability, ContextWindow, Word2VecConfig, Word2VecModel,
};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// `r × d` dictionary of word vectors; column `j` is the embedding of token `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix<T> {
    dim: usize,
    vocab_size: usize,
    /// column-major: column j occupies `values[j*dim..(j+1)*dim]`
    values: Vec<T>,
    tokens: Vec<String>,
}

impl<T: Real> EmbeddingMatrix<T> {
    pub fn from_columns(
        dim: usize,
        vocab_size: usize,
        values: Vec<T>,
        tokens: Vec<String>,
    ) -> Result<Self> {
        if values.len() != dim * vocab_size {
            return Err(Error::Dimension(format!(
                "{} values for a {dim}x{vocab_size} embedding matrix",
                values.len()
            )));
        }
        if tokens.len() != vocab_size {
            return Err(Error::Dimension(format!(
                "{} tokens for vocabulary size {vocab_size}",
                tokens.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("embedding matrix".into()));
        }
        Ok(Self {
            dim,
            vocab_size,
            values,
            tokens,
        })
    }

    /// Matrix with placeholder token names `t0, t1, …`.
    pub fn unnamed(dim: usize, vocab_size: usize, values: Vec<T>) -> Result<Self> {
        let tokens = (0..vocab_size).map(|j| format!("t{j}")).collect();
        Self::from_columns(dim, vocab_size, values, tokens)
    }

    pub fn zeros(dim: usize, vocab_size: usize) -> Self {
        Self::unnamed(dim, vocab_size, vec![T::zero(); dim * vocab_size]).unwrap()
    }

    /// Embedding dimension `r`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Vocabulary size `d`.
    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn column(&self, j: usize) -> &[T] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub(crate) fn check_index(&self, j: usize) -> Result<()> {
        if j >= self.vocab_size {
            return Err(Error::Precondition(format!(
                "token index {j} out of range for vocabulary of {}",
                self.vocab_size
            )));
        }
        Ok(())
    }
}
