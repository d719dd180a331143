//! Scaled dot-product multi-head self-attention (forward only).

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{softmax, Real};

/// Projections of one head: `X ω^Q`, `X ω^K`, `X ω^V`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionHead<T> {
    pub query: Matrix<T>,
    pub key: Matrix<T>,
    pub value: Matrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams<T> {
    pub heads: Vec<AttentionHead<T>>,
    /// `ω^O`: (Σ value widths) × output width
    pub output: Matrix<T>,
}

impl<T: Real> AttentionParams<T> {
    pub fn key_dim(&self, head: usize) -> usize {
        self.heads[head].query.cols()
    }

    fn validate(&self, input_dim: usize) -> Result<()> {
        if self.heads.is_empty() {
            return Err(Error::Dimension("attention needs at least one head".into()));
        }
        let mut concat = 0;
        for (i, h) in self.heads.iter().enumerate() {
            for (name, m) in [("query", &h.query), ("key", &h.key), ("value", &h.value)] {
                if m.rows() != input_dim {
                    return Err(Error::Dimension(format!(
                        "head {i} {name} projection has {} rows, input width is {input_dim}",
                        m.rows()
                    )));
                }
                if !m.is_finite() {
                    return Err(Error::NonFinite(format!("head {i} {name} projection")));
                }
            }
            if h.query.cols() != h.key.cols() || h.query.cols() == 0 {
                return Err(Error::Dimension(format!(
                    "head {i}: query width {} and key width {} must match and be positive",
                    h.query.cols(),
                    h.key.cols()
                )));
            }
            concat += h.value.cols();
        }
        if self.output.rows() != concat {
            return Err(Error::Dimension(format!(
                "output projection has {} rows, concatenated heads have width {concat}",
                self.output.rows()
            )));
        }
        Ok(())
    }
}

fn head_weights<T: Real>(head: &AttentionHead<T>, x: &Matrix<T>) -> Result<Matrix<T>> {
    let q = x.matmul(&head.query)?;
    let k = x.matmul(&head.key)?;
    let scale = T::of(head.query.cols() as f64).sqrt();
    let n = x.rows();
    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        let scores: Vec<T> = (0..n)
            .map(|j| crate::scalar::dot(q.row(i), k.row(j)) / scale)
            .collect();
        w.row_mut(i).copy_from_slice(&softmax(&scores));
    }
    Ok(w)
}

/// Row-stochastic attention matrices `softmax(Q̃K̃ᵀ/√d_k)`, one per head.
pub fn attention_weights<T: Real>(params: &AttentionParams<T>, x: &Matrix<T>) -> Result<Vec<Matrix<T>>> {
    if x.rows() == 0 {
        return Err(Error::Dimension("attention input has no rows".into()));
    }
    params.validate(x.cols())?;
    params.heads.iter().map(|h| head_weights(h, x)).collect()
}

/// `Concat(head_1, …, head_h) ω^O` with
/// `head_i = softmax(Xω^Q_i (Xω^K_i)ᵀ / √d_k) Xω^V_i`.
pub fn attention_forward<T: Real>(params: &AttentionParams<T>, x: &Matrix<T>) -> Result<Matrix<T>> {
    let weights = attention_weights(params, x)?;
    let n = x.rows();
    let concat_width = params.output.rows();
    let mut concat = Matrix::zeros(n, concat_width);
    let mut offset = 0;
    for (head, w) in params.heads.iter().zip(&weights) {
        let v = x.matmul(&head.value)?;
        let mixed = w.matmul(&v)?;
        for i in 0..n {
            concat.row_mut(i)[offset..offset + v.cols()].copy_from_slice(mixed.row(i));
        }
        offset += v.cols();
    }
    concat.matmul(&params.output)
}
