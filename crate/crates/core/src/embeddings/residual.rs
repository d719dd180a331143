use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Two-layer residual block `v ↦ v + σ¹(ω¹ σ⁰(ω⁰ v))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlockParams<T> {
    pub w0: Matrix<T>,
    pub w1: Matrix<T>,
    pub act0: Activation,
    pub act1: Activation,
}

pub fn residual_block_forward<T: Real>(params: &ResidualBlockParams<T>, v: &[T]) -> Result<Vec<T>> {
    let (w0, w1) = (&params.w0, &params.w1);
    if w0.cols() != v.len() || w1.cols() != w0.rows() || w1.rows() != v.len() {
        return Err(Error::Dimension(format!(
            "residual block {}x{} then {}x{} does not map a {}-vector to itself",
            w0.rows(),
            w0.cols(),
            w1.rows(),
            w1.cols(),
            v.len()
        )));
    }
    let hidden = params.act0.apply_all(&w0.matvec(v));
    let branch = params.act1.apply_all(&w1.matvec(&hidden));
    Ok(v.iter().zip(branch).map(|(&a, b)| a + b).collect())
}
