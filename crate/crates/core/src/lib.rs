//! Hedonic price models and quality-adjusted price indices.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the scalar for the common cases.

pub mod activation;
pub mod embeddings;
pub mod error;
pub mod features;
pub mod indices;
pub mod inference;
pub mod linalg;
pub mod market;
pub mod net;
pub mod scalar;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Panel = market::TransactionPanel<f64>;
pub type Panel32 = market::TransactionPanel<f32>;
pub type Embeddings = embeddings::EmbeddingMatrix<f64>;
pub type Embeddings32 = embeddings::EmbeddingMatrix<f32>;
pub type Network = net::HedonicNetwork<f64>;
pub type Network32 = net::HedonicNetwork<f32>;
pub type Features = net::FeatureTable<f64>;
pub type ValueEmbeddings = net::ValueEmbeddingTable<f64>;
pub type Fit = inference::OlsFit<f64>;
pub type Surface = indices::HedonicSurface<f64>;
pub type Series = indices::IndexSeries<f64>;
pub type Generated = synth::GeneratedPanel<f64>;
pub type Mat = linalg::Matrix<f64>;
