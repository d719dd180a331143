use std::collections::BTreeMap;

use super::{DataSplit, FeatureTable, HedonicNetwork};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::market::ProductId;
use crate::scalar::Real;

/// Frozen last-hidden-layer vectors `V_i`, with the training split they came
/// from so hold-out inference can refuse to reuse training products.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueEmbeddingTable<T> {
    products: Vec<ProductId>,
    index: BTreeMap<ProductId, usize>,
    vectors: Matrix<T>,
    split_identity: String,
    train_products: Vec<ProductId>,
}

impl<T: Real> ValueEmbeddingTable<T> {
    pub fn products(&self) -> &[ProductId] {
        &self.products
    }

    pub fn len(&self) -> usize {
        self.products.len()
    }

    pub fn is_empty(&self) -> bool {
        self.products.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn get(&self, id: &str) -> Option<&[T]> {
        self.index.get(id).map(|&i| self.vectors.row(i))
    }

    pub fn vectors(&self) -> &Matrix<T> {
        &self.vectors
    }

    pub fn split_identity(&self) -> &str {
        &self.split_identity
    }

    pub fn is_training_product(&self, id: &str) -> bool {
        self.train_products.binary_search_by(|p| p.as_str().cmp(id)).is_ok()
    }
}

/// `V_i` for each requested product, with dropout off.
pub fn extract_value_embeddings<T: Real>(
    net: &HedonicNetwork<T>,
    features: &FeatureTable<T>,
    products: &[ProductId],
    split: &DataSplit,
) -> Result<ValueEmbeddingTable<T>> {
    let mut rows = BTreeMap::new();
    for id in products {
        let x = features
            .get(id)
            .ok_or_else(|| Error::UnknownProduct(id.clone()))?;
        rows.insert(id.clone(), net.value_embedding(x)?);
    }
    let products: Vec<ProductId> = rows.keys().cloned().collect();
    let dim = net.config().value_dim();
    let vectors = Matrix::from_vec(products.len(), dim, rows.into_values().flatten().collect())?;
    let index = products.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
    let mut train_products = split.train.clone();
    train_products.sort();
    Ok(ValueEmbeddingTable {
        products,
        index,
        vectors,
        split_identity: split.identity(),
        train_products,
    })
}
