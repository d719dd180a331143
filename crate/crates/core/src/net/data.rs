use std::collections::BTreeMap;

use super::PriceTransform;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::market::{ProductId, TransactionPanel};
use crate::scalar::Real;

/// Product features `X = (W', I')'`: a text part and an image part.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    pub text: Vec<T>,
    pub image: Vec<T>,
}

impl<T: Real> FeatureVector<T> {
    pub fn combined(&self) -> Vec<T> {
        let mut x = self.text.clone();
        x.extend_from_slice(&self.image);
        x
    }
}

/// Combined feature vectors keyed by product id.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable<T> {
    index: BTreeMap<ProductId, usize>,
    products: Vec<ProductId>,
    matrix: Matrix<T>,
}

impl<T: Real> FeatureTable<T> {
    pub fn from_rows(rows: Vec<(ProductId, Vec<T>)>) -> Result<Self> {
        let width = rows.first().map_or(0, |r| r.1.len());
        let mut sorted = BTreeMap::new();
        for (id, x) in rows {
            if x.len() != width {
                return Err(Error::Dimension(format!(
                    "product {id}: {} features, expected {width}",
                    x.len()
                )));
            }
            if !x.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("features of product {id}")));
            }
            if sorted.insert(id.clone(), x).is_some() {
                return Err(Error::Validation(format!("duplicate features for product {id}")));
            }
        }
        let products: Vec<ProductId> = sorted.keys().cloned().collect();
        let data: Vec<T> = sorted.into_values().flatten().collect();
        let matrix = Matrix::from_vec(products.len(), width, data)?;
        let index = products.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
        Ok(Self {
            index,
            products,
            matrix,
        })
    }

    pub fn from_feature_vectors(rows: Vec<(ProductId, FeatureVector<T>)>) -> Result<Self> {
        Self::from_rows(rows.into_iter().map(|(id, f)| (id, f.combined())).collect())
    }

    pub fn width(&self) -> usize {
        self.matrix.cols()
    }

    pub fn len(&self) -> usize {
        self.products.len()
    }

    pub fn is_empty(&self) -> bool {
        self.products.is_empty()
    }

    pub fn products(&self) -> &[ProductId] {
        &self.products
    }

    pub fn get(&self, id: &str) -> Option<&[T]> {
        self.index.get(id).map(|&i| self.matrix.row(i))
    }
}

/// Training rows: features, per-period targets, quantities and an observation
/// mask. Masked cells hold zero targets and never enter the loss.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable<T> {
    pub products: Vec<ProductId>,
    pub features: Matrix<T>,
    pub targets: Matrix<T>,
    pub quantities: Matrix<T>,
    pub observed: Vec<bool>,
}

impl<T: Real> PriceTable<T> {
    pub fn new(
        products: Vec<ProductId>,
        features: Matrix<T>,
        targets: Matrix<T>,
        quantities: Matrix<T>,
        observed: Vec<bool>,
    ) -> Result<Self> {
        let n = products.len();
        if features.rows() != n
            || targets.rows() != n
            || quantities.rows() != n
            || targets.cols() != quantities.cols()
            || observed.len() != n * targets.cols()
        {
            return Err(Error::Dimension("price table parts disagree in shape".into()));
        }
        if quantities.as_slice().iter().any(|&q| q < T::zero()) {
            return Err(Error::Validation("negative quantity in price table".into()));
        }
        Ok(Self {
            products,
            features,
            targets,
            quantities,
            observed,
        })
    }

    /// Rows for `products` (in the given order). A cell is observed when the
    /// product sold and has a usable price; zero prices are dropped unless
    /// `include_zero_prices`, and always for the log transform.
    pub fn from_panel(
        panel: &TransactionPanel<T>,
        features: &FeatureTable<T>,
        products: &[ProductId],
        transform: PriceTransform,
        include_zero_prices: bool,
    ) -> Result<Self> {
        let periods = panel.n_periods();
        let width = features.width();
        let n = products.len();
        let mut x = Matrix::zeros(n, width);
        let mut y = Matrix::zeros(n, periods);
        let mut q = Matrix::zeros(n, periods);
        let mut observed = vec![false; n * periods];
        for (r, id) in products.iter().enumerate() {
            let f = features
                .get(id)
                .ok_or_else(|| Error::UnknownProduct(format!("no features for {id}")))?;
            x.row_mut(r).copy_from_slice(f);
            let Some(i) = panel.product_index(id) else {
                continue;
            };
            for t in 0..periods {
                let Some(price) = panel.price(i, t) else {
                    continue;
                };
                let usable = price > T::zero()
                    || (include_zero_prices && transform == PriceTransform::Identity);
                if !usable {
                    continue;
                }
                y[(r, t)] = match transform {
                    PriceTransform::Identity => price,
                    PriceTransform::Log => price.ln(),
                };
                q[(r, t)] = panel.quantity(i, t);
                observed[r * periods + t] = true;
            }
        }
        Self::new(products.to_vec(), x, y, q, observed)
    }

    pub fn len(&self) -> usize {
        self.products.len()
    }

    pub fn is_empty(&self) -> bool {
        self.products.is_empty()
    }

    pub fn periods(&self) -> usize {
        self.targets.cols()
    }

    #[inline]
    pub fn is_observed(&self, row: usize, t: usize) -> bool {
        self.observed[row * self.periods() + t]
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    pub fn observed_quantity(&self) -> T {
        let p = self.periods();
        (0..self.len())
            .flat_map(|r| (0..p).map(move |t| (r, t)))
            .filter(|&(r, t)| self.is_observed(r, t))
            .map(|(r, t)| self.quantities[(r, t)])
            .sum()
    }

    /// The single-period slice for period `t`: rows observed at `t`, one column.
    pub fn single_period(&self, t: usize) -> Result<Self> {
        let rows: Vec<usize> = (0..self.len()).filter(|&r| self.is_observed(r, t)).collect();
        let mut x = Matrix::zeros(rows.len(), self.features.cols());
        let mut y = Matrix::zeros(rows.len(), 1);
        let mut q = Matrix::zeros(rows.len(), 1);
        for (k, &r) in rows.iter().enumerate() {
            x.row_mut(k).copy_from_slice(self.features.row(r));
            y[(k, 0)] = self.targets[(r, t)];
            q[(k, 0)] = self.quantities[(r, t)];
        }
        Self::new(
            rows.iter().map(|&r| self.products[r].clone()).collect(),
            x,
            y,
            q,
            vec![true; rows.len()],
        )
    }

    /// Keeps rows with at least one observed cell.
    pub fn without_empty_rows(&self) -> Self {
        let p = self.periods();
        let keep: Vec<usize> = (0..self.len())
            .filter(|&r| (0..p).any(|t| self.is_observed(r, t)))
            .collect();
        let pick = |m: &Matrix<T>| {
            let data = keep.iter().flat_map(|&r| m.row(r).to_vec()).collect();
            Matrix::from_vec(keep.len(), m.cols(), data).unwrap()
        };
        Self {
            products: keep.iter().map(|&r| self.products[r].clone()).collect(),
            features: pick(&self.features),
            targets: pick(&self.targets),
            quantities: pick(&self.quantities),
            observed: keep
                .iter()
                .flat_map(|&r| self.observed[r * p..(r + 1) * p].to_vec())
                .collect(),
        }
    }
}
