//! Hold-out inference on frozen value embeddings: per-period OLS of prices on
//! `V`, standard errors, intervals for hedonic and sale prices, Bonferroni
//! significance, and median aggregation over repeated splits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, Matrix};
use crate::market::{ProductId, TransactionPanel};
use crate::net::ValueEmbeddingTable;
use crate::scalar::{median, Real};
use crate::stats::{normal_quantile, two_sided_p};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceKind {
    #[default]
    Homoskedastic,
    /// White heteroskedasticity-robust sandwich
    Sandwich,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct OlsOptions {
    #[serde(default)]
    pub covariance: CovarianceKind,
    /// penalty added to `V'V` when the design is rank deficient; `None` errors
    #[serde(default)]
    pub ridge_fallback: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit<T> {
    pub period: usize,
    pub theta_hat: Vec<T>,
    pub covariance: Matrix<T>,
    /// `σ̂² = SSR / (n − p)`
    pub residual_variance: T,
    pub n_obs: usize,
    /// set when the ridge fallback was used
    pub ridge: Option<f64>,
}

/// Relative pivot below which `V'V` is treated as singular.
const RANK_TOLERANCE: f64 = 1e-10;

/// OLS without intercept of `y` on the rows of `design`.
pub fn ols_fit<T: Real>(design: &Matrix<T>, y: &[T], period: usize, opts: &OlsOptions) -> Result<OlsFit<T>> {
    let (n, p) = (design.rows(), design.cols());
    if y.len() != n {
        return Err(Error::Dimension(format!("{n} design rows, {} responses", y.len())));
    }
    if n <= p {
        return Err(Error::InsufficientData(format!(
            "period {period}: {n} observations for {p} coefficients"
        )));
    }
    if !design.is_finite() || !y.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("regression data".into()));
    }
    let gram = design.gram();
    let well_conditioned = |g: &Matrix<T>| -> Option<Matrix<T>> {
        let l = g.cholesky().ok()?;
        let ok = (0..p).all(|j| {
            let d = g[(j, j)].as_f64();
            d > 0.0 && (l[(j, j)].as_f64().powi(2) / d) > RANK_TOLERANCE
        });
        ok.then_some(l)
    };
    let (chol, ridge) = match well_conditioned(&gram) {
        Some(l) => (l, None),
        None => match opts.ridge_fallback {
            Some(r) if r > 0.0 => {
                let mut g = gram.clone();
                for j in 0..p {
                    g[(j, j)] += T::of(r);
                }
                (g.cholesky()?, Some(r))
            }
            _ => {
                return Err(Error::SingularDesign(format!(
                    "period {period}: value-embedding design is rank deficient"
                )))
            }
        },
    };
    let xty = design.tr_matvec(y);
    let theta = cholesky_solve(&chol, &xty);
    let fitted = design.matvec(&theta);
    let resid: Vec<T> = y.iter().zip(&fitted).map(|(&a, &b)| a - b).collect();
    let ssr: T = resid.iter().map(|&e| e * e).sum();
    let sigma2 = ssr / T::of((n - p) as f64);

    let mut inv = Matrix::zeros(p, p);
    for j in 0..p {
        let mut e = vec![T::zero(); p];
        e[j] = T::one();
        let col = cholesky_solve(&chol, &e);
        for i in 0..p {
            inv[(i, j)] = col[i];
        }
    }
    let covariance = match opts.covariance {
        CovarianceKind::Homoskedastic => {
            let mut c = inv;
            for v in c.as_mut_slice() {
                *v *= sigma2;
            }
            c
        }
        CovarianceKind::Sandwich => {
            // (V'V)⁻¹ (Σ e_i² v_i v_iᵀ) (V'V)⁻¹ with the HC1 factor n/(n−p)
            let mut meat = Matrix::zeros(p, p);
            for (i, &e) in resid.iter().enumerate() {
                let row = design.row(i);
                let w = e * e;
                for a in 0..p {
                    for b in 0..p {
                        meat[(a, b)] += w * row[a] * row[b];
                    }
                }
            }
            let mut c = inv.matmul(&meat)?.matmul(&inv)?;
            let hc1 = T::of(n as f64 / (n - p) as f64);
            for v in c.as_mut_slice() {
                *v *= hc1;
            }
            c
        }
    };
    let mut covariance = covariance;
    for i in 0..p {
        for j in 0..i {
            let s = (covariance[(i, j)] + covariance[(j, i)]) / T::of(2.0);
            covariance[(i, j)] = s;
            covariance[(j, i)] = s;
        }
    }
    Ok(OlsFit {
        period,
        theta_hat: theta,
        covariance,
        residual_variance: sigma2,
        n_obs: n,
        ridge,
    })
}

/// The hold-out design for period `t`: embeddings and observed positive prices
/// of holdout products that transacted at `t`.
pub fn holdout_design<T: Real>(
    table: &ValueEmbeddingTable<T>,
    panel: &TransactionPanel<T>,
    t: usize,
    holdout: &[ProductId],
) -> Result<(Vec<ProductId>, Matrix<T>, Vec<T>)> {
    if t >= panel.n_periods() {
        return Err(Error::OutOfRange { t, lag: 0 });
    }
    if let Some(bad) = holdout.iter().find(|id| table.is_training_product(id)) {
        return Err(Error::Validation(format!(
            "holdout product {bad} was used to train the value embeddings"
        )));
    }
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    let mut y = Vec::new();
    let mut sorted: Vec<&ProductId> = holdout.iter().collect();
    sorted.sort();
    sorted.dedup();
    for id in sorted {
        let v = table.get(id).ok_or_else(|| Error::UnknownProduct(id.clone()))?;
        let Some(i) = panel.product_index(id) else { continue };
        match panel.price(i, t) {
            Some(price) if price > T::zero() => {
                ids.push(id.clone());
                rows.extend_from_slice(v);
                y.push(price);
            }
            _ => {}
        }
    }
    let design = Matrix::from_vec(ids.len(), table.dim(), rows)?;
    Ok((ids, design, y))
}

/// `θ̂_t = (V'V)⁻¹V'P` on the hold-out products transacting at `t`.
pub fn ols_on_embeddings<T: Real>(
    table: &ValueEmbeddingTable<T>,
    panel: &TransactionPanel<T>,
    t: usize,
    holdout: &[ProductId],
    opts: &OlsOptions,
) -> Result<OlsFit<T>> {
    let (_, design, y) = holdout_design(table, panel, t, holdout)?;
    ols_fit(&design, &y, t, opts)
}

/// `√(v' Cov v)`.
pub fn standard_error<T: Real>(fit: &OlsFit<T>, v: &[T]) -> Result<T> {
    if v.len() != fit.theta_hat.len() {
        return Err(Error::Dimension(format!(
            "vector of length {} for {} coefficients",
            v.len(),
            fit.theta_hat.len()
        )));
    }
    Ok(fit.covariance.quad_form(v).max(T::zero()).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalKind {
    HedonicPrice,
    SalePrice,
}

impl IntervalKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IntervalKind::HedonicPrice => "hedonic_price",
            IntervalKind::SalePrice => "sale_price",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval<T> {
    pub center: T,
    pub se: T,
    pub lower: T,
    pub upper: T,
    pub level: f64,
    pub kind: IntervalKind,
}

fn check_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Validation(format!("alpha {alpha} outside (0, 1)")));
    }
    normal_quantile(1.0 - alpha / 2.0)
}

/// `Ĥ ± Φ⁻¹(1 − α/2)·SE`, so a 90% interval uses `z_{.95}`.
pub fn hedonic_ci<T: Real>(fit: &OlsFit<T>, v: &[T], alpha: f64) -> Result<ConfidenceInterval<T>> {
    let z = T::of(check_alpha(alpha)?);
    let se = standard_error(fit, v)?;
    let center = crate::scalar::dot(&fit.theta_hat, v);
    Ok(ConfidenceInterval {
        center,
        se,
        lower: center - z * se,
        upper: center + z * se,
        level: 1.0 - alpha,
        kind: IntervalKind::HedonicPrice,
    })
}

/// Interval for the sale price: half-width `z·√(SE² + Var(P − H))`.
pub fn predictive_ci<T: Real>(
    fit: &OlsFit<T>,
    v: &[T],
    alpha: f64,
    price_residual_variance: T,
) -> Result<ConfidenceInterval<T>> {
    if !(price_residual_variance >= T::zero()) || !price_residual_variance.is_finite() {
        return Err(Error::Validation(format!(
            "price residual variance {price_residual_variance} must be finite and non-negative"
        )));
    }
    let z = T::of(check_alpha(alpha)?);
    let se = standard_error(fit, v)?;
    let nu = (se * se + price_residual_variance).sqrt();
    let center = crate::scalar::dot(&fit.theta_hat, v);
    Ok(ConfidenceInterval {
        center,
        se: nu,
        lower: center - z * nu,
        upper: center + z * nu,
        level: 1.0 - alpha,
        kind: IntervalKind::SalePrice,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTest<T> {
    pub index: usize,
    pub theta_hat: T,
    pub se: T,
    pub p_value: f64,
    pub significant: bool,
}

/// Two-sided normal p-values for `θ_k = 0`; significant iff `p ≤ α/p`.
pub fn pvalues_bonferroni<T: Real>(fit: &OlsFit<T>, alpha: f64) -> Result<Vec<CoefficientTest<T>>> {
    check_alpha(alpha)?;
    let p = fit.theta_hat.len();
    let threshold = alpha / p as f64;
    Ok((0..p)
        .map(|k| {
            let theta = fit.theta_hat[k];
            let se = fit.covariance[(k, k)].max(T::zero()).sqrt();
            let p_value = if se > T::zero() {
                two_sided_p((theta / se).as_f64())
            } else if theta == T::zero() {
                1.0
            } else {
                0.0
            };
            CoefficientTest {
                index: k,
                theta_hat: theta,
                se,
                p_value,
                significant: p_value <= threshold,
            }
        })
        .collect())
}

/// Per-split results on a shared grid of (product, period) cells and a shared
/// list of tested functionals.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    pub cells: Vec<(ProductId, usize)>,
    pub estimates: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub p_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitAggregate {
    pub splits: usize,
    pub cells: Vec<(ProductId, usize)>,
    pub medians: Vec<f64>,
    pub median_lower: Vec<f64>,
    pub median_upper: Vec<f64>,
    pub median_p: Vec<f64>,
    /// median p ≤ α/2
    pub significant: Vec<bool>,
    /// nominal level of the aggregated intervals, `1 − α/2`
    pub adjusted_level: f64,
}

/// Entrywise medians across splits; p-values are aggregated by their median
/// and compared with `α/2`.
pub fn median_aggregate(per_split: &[SplitResult], alpha: f64) -> Result<SplitAggregate> {
    check_alpha(alpha)?;
    let first = per_split
        .first()
        .ok_or_else(|| Error::InsufficientData("no splits to aggregate".into()))?;
    for (s, r) in per_split.iter().enumerate() {
        let n = r.cells.len();
        if r.cells != first.cells
            || r.estimates.len() != n
            || r.lower.len() != n
            || r.upper.len() != n
            || r.p_values.len() != first.p_values.len()
        {
            return Err(Error::Alignment(format!("split {s} does not share the grid of split 0")));
        }
    }
    let med = |f: &dyn Fn(&SplitResult) -> &Vec<f64>, k: usize| {
        median(&per_split.iter().map(|r| f(r)[k]).collect::<Vec<_>>())
    };
    let n = first.cells.len();
    let medians: Vec<f64> = (0..n).map(|k| med(&|r| &r.estimates, k)).collect();
    let median_lower: Vec<f64> = (0..n).map(|k| med(&|r| &r.lower, k)).collect();
    let median_upper: Vec<f64> = (0..n).map(|k| med(&|r| &r.upper, k)).collect();
    let median_p: Vec<f64> = (0..first.p_values.len()).map(|k| med(&|r| &r.p_values, k)).collect();
    Ok(SplitAggregate {
        splits: per_split.len(),
        cells: first.cells.clone(),
        significant: median_p.iter().map(|&p| p <= alpha / 2.0).collect(),
        medians,
        median_lower,
        median_upper,
        median_p,
        adjusted_level: 1.0 - alpha / 2.0,
    })
}
