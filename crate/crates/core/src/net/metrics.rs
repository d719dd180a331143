use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Per-period and pooled coefficients of determination. A period with fewer
/// than two observations or zero variance has `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct RSquared {
    pub per_period: Vec<Option<f64>>,
    pub pooled: Option<f64>,
}

/// `1 − SSR/SST` over observed cells of N×T matrices.
///
/// Per-period values are unweighted. The pooled value weights each cell by its
/// quantity (unit weights when `quantities` is `None`) and measures SST around
/// each period's own weighted mean, so a common price level shift across months
/// is not credited as explained variance.
pub fn r_squared<T: Real>(
    predicted: &Matrix<T>,
    actual: &Matrix<T>,
    observed: &[bool],
    quantities: Option<&Matrix<T>>,
) -> Result<RSquared> {
    let (n, periods) = (actual.rows(), actual.cols());
    if predicted.rows() != n
        || predicted.cols() != periods
        || observed.len() != n * periods
        || quantities.is_some_and(|q| q.rows() != n || q.cols() != periods)
    {
        return Err(Error::Dimension("r_squared inputs disagree in shape".into()));
    }
    let mut per_period = Vec::with_capacity(periods);
    let (mut ssr_pool, mut sst_pool) = (0.0, 0.0);
    for t in 0..periods {
        let rows: Vec<usize> = (0..n).filter(|&i| observed[i * periods + t]).collect();
        let y: Vec<f64> = rows.iter().map(|&i| actual[(i, t)].as_f64()).collect();
        let yhat: Vec<f64> = rows.iter().map(|&i| predicted[(i, t)].as_f64()).collect();
        let w: Vec<f64> = rows
            .iter()
            .map(|&i| quantities.map_or(1.0, |q| q[(i, t)].as_f64()))
            .collect();

        let mean = y.iter().sum::<f64>() / y.len().max(1) as f64;
        let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
        let ssr: f64 = y.iter().zip(&yhat).map(|(a, b)| (a - b).powi(2)).sum();
        per_period.push((y.len() >= 2 && sst > 0.0).then(|| 1.0 - ssr / sst));

        let wsum: f64 = w.iter().sum();
        if wsum > 0.0 {
            let wmean = y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / wsum;
            sst_pool += y.iter().zip(&w).map(|(a, b)| b * (a - wmean).powi(2)).sum::<f64>();
            ssr_pool += y
                .iter()
                .zip(&yhat)
                .zip(&w)
                .map(|((a, p), b)| b * (a - p).powi(2))
                .sum::<f64>();
        }
    }
    Ok(RSquared {
        per_period,
        pooled: (sst_pool > 0.0).then(|| 1.0 - ssr_pool / sst_pool),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Matrix<f64> {
        Matrix::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn perfect_mean_and_bad_predictors() {
        let y = col(&[1.0, 2.0, 3.0, 6.0]);
        let mask = vec![true; 4];
        let r = r_squared(&y, &y, &mask, None).unwrap();
        assert_eq!(r.per_period, vec![Some(1.0)]);
        assert_eq!(r.pooled, Some(1.0));
        let r = r_squared(&col(&[3.0; 4]), &y, &mask, None).unwrap();
        assert_eq!(r.per_period[0], Some(0.0));
        let r = r_squared(&col(&[6.0, 3.0, 2.0, 1.0]), &y, &mask, None).unwrap();
        assert!(r.per_period[0].unwrap() < 0.0);
    }

    #[test]
    fn zero_variance_is_undefined() {
        let y = col(&[2.0, 2.0]);
        let r = r_squared(&y, &y, &[true, true], None).unwrap();
        assert_eq!(r.per_period, vec![None]);
        assert_eq!(r.pooled, None);
    }

    #[test]
    fn masked_cells_are_ignored() {
        let y = col(&[1.0, 2.0, 3.0]);
        let p = col(&[1.0, 2.0, 100.0]);
        let r = r_squared(&p, &y, &[true, true, false], None).unwrap();
        assert_eq!(r.per_period, vec![Some(1.0)]);
    }

    #[test]
    fn pooled_uses_per_period_means() {
        // each period predicted by its own mean → pooled 0, not inflated by level shift
        let y = Matrix::from_rows(&[vec![1.0, 11.0], vec![3.0, 13.0]]).unwrap();
        let p = Matrix::from_rows(&[vec![2.0, 12.0], vec![2.0, 12.0]]).unwrap();
        let r = r_squared(&p, &y, &[true; 4], None).unwrap();
        assert_eq!(r.pooled, Some(0.0));
    }
}
