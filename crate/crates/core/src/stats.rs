//! Normal-distribution helpers and a rank-sum test.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

fn standard_normal() -> Normal {
    Normal::standard()
}

/// `Φ⁻¹(p)` for `p ∈ (0, 1)`.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Validation(format!("quantile level {p} outside (0, 1)")));
    }
    Ok(standard_normal().inverse_cdf(p))
}

pub fn normal_cdf(z: f64) -> f64 {
    standard_normal().cdf(z)
}

/// `2(1 − Φ(|z|))`.
pub fn two_sided_p(z: f64) -> f64 {
    (2.0 * standard_normal().sf(z.abs())).min(1.0)
}

/// Mann–Whitney rank-sum test of `a` stochastically larger than `b`, normal
/// approximation with tie correction. Returns `(U_a, one-sided p)`.
pub fn rank_sum_greater(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData("rank-sum test needs two non-empty samples".into()));
    }
    let mut all: Vec<(f64, bool)> = a.iter().map(|&v| (v, true)).chain(b.iter().map(|&v| (v, false))).collect();
    if all.iter().any(|v| !v.0.is_finite()) {
        return Err(Error::NonFinite("rank-sum sample".into()));
    }
    all.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let n = all.len();
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let mut rank_a = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        let size = (j - i + 1) as f64;
        tie_term += size.powi(3) - size;
        rank_a += all[i..=j].iter().filter(|v| v.1).count() as f64 * avg;
        i = j + 1;
    }
    let u = rank_a - n1 * (n1 + 1.0) / 2.0;
    let total = n as f64;
    let var = n1 * n2 / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
    if !(var > 0.0) {
        return Ok((u, 0.5));
    }
    let z = (u - n1 * n2 / 2.0) / var.sqrt();
    Ok((u, standard_normal().sf(z)))
}
