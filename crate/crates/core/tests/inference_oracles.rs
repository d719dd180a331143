//! OLS against an independent nalgebra solve, interval coverage by simulation,
//! and the worked interval examples.

use hedonic_core::inference::{
    hedonic_ci, median_aggregate, ols_fit, predictive_ci, pvalues_bonferroni, standard_error, CovarianceKind, OlsFit,
    OlsOptions, SplitResult,
};
use hedonic_core::linalg::Matrix;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn random_problem(rng: &mut ChaCha8Rng, n: usize, p: usize) -> (Matrix<f64>, Vec<f64>) {
    let x: Vec<f64> = (0..n * p).map(|_| rng.random_range(-2.0..2.0)).collect();
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
    (Matrix::from_vec(n, p, x).unwrap(), y)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

struct Oracle {
    theta: DVector<f64>,
    homoskedastic: DMatrix<f64>,
    hc1: DMatrix<f64>,
}

fn normal_equations(x: &Matrix<f64>, y: &[f64]) -> Oracle {
    let (n, p) = (x.rows(), x.cols());
    let xm = DMatrix::from_row_slice(n, p, x.as_slice());
    let yv = DVector::from_column_slice(y);
    let xtx_inv = (xm.transpose() * &xm).try_inverse().unwrap();
    let theta = &xtx_inv * xm.transpose() * &yv;
    let resid = &yv - &xm * &theta;
    let sigma2 = resid.norm_squared() / (n - p) as f64;
    let meat = xm.transpose() * DMatrix::from_diagonal(&resid.map(|e| e * e)) * &xm;
    let hc1 = &xtx_inv * meat * &xtx_inv * (n as f64 / (n - p) as f64);
    Oracle {
        theta,
        homoskedastic: xtx_inv * sigma2,
        hc1,
    }
}

#[test]
fn ols_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let p = rng.random_range(1..7);
        let n = rng.random_range(p + 2..60);
        let (x, y) = random_problem(&mut rng, n, p);
        let oracle = normal_equations(&x, &y);
        let plain = ols_fit(&x, &y, 0, &OlsOptions::default()).unwrap();
        let robust = ols_fit(
            &x,
            &y,
            0,
            &OlsOptions {
                covariance: CovarianceKind::Sandwich,
                ridge_fallback: None,
            },
        )
        .unwrap();
        let scale = oracle.theta.amax();
        for k in 0..p {
            assert!((plain.theta_hat[k] - oracle.theta[k]).abs() <= 1e-8 * scale);
            for j in 0..p {
                let cscale = oracle.homoskedastic.amax();
                assert!((plain.covariance[(k, j)] - oracle.homoskedastic[(k, j)]).abs() <= 1e-8 * cscale);
                let rscale = oracle.hc1.amax();
                assert!((robust.covariance[(k, j)] - oracle.hc1[(k, j)]).abs() <= 1e-8 * rscale);
            }
        }
    }
}

#[test]
fn ridge_fallback_is_flagged() {
    let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0], vec![4.0, 8.0]]).unwrap();
    let y = [1.0, 2.0, 3.0, 4.5];
    assert!(ols_fit(&x, &y, 0, &OlsOptions::default()).is_err());
    let fit = ols_fit(
        &x,
        &y,
        0,
        &OlsOptions {
            covariance: CovarianceKind::Homoskedastic,
            ridge_fallback: Some(1e-6),
        },
    )
    .unwrap();
    assert_eq!(fit.ridge, Some(1e-6));
}

fn fixed_fit(theta: Vec<f64>, cov: Vec<f64>) -> OlsFit<f64> {
    let p = theta.len();
    OlsFit {
        period: 0,
        theta_hat: theta,
        covariance: Matrix::from_vec(p, p, cov).unwrap(),
        residual_variance: 1.0,
        n_obs: 100,
        ridge: None,
    }
}

#[test]
fn worked_interval_examples() {
    let diag = fixed_fit(vec![0.0, 0.0], vec![4.0, 0.0, 0.0, 9.0]);
    assert!(rel(standard_error(&diag, &[1.0, 1.0]).unwrap(), 13f64.sqrt()) < 1e-14);
    assert_eq!(standard_error(&diag, &[0.0, 0.0]).unwrap(), 0.0);

    let unit = fixed_fit(vec![0.0], vec![1.0]);
    let ci = hedonic_ci(&unit, &[1.0], 0.05).unwrap();
    assert!((ci.upper - 1.959964).abs() < 1e-6);

    // Ĥ = 114.6 with SE = 0.05 at 90%
    let table = fixed_fit(vec![114.6], vec![0.05 * 0.05]);
    let ci = hedonic_ci(&table, &[1.0], 0.10).unwrap();
    let round = |v: f64| (v * 10.0).round() / 10.0;
    assert_eq!((round(ci.lower), round(ci.upper)), (114.5, 114.7));
    assert!((ci.level - 0.90).abs() < 1e-15);

    // ν̂ ≈ 7.295 widens the same centre to whole-currency bounds [102, 126]
    let nu: f64 = 12.0 / 1.6448536269514722;
    let pred = predictive_ci(&table, &[1.0], 0.10, nu * nu - 0.05 * 0.05).unwrap();
    assert!((pred.se - 7.295).abs() < 1e-3);
    assert_eq!((pred.lower.floor(), pred.upper.floor()), (102.0, 126.0));

    let degenerate = fixed_fit(vec![3.0], vec![0.0]);
    let ci = hedonic_ci(&degenerate, &[2.0], 0.1).unwrap();
    assert_eq!((ci.lower, ci.center, ci.upper), (6.0, 6.0, 6.0));
    let same = predictive_ci(&table, &[1.0], 0.1, 0.0).unwrap();
    let h = hedonic_ci(&table, &[1.0], 0.1).unwrap();
    assert!((same.lower - h.lower).abs() < 1e-12 && (same.upper - h.upper).abs() < 1e-12);
}

#[test]
fn zero_estimate_has_unit_p_value_and_196_is_five_percent() {
    let fit = fixed_fit(vec![0.0, 1.96], vec![1.0, 0.0, 0.0, 1.0]);
    let tests = pvalues_bonferroni(&fit, 0.05).unwrap();
    assert!((tests[0].p_value - 1.0).abs() < 1e-12);
    assert!((tests[1].p_value - 0.05).abs() < 1e-3);
    assert!(!tests[1].significant);
}

/// Share of 90% intervals for θ'v that cover the truth under homoskedastic
/// Gaussian noise.
fn coverage(replications: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, p) = (60, 3);
    let theta = [2.0, -1.0, 0.5];
    let (x, _) = random_problem(&mut rng, n, p);
    let v = [1.0, 0.5, -2.0];
    let truth: f64 = theta.iter().zip(&v).map(|(a, b)| a * b).sum();
    let mean = x.matvec(&theta);
    let mut hits = 0;
    for _ in 0..replications {
        let y: Vec<f64> = mean
            .iter()
            .map(|m| m + 1.5 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect();
        let fit = ols_fit(&x, &y, 0, &OlsOptions::default()).unwrap();
        let ci = hedonic_ci(&fit, &v, 0.10).unwrap();
        if ci.lower <= truth && truth <= ci.upper {
            hits += 1;
        }
    }
    hits as f64 / replications as f64
}

#[test]
fn ninety_percent_interval_covers_at_nominal_rate() {
    let c = coverage(2000, 11);
    assert!((c - 0.90).abs() <= 0.03, "coverage {c}");
}

fn split_results() -> impl Strategy<Value = Vec<SplitResult>> {
    (1usize..4, 1usize..6).prop_flat_map(|(cells, splits)| {
        prop::collection::vec(
            (
                prop::collection::vec(-5.0f64..5.0, cells),
                prop::collection::vec(0.0f64..2.0, cells),
                prop::collection::vec(0.0f64..1.0, 2),
            ),
            splits,
        )
        .prop_map(move |rows| {
            rows.into_iter()
                .map(|(est, half, p)| SplitResult {
                    cells: (0..cells).map(|i| (format!("g{i}"), 0)).collect(),
                    lower: est.iter().zip(&half).map(|(e, h)| e - h).collect(),
                    upper: est.iter().zip(&half).map(|(e, h)| e + h).collect(),
                    estimates: est,
                    p_values: p,
                })
                .collect()
        })
    })
}

proptest! {
    #[test]
    fn predictive_interval_contains_hedonic_interval(
        theta in prop::collection::vec(-50.0f64..50.0, 2),
        v in prop::collection::vec(-3.0f64..3.0, 2),
        var in 0.0f64..25.0,
        d in 0.01f64..4.0,
        alpha in 0.01f64..0.5,
    ) {
        let fit = fixed_fit(theta, vec![d, 0.0, 0.0, d]);
        let h = hedonic_ci(&fit, &v, alpha).unwrap();
        let s = predictive_ci(&fit, &v, alpha, var).unwrap();
        prop_assert!(s.lower <= h.lower + 1e-12 && s.upper >= h.upper - 1e-12);
        prop_assert!(h.lower <= h.center && h.center <= h.upper);
    }

    #[test]
    fn lowering_alpha_never_adds_significance(
        theta in prop::collection::vec(-5.0f64..5.0, 4),
        a in 1e-6f64..0.5,
        shrink in 0.01f64..1.0,
    ) {
        let fit = fixed_fit(theta, Matrix::<f64>::identity(4).as_slice().to_vec());
        let loose = pvalues_bonferroni(&fit, a).unwrap();
        let strict = pvalues_bonferroni(&fit, a * shrink).unwrap();
        for (l, s) in loose.iter().zip(&strict) {
            prop_assert!(!s.significant || l.significant);
        }
    }

    #[test]
    fn median_aggregate_ignores_split_order(results in split_results(), rot in 0usize..5) {
        let a = median_aggregate(&results, 0.1).unwrap();
        let mut shuffled = results.clone();
        let k = rot % shuffled.len();
        shuffled.rotate_left(k);
        shuffled.reverse();
        prop_assert_eq!(a, median_aggregate(&shuffled, 0.1).unwrap());
    }
}

#[test]
fn median_aggregate_examples() {
    let one = |e: f64, l: f64, u: f64| SplitResult {
        cells: vec![("g".into(), 0)],
        estimates: vec![e],
        lower: vec![l],
        upper: vec![u],
        p_values: vec![0.01],
    };
    let agg = median_aggregate(&[one(1.0, 0.0, 2.0), one(2.0, 1.0, 3.0), one(10.0, 2.0, 4.0)], 0.1).unwrap();
    assert_eq!(agg.medians, vec![2.0]);
    assert_eq!((agg.median_lower[0], agg.median_upper[0]), (1.0, 3.0));
    assert!((agg.adjusted_level - 0.95).abs() < 1e-15);
    let single = median_aggregate(&[one(1.5, 1.0, 2.0)], 0.1).unwrap();
    assert_eq!((single.medians[0], single.median_lower[0], single.median_upper[0]), (1.5, 1.0, 2.0));
}
