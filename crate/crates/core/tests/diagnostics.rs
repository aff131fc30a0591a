//! Diagnostics on simulated designs.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use randse::dgp::{self, gen_errors, ErrorProcessSpec};
use randse::diagnostics::{check_assumptions, martingale_check, score_decomposition};
use randse::linmodel::{fit_ols, Dataset};
use randse::rng;

#[test]
fn lambda_min_matches_dense_eigensolver() {
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let n = 200;
    let w = DMatrix::from_fn(n, 3, |_, j| if j == 0 { 1.0 } else { r.sample::<f64, _>(StandardNormal) });
    let d = DVector::from_fn(n, |_, _| r.random_range(0.0..1.0));
    let data = Dataset::new(DVector::zeros(n), d, w.clone()).unwrap();
    let report = check_assumptions(&data);
    assert!(report.flags.is_empty(), "{:?}", report.flags);

    // Jacobi rotations on n⁻¹WᵀW, independent of the library's solver
    let mut a = (w.transpose() * &w / n as f64).into_owned();
    for _ in 0..100 {
        for p in 0..3 {
            for q in p + 1..3 {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = 0.5 * (2.0 * a[(p, q)]).atan2(a[(q, q)] - a[(p, p)]);
                let (c, s) = (theta.cos(), theta.sin());
                let mut j = DMatrix::identity(3, 3);
                j[(p, p)] = c;
                j[(q, q)] = c;
                j[(p, q)] = s;
                j[(q, p)] = -s;
                a = j.transpose() * &a * &j;
            }
        }
    }
    let brute = a.diagonal().min();
    assert!((report.lambda_min_w - brute).abs() <= 0.2 * brute, "{} vs {brute}", report.lambda_min_w);
}

#[test]
fn martingale_statistics_rarely_flag_under_strong_exogeneity() {
    let spec = dgp::preset("strong-exog-ar1", Some(5000)).unwrap();
    let (mut flagged, mut total) = (0, 0);
    for seed in 0..200 {
        let draw = dgp::simulate(&spec, rng::derive(21, seed)).unwrap();
        let fit = fit_ols(&draw.dataset).unwrap();
        let stats = martingale_check(draw.dataset.d().as_slice(), fit.residuals.as_slice(), 10).unwrap();
        flagged += stats.iter().filter(|s| s.exceeds(3.0)).count();
        total += stats.len();
    }
    let rate = flagged as f64 / total as f64;
    assert!(rate <= 0.02, "false-flag rate {rate}");
}

#[test]
fn martingale_statistics_detect_serially_correlated_treatment() {
    let n = 2000;
    let mut hits = 0;
    for seed in 0..200 {
        let key = rng::derive(22, seed);
        let d = gen_errors(&ErrorProcessSpec::Ar1 { rho: 0.9, sigma: 1.0 }, n, &mut rng::stream(key, 1)).unwrap();
        let e = gen_errors(&ErrorProcessSpec::Ar1 { rho: 0.7, sigma: 1.0 }, n, &mut rng::stream(key, 2)).unwrap();
        let y: Vec<f64> = d.iter().zip(&e).map(|(d, e)| 1.0 + d + e).collect();
        let data = Dataset::new(DVector::from_vec(y), DVector::from_vec(d), DMatrix::from_element(n, 1, 1.0)).unwrap();
        let fit = fit_ols(&data).unwrap();
        let stats = martingale_check(data.d().as_slice(), fit.residuals.as_slice(), 1).unwrap();
        hits += stats[0].exceeds(3.0) as usize;
    }
    assert!(hits >= 100, "lag-1 flagged in {hits} of 200 seeds");
}

#[test]
fn score_terms_are_uncorrelated_under_iid_effects() {
    let spec = dgp::preset("hetero-iid-te", Some(500)).unwrap();
    let truth = spec.truth().unwrap();
    let mu_a = truth.mu_a.unwrap();
    let p = 0.2;
    let reps = 5000;
    let mut pairs = Vec::with_capacity(reps);
    for r in 0..reps as u64 {
        let draw = dgp::simulate(&spec, rng::derive(23, r)).unwrap();
        let d = draw.dataset.d();
        let tau_mean = spec.effect.mean();
        let a: Vec<Vec<f64>> = d.iter().map(|&di| vec![di - p, (di - p) * di]).collect();
        let e: Vec<Vec<f64>> = draw
            .baseline
            .iter()
            .zip(&draw.outcomes.tau)
            .map(|(b, t)| vec![*b, t - tau_mean])
            .collect();
        pairs.push(score_decomposition(&a, &e, &mu_a).unwrap());
    }
    let k = reps as f64;
    let (m1, m2) = pairs.iter().fold((0.0, 0.0), |acc, (a, b)| (acc.0 + a / k, acc.1 + b / k));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in &pairs {
        sxy += (a - m1) * (b - m2);
        sxx += (a - m1) * (a - m1);
        syy += (b - m2) * (b - m2);
    }
    let corr = sxy / (sxx * syy).sqrt();
    assert!(corr.abs() < 4.0 / k.sqrt(), "corr {corr}");
}
