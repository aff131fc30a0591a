//! Estimators against frozen dense reference values (see fixtures/*.py) and
//! against explicit matrix evaluations done here.

use nalgebra::{DMatrix, DVector};
use randse::linmodel::{fit_2sls, fit_first_stage, fit_ols, residualize_fwl, Dataset};
use randse::variance::{self, sandwich_dense, HcVariant};
use serde_json::Value;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn cases() -> Value {
    serde_json::from_str(include_str!("fixtures/small_cases.json")).unwrap()
}

fn vec_of(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn dataset(y: Vec<f64>, d: Vec<f64>, w2: Vec<f64>) -> Dataset {
    let n = y.len();
    let w = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { w2[i] });
    Dataset::new(DVector::from_vec(y), DVector::from_vec(d), w).unwrap()
}

#[test]
fn ols_n5_matches_normal_equations() {
    let c = &cases()["ols_n5"];
    let data = dataset(vec_of(&c["y"]), vec_of(&c["d"]), vec_of(&c["w2"]));
    let fit = fit_ols(&data).unwrap();
    for (a, b) in fit.theta_hat.iter().zip(vec_of(&c["theta"])) {
        assert!(rel(*a, b) < 1e-10, "{a} vs {b}");
    }
    assert!(rel(fit.s2, c["s2"].as_f64().unwrap()) < 1e-10);
    let hac = variance::var_hac_nw(&fit, &data, 1).unwrap().value;
    assert!(rel(hac, c["hac_1"].as_f64().unwrap()) < 1e-10);
}

#[test]
fn cluster_n6_matches_meat_matrix() {
    let c = &cases()["cluster_n6"];
    let data = dataset(vec_of(&c["y"]), vec_of(&c["d"]), vec_of(&c["w2"]));
    let ids: Vec<usize> = c["ids"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap() as usize).collect();
    let fit = fit_ols(&data).unwrap();
    let v = variance::var_cluster(&fit, &data, &ids, false).unwrap().value;
    assert!(rel(v, c["cluster"].as_f64().unwrap()) < 1e-10);
}

#[test]
fn first_stage_n6_matches_normal_equations() {
    let c = &cases()["first_stage_n6"];
    let d = vec_of(&c["d"]);
    let data = dataset(vec![0.0; 6], d, vec_of(&c["w2"])).with_instrument(DVector::from_vec(vec_of(&c["v"]))).unwrap();
    let fs = fit_first_stage(&data).unwrap();
    assert!(rel(fs.rho_hat, c["rho"].as_f64().unwrap()) < 1e-10);
    for (a, b) in fs.alpha_hat.iter().zip(vec_of(&c["alpha"])) {
        assert!(rel(*a, b) < 1e-10);
    }
}

#[test]
fn tsls_n8_matches_projection_formula() {
    let c = &cases()["tsls_n8"];
    let data = dataset(vec_of(&c["y"]), vec_of(&c["d"]), vec_of(&c["w2"]))
        .with_instrument(DVector::from_vec(vec_of(&c["v"])))
        .unwrap();
    let fit = fit_2sls(&data).unwrap();
    assert!(rel(fit.beta_2sls, c["beta"].as_f64().unwrap()) < 1e-9);
    for (a, b) in fit.gamma_2sls.iter().zip(vec_of(&c["gamma"])) {
        assert!(rel(*a, b) < 1e-9);
    }
    assert!(rel(fit.rho_hat, c["rho"].as_f64().unwrap()) < 1e-10);
    assert!(rel(fit.s2, c["s2"].as_f64().unwrap()) < 1e-9);
    assert_eq!(fit.sigma2_v_hat, c["sigma2_v"].as_f64().unwrap());
    // scalar arithmetic on the fitted pieces
    let direct = fit.s2 / (fit.rho_hat * fit.rho_hat * fit.sigma2_v_hat * 8.0);
    assert!(rel(variance::var_2sls(&fit).value, direct) < 1e-12);
    assert!(rel(variance::var_2sls(&fit).value, c["var"].as_f64().unwrap()) < 1e-9);
}

fn random_dataset(seed: u64, n: usize, k: usize) -> Dataset {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let w = DMatrix::from_fn(n, k, |_, j| if j == 0 { 1.0 } else { rng.random_range(-1.0..1.0) });
    let d = DVector::from_fn(n, |_, _| rng.random_range(-1.0..2.0));
    let y = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
    Dataset::new(y, d, w).unwrap()
}

#[test]
fn sandwich_estimators_match_dense_meat() {
    for seed in 0..5 {
        let data = random_dataset(seed, 11, 3);
        let x = data.design();
        let fit = fit_ols(&data).unwrap();
        let e = &fit.residuals;
        let n = data.n();
        let hc0 = sandwich_dense(&x, &DMatrix::from_diagonal(&e.component_mul(e))).unwrap();
        assert!(rel(variance::var_hc(&fit, &data, HcVariant::HC0).unwrap().value, hc0) < 1e-10);
        let ids: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let omega = DMatrix::from_fn(n, n, |i, j| if ids[i] == ids[j] { e[i] * e[j] } else { 0.0 });
        assert!(rel(variance::var_cluster(&fit, &data, &ids, false).unwrap().value, sandwich_dense(&x, &omega).unwrap()) < 1e-10);
        let omega = DMatrix::from_fn(n, n, |i, j| {
            let h = i.abs_diff(j) as f64;
            if h <= 2.0 {
                (1.0 - h / 3.0) * e[i] * e[j]
            } else {
                0.0
            }
        });
        assert!(rel(variance::var_hac_nw(&fit, &data, 2).unwrap().value, sandwich_dense(&x, &omega).unwrap()) < 1e-10);
        let classic = fit.s2 * (x.transpose() * &x).try_inverse().unwrap()[(0, 0)];
        assert!(rel(variance::var_classic(&fit).value, classic) < 1e-10);
    }
}

#[test]
fn fwl_and_top_left_agree() {
    for seed in 10..15 {
        let data = random_dataset(seed, 15, 4);
        let fit = fit_ols(&data).unwrap();
        let db = residualize_fwl(&data).unwrap();
        let slope = db.dot(data.y()) / db.dot(&db);
        assert!(rel(fit.beta_hat(), slope) < 1e-10);
        assert!(rel(fit.s2 * fit.xtx_inv[(0, 0)], fit.s2 / fit.dbreve_ss) < 1e-10);
        assert!(rel(fit.dbreve_ss, db.dot(&db)) < 1e-10);
    }
}

#[test]
fn tsls_with_v_equal_d_is_ols() {
    let data = random_dataset(3, 20, 1);
    let with_v = data.clone().with_instrument(data.d().clone()).unwrap();
    let ols = fit_ols(&data).unwrap();
    let iv = fit_2sls(&with_v).unwrap();
    assert!(rel(iv.beta_2sls, ols.beta_hat()) < 1e-10);
    assert!((iv.rho_hat - 1.0).abs() < 1e-12);
    // intercept-only controls: the V = D reduction of the variance holds too
    assert!(rel(variance::var_2sls(&iv).value, variance::var_classic(&ols).value) < 1e-10);
}

#[test]
fn fixture_csv_estimators() {
    let expected: Value = serde_json::from_str(include_str!("fixtures/tiny_expected.json")).unwrap();
    let data = Dataset::from_csv_path(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/tiny.csv")).unwrap();
    let fit = fit_ols(&data).unwrap();
    let ex = |k: &str| expected[k].as_f64().unwrap();
    let ids = data.group_ids().unwrap();
    assert!(rel(fit.beta_hat(), ex("beta_ols")) < 1e-10);
    assert!(rel(variance::var_classic(&fit).value, ex("classic")) < 1e-10);
    assert!(rel(variance::var_hc(&fit, &data, HcVariant::HC0).unwrap().value, ex("hc0")) < 1e-10);
    assert!(rel(variance::var_hc(&fit, &data, HcVariant::HC1).unwrap().value, ex("hc1")) < 1e-10);
    assert!(rel(variance::var_cluster(&fit, &data, ids, false).unwrap().value, ex("cluster")) < 1e-10);
    assert!(rel(variance::var_cluster(&fit, &data, ids, true).unwrap().value, ex("cluster_adj")) < 1e-10);
    for l in 0..=2 {
        let v = variance::var_hac_nw(&fit, &data, l).unwrap().value;
        assert!(rel(v, ex(&format!("hac_{l}"))) < 1e-10);
    }
    let iv = fit_2sls(&data).unwrap();
    assert!(rel(iv.beta_2sls, ex("beta_2sls")) < 1e-10);
    assert!(rel(variance::var_2sls(&iv).value, ex("tsls")) < 1e-10);
}
