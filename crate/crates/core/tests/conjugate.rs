mod common;

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use lockstack::models::{
    log_marginal_m1, log_marginal_m2, m1_posterior, m2_posterior, regression_gibbs, simulate_scenario,
    M1Posterior, M2Posterior, RegressionPrior, ScenarioConfig,
};
use nalgebra::DMatrix;

use common::{ks_critical_01, ks_statistic, normal_sample, rng};

#[test]
fn m1_draws_pass_ks_against_the_analytic_posterior() {
    let mut pass = 0;
    for seed in 0..20 {
        let data = normal_sample(200, 1.0, 1.0, seed);
        let post = M1Posterior::from_data(&data, 10.0).unwrap();
        let d = m1_posterior(&data, 10.0, 4000, &mut rng(100 + seed)).unwrap();
        let theta: Vec<f64> = d.params.iter().map(|p| p[0]).collect();
        let n = Normal::new(post.mean, post.var.sqrt()).unwrap();
        if ks_statistic(&theta, |x| n.cdf(x)) <= ks_critical_01(4000.0) {
            pass += 1;
        }
    }
    assert!(pass >= 18, "{pass}/20");
}

#[test]
fn m2_draws_pass_ks_against_the_analytic_posterior() {
    let mut pass = 0;
    for seed in 0..20 {
        let data = normal_sample(200, 0.0, 5f64.sqrt(), seed);
        let post = M2Posterior::from_data(&data, 0.1, 1.0).unwrap();
        let d = m2_posterior(&data, 0.1, 1.0, 4000, &mut rng(200 + seed)).unwrap();
        let theta: Vec<f64> = d.params.iter().map(|p| p[0]).collect();
        // theta = dof * scale / X with X ~ chi2(dof).
        let chi = ChiSquared::new(post.dof).unwrap();
        let cdf = |t: f64| 1.0 - chi.cdf(post.dof * post.scale / t);
        if ks_statistic(&theta, cdf) <= ks_critical_01(4000.0) {
            pass += 1;
        }
    }
    assert!(pass >= 18, "{pass}/20");
}

#[test]
fn posterior_examples() {
    let zeros = vec![0.0; 200];
    let m1 = M1Posterior::from_data(&zeros, 10.0).unwrap();
    assert_eq!(m1.mean, 0.0);
    assert!((m1.var - 1.0 / 200.1).abs() < 1e-15);
    let m2 = M2Posterior::from_data(&zeros, 0.1, 1.0).unwrap();
    assert!((m2.scale - 0.1 / 200.1).abs() < 1e-15);
    assert!(M1Posterior::from_data(&zeros, 0.0).is_err());
    assert!(M2Posterior::from_data(&zeros, 0.1, -1.0).is_err());
}

#[test]
fn marginal_m1_collapses_to_standard_normal() {
    let y = 0.7;
    let lm = log_marginal_m1(&[y], 1e-12);
    assert!((lm - lockstack::numeric::normal_logpdf(y, 0.0, 1.0)).abs() < 1e-9);
}

#[test]
fn marginal_is_sequential_predictive_product() {
    // log p(y_1..n) = sum_i log p(y_i | y_<i), with closed-form one-step
    // predictives: normal for M1, Student-t for M2.
    let data = normal_sample(30, 0.5, 1.3, 7);
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for i in 0..data.len() {
        let prev = &data[..i];
        let (mu, var) = if i == 0 {
            (0.0, 1.0 + 10.0)
        } else {
            M1Posterior::from_data(prev, 10.0).unwrap().predictive()
        };
        m1 += lockstack::numeric::normal_logpdf(data[i], mu, var);
        let (dof, scale) = if i == 0 {
            (0.1, 1.0)
        } else {
            let p = M2Posterior::from_data(prev, 0.1, 1.0).unwrap();
            (p.dof, p.scale)
        };
        m2 += lockstack::numeric::student_t_logpdf(data[i], 0.0, scale.sqrt(), dof);
    }
    assert!((log_marginal_m1(&data, 10.0) - m1).abs() < 1e-9);
    assert!((log_marginal_m2(&data, 0.1, 1.0) - m2).abs() < 1e-9);
}

#[test]
fn scenario_sample_mean_is_near_truth() {
    for id in 1..=4 {
        let cfg = ScenarioConfig::preset(id).unwrap();
        let (train, test) = simulate_scenario(&cfg, 0).unwrap();
        assert_eq!((train.len(), test.len()), (200, 50));
        let m = train.iter().sum::<f64>() / 200.0;
        assert!((m - cfg.mu_star).abs() < 4.0 * (cfg.v_star / 200.0).sqrt());
    }
}

#[test]
fn gibbs_recovers_known_coefficients() {
    let n = 400;
    let mut r = rng(9);
    let x = DMatrix::from_fn(n, 3, |_, j| if j == 0 { 1.0 } else { rand::Rng::sample::<f64, _>(&mut r, rand_distr::StandardNormal) });
    let noise = normal_sample(n, 0.0, 0.5, 10);
    let y: Vec<f64> = (0..n).map(|i| 1.0 + 2.0 * x[(i, 1)] - 1.0 * x[(i, 2)] + noise[i]).collect();
    let d = regression_gibbs(&x, &y, &RegressionPrior::wide(3), 2000, 200, &mut rng(11)).unwrap();
    let mean = |j: usize| d.params.iter().map(|p| p[j]).sum::<f64>() / d.len() as f64;
    assert!((mean(0) - 1.0).abs() < 0.1);
    assert!((mean(1) - 2.0).abs() < 0.1);
    assert!((mean(2) + 1.0).abs() < 0.1);
    assert!((mean(3) - 0.25).abs() < 0.05);
}
