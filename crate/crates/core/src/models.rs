//! Posterior draw generators and likelihood evaluators for the experiment
//! models, plus closed-form marginal likelihoods and data simulators.
//!
//! * M1: `y ~ N(theta, 1)`, `theta ~ N(0, v0)`.
//! * M2: `y ~ N(0, theta)`, `theta ~ Scale-inv-chi2(nu0, tau0)`.
//! * Linear regression with independent Gaussian coefficient priors and an
//!   inverse-gamma noise variance, sampled by two-block Gibbs.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};
use crate::numeric::{normal_logpdf, LN_2PI};
use crate::rng::{label, stream};

/// Log-density of one observation and its first two derivatives in `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivs {
    pub log: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Sampling density `f(y | theta, x)` of a model, differentiable in `y`.
///
/// `x` carries per-observation covariates and is empty for models without
/// them.
pub trait Likelihood: Debug + Send + Sync {
    fn eval(&self, y: f64, theta: &[f64], x: &[f64]) -> Derivs;

    fn sample(&self, theta: &[f64], x: &[f64], rng: &mut dyn RngCore) -> f64;

    fn log_density(&self, y: f64, theta: &[f64], x: &[f64]) -> f64 {
        self.eval(y, theta, x).log
    }
}

/// `N(y; theta[0], var)` with known variance.
#[derive(Debug, Clone, Copy)]
pub struct NormalMean {
    pub var: f64,
}

impl Likelihood for NormalMean {
    fn eval(&self, y: f64, theta: &[f64], _x: &[f64]) -> Derivs {
        let mean = theta[0];
        Derivs {
            log: normal_logpdf(y, mean, self.var),
            d1: (mean - y) / self.var,
            d2: -1.0 / self.var,
        }
    }

    fn sample(&self, theta: &[f64], _x: &[f64], rng: &mut dyn RngCore) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        theta[0] + self.var.sqrt() * z
    }
}

/// `N(y; 0, theta[0])`.
#[derive(Debug, Clone, Copy)]
pub struct NormalVariance;

impl Likelihood for NormalVariance {
    fn eval(&self, y: f64, theta: &[f64], _x: &[f64]) -> Derivs {
        let var = theta[0];
        Derivs {
            log: normal_logpdf(y, 0.0, var),
            d1: -y / var,
            d2: -1.0 / var,
        }
    }

    fn sample(&self, theta: &[f64], _x: &[f64], rng: &mut dyn RngCore) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        theta[0].sqrt() * z
    }
}

/// `N(y; theta[0], theta[1])`, location and variance both carried by the draw.
#[derive(Debug, Clone, Copy)]
pub struct Gaussian;

impl Likelihood for Gaussian {
    fn eval(&self, y: f64, theta: &[f64], _x: &[f64]) -> Derivs {
        let (mean, var) = (theta[0], theta[1]);
        Derivs {
            log: normal_logpdf(y, mean, var),
            d1: (mean - y) / var,
            d2: -1.0 / var,
        }
    }

    fn sample(&self, theta: &[f64], _x: &[f64], rng: &mut dyn RngCore) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        theta[0] + theta[1].sqrt() * z
    }
}

/// `N(y; x . beta, sigma2)` with `theta = [beta..., sigma2]`.
#[derive(Debug, Clone, Copy)]
pub struct LinearGaussian;

impl LinearGaussian {
    fn mean(theta: &[f64], x: &[f64]) -> f64 {
        x.iter().zip(theta).map(|(a, b)| a * b).sum()
    }
}

impl Likelihood for LinearGaussian {
    fn eval(&self, y: f64, theta: &[f64], x: &[f64]) -> Derivs {
        let var = theta[theta.len() - 1];
        let mean = Self::mean(theta, x);
        Derivs {
            log: normal_logpdf(y, mean, var),
            d1: (mean - y) / var,
            d2: -1.0 / var,
        }
    }

    fn sample(&self, theta: &[f64], x: &[f64], rng: &mut dyn RngCore) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        Self::mean(theta, x) + theta[theta.len() - 1].sqrt() * z
    }
}

/// Posterior parameter draws for one model with its likelihood evaluator.
#[derive(Debug, Clone)]
pub struct Draws {
    pub model_id: String,
    pub params: Vec<Vec<f64>>,
    pub likelihood: Arc<dyn Likelihood>,
}

impl Draws {
    pub fn new(
        model_id: impl Into<String>,
        params: Vec<Vec<f64>>,
        likelihood: Arc<dyn Likelihood>,
    ) -> Result<Self> {
        if params.is_empty() {
            return Err(invalid("a model needs at least one draw"));
        }
        Ok(Self {
            model_id: model_id.into(),
            params,
            likelihood,
        })
    }

    /// A fixed Gaussian predictive `N(mean, var)` represented by one draw.
    pub fn gaussian(model_id: impl Into<String>, mean: f64, var: f64) -> Self {
        Self {
            model_id: model_id.into(),
            params: vec![vec![mean, var]],
            likelihood: Arc::new(Gaussian),
        }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Monte Carlo log predictive density `log(1/S sum_s f(y | theta_s))`.
    pub fn log_predictive(&self, y: f64, x: &[f64]) -> f64 {
        let lls: Vec<f64> = self
            .params
            .iter()
            .map(|t| self.likelihood.log_density(y, t, x))
            .collect();
        crate::numeric::log_mean_exp(&lls)
    }

    /// One predictive draw: uniform parameter draw, then `y | theta`.
    pub fn sample_predictive(&self, x: &[f64], rng: &mut dyn RngCore) -> f64 {
        let s = rng.random_range(0..self.params.len());
        self.likelihood.sample(&self.params[s], x, rng)
    }
}

/// Conjugate normal posterior of M1, `N(mean, var)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct M1Posterior {
    pub mean: f64,
    pub var: f64,
}

impl M1Posterior {
    pub fn from_data(data: &[f64], v0: f64) -> Result<Self> {
        if !(v0 > 0.0) {
            return Err(invalid(format!("v0 must be positive, got {v0}")));
        }
        if data.is_empty() {
            return Err(invalid("data must be non-empty"));
        }
        let var = 1.0 / (1.0 / v0 + data.len() as f64);
        Ok(Self {
            mean: var * data.iter().sum::<f64>(),
            var,
        })
    }

    /// Closed-form predictive `N(mean, 1 + var)` as `(mean, variance)`.
    pub fn predictive(&self) -> (f64, f64) {
        (self.mean, 1.0 + self.var)
    }

    pub fn draws<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> Draws {
        let sd = self.var.sqrt();
        let params = (0..s)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                vec![self.mean + sd * z]
            })
            .collect();
        Draws {
            model_id: "M1".into(),
            params,
            likelihood: Arc::new(NormalMean { var: 1.0 }),
        }
    }
}

pub fn m1_posterior<R: Rng + ?Sized>(data: &[f64], v0: f64, s: usize, rng: &mut R) -> Result<Draws> {
    if s == 0 {
        return Err(invalid("S must be at least 1"));
    }
    Ok(M1Posterior::from_data(data, v0)?.draws(s, rng))
}

/// Scaled-inverse-chi-squared posterior of M2 with `dof` degrees of freedom
/// and scale `scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct M2Posterior {
    pub dof: f64,
    pub scale: f64,
}

impl M2Posterior {
    pub fn from_data(data: &[f64], nu0: f64, tau0: f64) -> Result<Self> {
        if !(nu0 > 0.0 && tau0 > 0.0) {
            return Err(invalid(format!(
                "nu0 and tau0 must be positive, got ({nu0}, {tau0})"
            )));
        }
        if data.is_empty() {
            return Err(invalid("data must be non-empty"));
        }
        let dof = nu0 + data.len() as f64;
        let ss: f64 = data.iter().map(|y| y * y).sum();
        Ok(Self {
            dof,
            scale: (nu0 * tau0 + ss) / dof,
        })
    }

    /// `E[1 / theta] = 1 / scale`.
    pub fn mean_precision(&self) -> f64 {
        1.0 / self.scale
    }

    pub fn draws<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> Draws {
        let chi = ChiSquared::new(self.dof).expect("positive degrees of freedom");
        let params = (0..s)
            .map(|_| vec![self.dof * self.scale / chi.sample(rng)])
            .collect();
        Draws {
            model_id: "M2".into(),
            params,
            likelihood: Arc::new(NormalVariance),
        }
    }
}

pub fn m2_posterior<R: Rng + ?Sized>(
    data: &[f64],
    nu0: f64,
    tau0: f64,
    s: usize,
    rng: &mut R,
) -> Result<Draws> {
    if s == 0 {
        return Err(invalid("S must be at least 1"));
    }
    Ok(M2Posterior::from_data(data, nu0, tau0)?.draws(s, rng))
}

/// Log marginal likelihood of M1: `y ~ N(0, I + v0 J)`.
pub fn log_marginal_m1(data: &[f64], v0: f64) -> f64 {
    let n = data.len() as f64;
    let sum: f64 = data.iter().sum();
    let ss: f64 = data.iter().map(|y| y * y).sum();
    let quad = ss - v0 * sum * sum / (1.0 + n * v0);
    -0.5 * (n * LN_2PI + (n * v0).ln_1p() + quad)
}

/// Log marginal likelihood of M2 under the scaled-inverse-chi-squared prior.
pub fn log_marginal_m2(data: &[f64], nu0: f64, tau0: f64) -> f64 {
    let n = data.len() as f64;
    let ss: f64 = data.iter().map(|y| y * y).sum();
    let nun = nu0 + n;
    -0.5 * n * LN_2PI + ln_gamma(nun / 2.0) - ln_gamma(nu0 / 2.0)
        + 0.5 * nu0 * (0.5 * nu0 * tau0).ln()
        - 0.5 * nun * (0.5 * (nu0 * tau0 + ss)).ln()
}

/// Independent Gaussian coefficient priors and an inverse-gamma noise
/// variance prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionPrior {
    /// Prior standard deviation per coefficient (one per design column).
    pub coef_scales: Vec<f64>,
    pub noise_shape: f64,
    pub noise_scale: f64,
}

impl RegressionPrior {
    pub fn wide(p: usize) -> Self {
        Self {
            coef_scales: vec![10.0; p],
            noise_shape: 1.0,
            noise_scale: 1.0,
        }
    }
}

/// Two-block Gibbs sampler for Bayesian linear regression. Returns
/// `samples` post-warmup draws of `[beta..., sigma2]`.
pub fn regression_gibbs<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    y: &[f64],
    prior: &RegressionPrior,
    samples: usize,
    warmup: usize,
    rng: &mut R,
) -> Result<Draws> {
    let (n, p) = x.shape();
    if n == 0 || p == 0 {
        return Err(invalid("regression needs n > 0 and p >= 1"));
    }
    if y.len() != n || prior.coef_scales.len() != p {
        return Err(invalid("design, response and prior dimensions disagree"));
    }
    if samples == 0 {
        return Err(invalid("S must be at least 1"));
    }
    if prior.coef_scales.iter().any(|s| !(*s > 0.0))
        || !(prior.noise_shape > 0.0 && prior.noise_scale > 0.0)
    {
        return Err(invalid("prior scales must be positive"));
    }
    let yv = DVector::from_column_slice(y);
    let xtx = x.transpose() * x;
    let xty = x.transpose() * &yv;
    let prior_prec = DVector::from_iterator(p, prior.coef_scales.iter().map(|s| 1.0 / (s * s)));

    let mean_y = y.iter().sum::<f64>() / n as f64;
    let mut sigma2 = (y.iter().map(|v| (v - mean_y).powi(2)).sum::<f64>() / n as f64).max(1e-2);
    let mut params = Vec::with_capacity(samples);
    let shape = prior.noise_shape + 0.5 * n as f64;

    for it in 0..warmup + samples {
        let mut prec = &xtx / sigma2;
        for j in 0..p {
            prec[(j, j)] += prior_prec[j];
        }
        let chol = prec
            .cholesky()
            .expect("posterior precision is positive definite for positive prior precision");
        let mean = chol.solve(&(&xty / sigma2));
        let z = DVector::from_iterator(p, (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let offset = chol
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .expect("triangular factor is non-singular");
        let beta = mean + offset;

        let resid = &yv - x * &beta;
        let rate = prior.noise_scale + 0.5 * resid.norm_squared();
        let g = Gamma::new(shape, 1.0 / rate).expect("valid gamma parameters");
        sigma2 = 1.0 / g.sample(rng);

        if it >= warmup {
            let mut theta: Vec<f64> = beta.iter().copied().collect();
            theta.push(sigma2);
            params.push(theta);
        }
    }
    Draws::new("regression", params, Arc::new(LinearGaussian))
}

/// Data-generating configuration for the non-nested normal experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub mu_star: f64,
    pub v_star: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub replications: usize,
    pub seed: u64,
}

impl ScenarioConfig {
    /// The four reference scenarios, numbered 1 to 4.
    pub fn preset(id: u8) -> Result<Self> {
        let (mu_star, v_star) = match id {
            1 => (1.0, 1.0),
            2 => (0.0, 5.0),
            3 => (4.0, 3.0),
            4 => (0.0, 1.0),
            _ => return Err(invalid(format!("scenario must be 1..=4, got {id}"))),
        };
        Ok(Self {
            mu_star,
            v_star,
            n_train: 200,
            n_test: 50,
            replications: 100,
            seed: 20240101,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_star > 0.0) || !self.mu_star.is_finite() {
            return Err(invalid("scenario needs finite mu_star and v_star > 0"));
        }
        if self.n_train == 0 || self.n_test == 0 || self.replications == 0 {
            return Err(invalid("n_train, n_test and replications must be >= 1"));
        }
        Ok(())
    }
}

/// Simulate the `replication`-th train/test split of a scenario.
pub fn simulate_scenario(cfg: &ScenarioConfig, replication: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, &[replication, label::DATA]);
    let sd = cfg.v_star.sqrt();
    let mut draw = || cfg.mu_star + sd * rng.sample::<f64, _>(StandardNormal);
    let train = (0..cfg.n_train).map(|_| draw()).collect();
    let test = (0..cfg.n_test).map(|_| draw()).collect();
    Ok((train, test))
}
