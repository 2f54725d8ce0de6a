//! Experiment runners: the non-nested normal study, the regression
//! overfitting study, the pooling-operator demo and locked sampling.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    bma_weights, hyva_select, loo_elpd, loo_select, ml_select, stacking_weights, LooSummary, Method, MethodReport,
    TestEvaluator,
};
use crate::error::{invalid, Result};
use crate::grid::{locking_grid, mixture_grid, superposition_grid, GridDensity, DEFAULT_GRID_SIZE};
use crate::models::{
    log_marginal_m1, log_marginal_m2, m1_posterior, m2_posterior, regression_gibbs, simulate_scenario, Draws,
    RegressionPrior, ScenarioConfig,
};
use crate::numeric::{mean, normal_logpdf, student_t_logpdf, variance};
use crate::optimizer::{fit_locking, fit_quacking, FitResult, LockingOptions, QuackingOptions};
use crate::pooling::{ObjectiveCoefficients, QuackParams, SimplexWeights, DEFAULT_ALPHA};
use crate::predictive::{build_eval_tensor, build_eval_tensor_with_covariates, ScoreOptions, ScoreTable};
use crate::sampler::{mode_bound_check, sample_locked, ModeBoundReport, WeightedSample};
use crate::rng::{label, stream};

/// Default number of posterior draws per model.
pub const DEFAULT_DRAWS: usize = 4000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonnestedConfig {
    pub scenario: ScenarioConfig,
    pub draws: usize,
    pub v0: f64,
    pub nu0: f64,
    pub tau0: f64,
    pub alpha: f64,
    pub score: ScoreOptions,
    pub quack_restarts: usize,
    pub grid_size: usize,
}

impl Default for NonnestedConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::preset(1).expect("preset 1 exists"),
            draws: DEFAULT_DRAWS,
            v0: 10.0,
            nu0: 0.1,
            tau0: 1.0,
            alpha: DEFAULT_ALPHA,
            score: ScoreOptions::default(),
            quack_restarts: 10,
            grid_size: DEFAULT_GRID_SIZE,
        }
    }
}

impl NonnestedConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.draws == 0 {
            return Err(invalid("draws must be at least 1"));
        }
        if !(self.v0 > 0.0 && self.nu0 > 0.0 && self.tau0 > 0.0) {
            return Err(invalid("v0, nu0 and tau0 must be positive"));
        }
        if !(self.alpha >= 1.0) {
            return Err(invalid("alpha must be >= 1"));
        }
        if self.grid_size < 3 {
            return Err(invalid("grid_size must be at least 3"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub replication: usize,
    /// One report per method, in [`Method::ALL`] order.
    pub reports: Vec<MethodReport>,
    pub log_marginals: Vec<f64>,
    pub loo: LooSummary,
    /// Training cells whose Pareto diagnostic exceeds the threshold in the
    /// table used for weight fitting.
    pub flagged_cells: usize,
    pub locking_fit: FitResult,
    pub quacking_fit: FitResult,
    /// Largest endpoint-to-peak ratio over normalization grids.
    pub max_edge_ratio: f64,
}

impl ReplicationResult {
    pub fn report(&self, m: Method) -> &MethodReport {
        self.reports.iter().find(|r| r.method == m).expect("every method is reported")
    }
}

/// Fit both normal models to the training data, with per-model streams.
pub fn fit_normal_models(cfg: &NonnestedConfig, train: &[f64], replication: u64) -> Result<Vec<Draws>> {
    let seed = cfg.scenario.seed;
    let mut r1 = stream(seed, &[replication, label::POSTERIOR, 0]);
    let mut r2 = stream(seed, &[replication, label::POSTERIOR, 1]);
    Ok(vec![
        m1_posterior(train, cfg.v0, cfg.draws, &mut r1)?,
        m2_posterior(train, cfg.nu0, cfg.tau0, cfg.draws, &mut r2)?,
    ])
}

/// Grid range covering both samples with a margin of five training
/// standard deviations.
pub fn evaluation_range(train: &[f64], test: &[f64]) -> (f64, f64) {
    let sd = if train.len() > 1 { variance(train).sqrt() } else { 1.0 }.max(1e-3);
    let lo = train.iter().chain(test).copied().fold(f64::INFINITY, f64::min);
    let hi = train.iter().chain(test).copied().fold(f64::NEG_INFINITY, f64::max);
    (lo - 5.0 * sd, hi + 5.0 * sd)
}

/// Run all seven methods on one replication from a shared evaluation
/// tensor.
pub fn run_replication(cfg: &NonnestedConfig, replication: usize) -> Result<ReplicationResult> {
    cfg.validate()?;
    let rep = replication as u64;
    let (train, test) = simulate_scenario(&cfg.scenario, rep)?;
    let models = fit_normal_models(cfg, &train, rep)?;
    let k = models.len();

    let tensor = build_eval_tensor(&models, &train)?;
    let table = ScoreTable::from_tensor(&tensor, cfg.score);
    let loo_table = if cfg.score.loo {
        table.clone()
    } else {
        ScoreTable::from_tensor(
            &tensor,
            ScoreOptions {
                loo: true,
                ..cfg.score
            },
        )
    };
    let coeffs = ObjectiveCoefficients::from_table(&table);
    let loo_coeffs = ObjectiveCoefficients::from_table(&loo_table);

    let log_marginals = vec![log_marginal_m1(&train, cfg.v0), log_marginal_m2(&train, cfg.nu0, cfg.tau0)];
    let loo = loo_elpd(&loo_table)?;
    let loo_lpd: Vec<f64> = (0..train.len())
        .flat_map(|i| (0..k).map(move |m| (i, m)))
        .map(|(i, m)| loo_coeffs.log_density(i, m))
        .collect();

    let locking_fit = fit_locking(
        &coeffs,
        &LockingOptions {
            alpha: cfg.alpha,
            ..Default::default()
        },
    )?;
    let quacking_fit = fit_quacking(
        &coeffs,
        &QuackingOptions {
            alpha: cfg.alpha,
            restarts: cfg.quack_restarts,
            seed: stream(cfg.scenario.seed, &[rep, label::QUACKING]).next_u64(),
            ..Default::default()
        },
    )?;

    let vertex = |j: usize| SimplexWeights::vertex(k, j);
    let stack = stacking_weights(&loo_lpd, train.len(), k)?;
    let bma = bma_weights(&log_marginals)?;
    let lock_w = locking_fit.simplex().expect("locking fit").clone();
    let quack = quacking_fit.quack().expect("quacking fit").clone();
    let fitted: Vec<(Method, SimplexWeights, QuackParams)> = Method::ALL
        .into_iter()
        .map(|m| {
            let (w, p) = match m {
                Method::MlSelect => linear(vertex(ml_select(&log_marginals))),
                Method::Bma => linear(bma.clone()),
                Method::LooSelect => linear(vertex(loo_select(&loo.elpd))),
                Method::Stacking => linear(stack.clone()),
                Method::HyvaSelect => linear(vertex(hyva_select(&table.total_hyva()))),
                Method::Locking => (lock_w.clone(), QuackParams::locking(&lock_w)),
                Method::Quacking => (quack.beta.clone(), quack.clone()),
            };
            (m, w, p)
        })
        .collect();

    let test_tensor = build_eval_tensor(&models, &test)?;
    let test_coeffs = ObjectiveCoefficients::from_table(&ScoreTable::from_tensor(&test_tensor, ScoreOptions::in_sample()));
    let (lo, hi) = evaluation_range(&train, &test);
    let evaluator = TestEvaluator::new(test_coeffs, &models, lo, hi, cfg.grid_size)?;
    let mut reports = Vec::with_capacity(fitted.len());
    let mut max_edge_ratio: f64 = 0.0;
    for (method, weights, params) in fitted {
        let s = evaluator.evaluate(&params)?;
        max_edge_ratio = max_edge_ratio.max(s.edge_ratio);
        reports.push(MethodReport {
            method,
            weights,
            params,
            test_log_score: s.log_score,
            test_hyva_score: s.hyva_score,
        });
    }

    Ok(ReplicationResult {
        replication,
        reports,
        log_marginals,
        loo,
        flagged_cells: table.flagged(),
        locking_fit,
        quacking_fit,
        max_edge_ratio,
    })
}

fn linear(w: SimplexWeights) -> (SimplexWeights, QuackParams) {
    let p = QuackParams::mixture(&w);
    (w, p)
}

/// Run every replication; results are in replication order and failures
/// do not stop the others.
pub fn run_nonnested(cfg: &NonnestedConfig) -> Vec<Result<ReplicationResult>> {
    (0..cfg.scenario.replications)
        .into_par_iter()
        .map(|r| run_replication(cfg, r))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverfitConfig {
    /// Numbers of covariates to fit (an intercept is always added).
    pub p_list: Vec<usize>,
    pub iterations: usize,
    pub n: usize,
    pub draws: usize,
    pub warmup: usize,
    pub seed: u64,
    /// Covariates with a nonzero true coefficient, all equal to `signal`.
    pub active: usize,
    pub signal: f64,
    pub coef_scale: f64,
    pub noise_shape: f64,
    pub noise_scale: f64,
    pub psis: bool,
}

impl Default for OverfitConfig {
    fn default() -> Self {
        Self {
            p_list: vec![1, 25, 50, 75, 100],
            iterations: 10,
            n: 100,
            draws: DEFAULT_DRAWS,
            warmup: 500,
            seed: 20240101,
            active: 3,
            signal: 0.3,
            coef_scale: 10.0,
            noise_shape: 1.0,
            noise_scale: 1.0,
            psis: true,
        }
    }
}

impl OverfitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p_list.is_empty() || self.iterations == 0 || self.draws == 0 {
            return Err(invalid("p_list, iterations and draws must be non-empty / positive"));
        }
        let max_p = *self.p_list.iter().max().expect("non-empty");
        if max_p > self.n {
            return Err(invalid(format!("max(p_list) = {max_p} exceeds n = {}", self.n)));
        }
        if !(self.coef_scale > 0.0 && self.noise_shape > 0.0 && self.noise_scale > 0.0) {
            return Err(invalid("prior scales must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverfitRow {
    pub p: usize,
    pub iter: usize,
    pub insample_lpd: f64,
    pub loo_lpd: f64,
    pub insample_hyva: f64,
    pub loo_hyva: f64,
}

/// Simulate one dataset of the overfitting study: a standard normal design
/// with `max(p_list, active)` columns and `y = signal * (x_1 + ... +
/// x_active) + N(0, 1)`.
pub fn overfit_dataset(cfg: &OverfitConfig, iter: usize) -> (DMatrix<f64>, Vec<f64>) {
    let cols = cfg.p_list.iter().copied().max().unwrap_or(0).max(cfg.active);
    let mut rng = stream(cfg.seed, &[iter as u64, label::DESIGN]);
    let z = DMatrix::from_fn(cfg.n, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = (0..cfg.n)
        .map(|i| {
            let signal: f64 = (0..cfg.active).map(|j| z[(i, j)]).sum::<f64>() * cfg.signal;
            signal + rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    (z, y)
}

/// Fit the regression with an intercept and the first `p` covariates and
/// score it in-sample and by leave-one-out.
pub fn overfit_cell(cfg: &OverfitConfig, z: &DMatrix<f64>, y: &[f64], p: usize, iter: usize) -> Result<OverfitRow> {
    let n = y.len();
    let x = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { z[(i, j - 1)] });
    let prior = RegressionPrior {
        coef_scales: vec![cfg.coef_scale; p + 1],
        noise_shape: cfg.noise_shape,
        noise_scale: cfg.noise_scale,
    };
    let mut rng = stream(cfg.seed, &[iter as u64, label::POSTERIOR, p as u64]);
    let draws = regression_gibbs(&x, y, &prior, cfg.draws, cfg.warmup, &mut rng)?;
    let rows: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).iter().copied().collect()).collect();
    let tensor = build_eval_tensor_with_covariates(std::slice::from_ref(&draws), y, &rows)?;
    let ins = ScoreTable::from_tensor(&tensor, ScoreOptions::in_sample());
    let loo = ScoreTable::from_tensor(
        &tensor,
        ScoreOptions {
            loo: true,
            psis: cfg.psis,
            ..Default::default()
        },
    );
    Ok(OverfitRow {
        p,
        iter,
        insample_lpd: ins.total_log_density()[0],
        loo_lpd: loo.total_log_density()[0],
        insample_hyva: ins.total_hyva()[0],
        loo_hyva: loo.total_hyva()[0],
    })
}

/// Rows sorted by `(p, iter)`.
pub fn run_overfit(cfg: &OverfitConfig) -> Result<Vec<OverfitRow>> {
    cfg.validate()?;
    let data: Vec<(DMatrix<f64>, Vec<f64>)> = (0..cfg.iterations).map(|it| overfit_dataset(cfg, it)).collect();
    let mut ps = cfg.p_list.clone();
    ps.sort_unstable();
    ps.dedup();
    let jobs: Vec<(usize, usize)> = ps.iter().flat_map(|&p| (0..cfg.iterations).map(move |it| (p, it))).collect();
    jobs.par_iter()
        .map(|&(p, it)| overfit_cell(cfg, &data[it].0, &data[it].1, p, it))
        .collect()
}

/// Mean in-sample minus leave-one-out gap per `p`, for log score and
/// absolute Hyvärinen score: `(p, lpd_gap, hyva_gap)`.
pub fn overfit_gaps(rows: &[OverfitRow]) -> Vec<(usize, f64, f64)> {
    let mut ps: Vec<usize> = rows.iter().map(|r| r.p).collect();
    ps.sort_unstable();
    ps.dedup();
    ps.into_iter()
        .map(|p| {
            let sel: Vec<&OverfitRow> = rows.iter().filter(|r| r.p == p).collect();
            let lpd: Vec<f64> = sel.iter().map(|r| r.insample_lpd - r.loo_lpd).collect();
            let hyva: Vec<f64> = sel.iter().map(|r| (r.insample_hyva - r.loo_hyva).abs()).collect();
            (p, mean(&lpd), mean(&hyva))
        })
        .collect()
}

/// A component density for the operator demo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ComponentSpec {
    Normal { mean: f64, sd: f64 },
    StudentT { loc: f64, scale: f64, df: f64 },
}

impl ComponentSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ComponentSpec::Normal { mean, sd } => mean.is_finite() && sd > 0.0,
            ComponentSpec::StudentT { loc, scale, df } => loc.is_finite() && scale > 0.0 && df > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("invalid component {self:?}")))
        }
    }

    pub fn log_density(&self, y: f64) -> f64 {
        match *self {
            ComponentSpec::Normal { mean, sd } => normal_logpdf(y, mean, sd * sd),
            ComponentSpec::StudentT { loc, scale, df } => student_t_logpdf(y, loc, scale, df),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoConfig {
    pub components: Vec<ComponentSpec>,
    pub weights: Vec<f64>,
    /// Superposition phases, one per component.
    pub alphas: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
    pub grid_size: usize,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            components: vec![
                ComponentSpec::Normal { mean: -2.0, sd: 1.0 },
                ComponentSpec::Normal { mean: 2.0, sd: 1.0 },
            ],
            weights: vec![0.5, 0.5],
            alphas: vec![0.0, PI],
            lo: -8.0,
            hi: 8.0,
            grid_size: DEFAULT_GRID_SIZE,
        }
    }
}

impl DemoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(invalid("at least one component is required"));
        }
        for c in &self.components {
            c.validate()?;
        }
        SimplexWeights::new(self.weights.clone())?;
        if self.weights.len() != self.components.len() || self.alphas.len() != self.components.len() {
            return Err(invalid("weights and alphas need one entry per component"));
        }
        if self.alphas.iter().any(|a| !a.is_finite()) {
            return Err(invalid("phases must be finite"));
        }
        if !(self.hi > self.lo) || self.grid_size < 3 {
            return Err(invalid("grid needs hi > lo and at least 3 nodes"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoResult {
    pub components: Vec<GridDensity>,
    pub mixture: GridDensity,
    pub locking: GridDensity,
    pub superposition: GridDensity,
    pub mode_bound: ModeBoundReport,
}

pub fn run_demo(cfg: &DemoConfig) -> Result<DemoResult> {
    cfg.validate()?;
    let components = cfg
        .components
        .iter()
        .map(|c| GridDensity::from_log_fn(cfg.lo, cfg.hi, cfg.grid_size, |y| c.log_density(y))?.normalize())
        .collect::<Result<Vec<_>>>()?;
    let w = SimplexWeights::new(cfg.weights.clone())?;
    Ok(DemoResult {
        mixture: mixture_grid(&components, w.as_slice())?,
        locking: locking_grid(&components, w.as_slice())?,
        superposition: superposition_grid(&components, w.as_slice(), &cfg.alphas)?,
        mode_bound: mode_bound_check(&components, &w)?,
        components,
    })
}

/// Where the locked sampler's components come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum SampleSource {
    /// Fixed Gaussian predictives with given locking weights.
    Gaussians {
        means: Vec<f64>,
        vars: Vec<f64>,
        weights: Vec<f64>,
    },
    /// Fit the two normal models to one replication of a scenario and use
    /// the fitted locking weights.
    Scenario {
        scenario: u8,
        #[serde(default)]
        replication: usize,
        #[serde(default = "default_draws")]
        draws: usize,
    },
}

fn default_draws() -> usize {
    DEFAULT_DRAWS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub model: SampleSource,
    pub n_samples: usize,
    pub seed: u64,
    pub grid_size: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            model: SampleSource::Gaussians {
                means: vec![-1.0, 1.0],
                vars: vec![1.0, 1.0],
                weights: vec![0.5, 0.5],
            },
            n_samples: 20_000,
            seed: 20240101,
            grid_size: 401,
        }
    }
}

impl SampleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(invalid("n_samples must be at least 1"));
        }
        if self.grid_size < 3 {
            return Err(invalid("grid_size must be at least 3"));
        }
        match &self.model {
            SampleSource::Gaussians { means, vars, weights } => {
                if means.is_empty() || means.len() != vars.len() || means.len() != weights.len() {
                    return Err(invalid("means, vars and weights need equal non-zero length"));
                }
                if vars.iter().any(|v| !(*v > 0.0)) || means.iter().any(|m| !m.is_finite()) {
                    return Err(invalid("means must be finite and vars positive"));
                }
                SimplexWeights::new(weights.clone())?;
            }
            SampleSource::Scenario { scenario, draws, .. } => {
                ScenarioConfig::preset(*scenario)?;
                if *draws == 0 {
                    return Err(invalid("draws must be at least 1"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub sample: WeightedSample,
    pub weights: SimplexWeights,
    pub components: Vec<GridDensity>,
    pub kde: GridDensity,
    /// Data-generating density when known.
    pub truth: Option<GridDensity>,
    /// Closed-form `(mean, var)` of the locked density for Gaussian
    /// components.
    pub exact_moments: Option<(f64, f64)>,
}

/// Mean and variance of `prod_k N(m_k, v_k)^{w_k}`, normalized.
pub fn locked_gaussian_moments(means: &[f64], vars: &[f64], w: &[f64]) -> (f64, f64) {
    let prec: f64 = w.iter().zip(vars).map(|(w, v)| w / v).sum();
    let m: f64 = w.iter().zip(vars).zip(means).map(|((w, v), m)| w / v * m).sum::<f64>() / prec;
    (m, 1.0 / prec)
}

pub fn run_sample(cfg: &SampleConfig) -> Result<SampleResult> {
    cfg.validate()?;
    let (models, weights, exact, truth_component, range_hint) = match &cfg.model {
        SampleSource::Gaussians { means, vars, weights } => {
            let models: Vec<Draws> = means
                .iter()
                .zip(vars)
                .enumerate()
                .map(|(j, (m, v))| Draws::gaussian(format!("g{}", j + 1), *m, *v))
                .collect();
            let (lo, hi) = means
                .iter()
                .zip(vars)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (m, v)| {
                    (lo.min(m - 5.0 * v.sqrt()), hi.max(m + 5.0 * v.sqrt()))
                });
            let w = SimplexWeights::new(weights.clone())?;
            let exact = locked_gaussian_moments(means, vars, w.as_slice());
            (models, w, Some(exact), None, (lo, hi))
        }
        SampleSource::Scenario {
            scenario,
            replication,
            draws,
        } => {
            let sc = ScenarioConfig::preset(*scenario)?;
            let nn = NonnestedConfig {
                scenario: ScenarioConfig { seed: cfg.seed, ..sc },
                draws: *draws,
                ..Default::default()
            };
            let rep = *replication as u64;
            let (train, _) = simulate_scenario(&nn.scenario, rep)?;
            let models = fit_normal_models(&nn, &train, rep)?;
            let tensor = build_eval_tensor(&models, &train)?;
            let coeffs = ObjectiveCoefficients::from_table(&ScoreTable::from_tensor(&tensor, nn.score));
            let fit = fit_locking(&coeffs, &LockingOptions::default())?;
            let w = fit.simplex().expect("locking fit").clone();
            (models, w, None, Some((sc.mu_star, sc.v_star)), evaluation_range(&train, &[]))
        }
    };
    let sample = sample_locked(&models, &weights, cfg.n_samples, cfg.seed)?;
    let (lo, hi) = range_hint;
    let components = models
        .iter()
        .map(|d| crate::baselines::predictive_grid(d, lo, hi, cfg.grid_size))
        .collect::<Result<Vec<_>>>()?;
    let kde = sample.kde(lo, hi, cfg.grid_size)?;
    let truth = truth_component
        .map(|(m, v)| GridDensity::from_log_fn(lo, hi, cfg.grid_size, |y| normal_logpdf(y, m, v)))
        .transpose()?;
    Ok(SampleResult {
        sample,
        weights,
        components,
        kde,
        truth,
        exact_moments: exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_replication_runs() {
        let cfg = NonnestedConfig {
            scenario: ScenarioConfig {
                replications: 1,
                ..ScenarioConfig::preset(2).unwrap()
            },
            draws: 50,
            grid_size: 401,
            quack_restarts: 2,
            ..Default::default()
        };
        let r = run_replication(&cfg, 0).unwrap();
        assert_eq!(r.reports.len(), 7);
        for rep in &r.reports {
            assert!(rep.test_log_score.is_finite() && rep.test_hyva_score.is_finite(), "{rep:?}");
        }
        // BMA's mode is the marginal-likelihood choice.
        let bma = &r.report(Method::Bma).weights;
        let ml = &r.report(Method::MlSelect).weights;
        assert_eq!(crate::numeric::argmax(bma.as_slice()), crate::numeric::argmax(ml.as_slice()));
        assert_eq!(run_replication(&cfg, 0).unwrap(), r);
    }

    #[test]
    fn config_validation() {
        let mut cfg = OverfitConfig {
            p_list: vec![1, 200],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        cfg.p_list = vec![1, 100];
        assert!(cfg.validate().is_ok());
        let mut demo = DemoConfig::default();
        demo.weights = vec![0.5, 0.6];
        assert!(demo.validate().is_err());
        assert!(SampleConfig {
            n_samples: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn locked_gaussian_moment_formula() {
        let (m, v) = locked_gaussian_moments(&[-1.0, 1.0], &[1.0, 1.0], &[0.3, 0.7]);
        assert!((m - 0.4).abs() < 1e-15 && (v - 1.0).abs() < 1e-15);
    }
}
