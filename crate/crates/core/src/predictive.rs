//! Evaluation tensor and importance-weighted score-function estimates.
//!
//! All estimators work from stored `log f`, `d/dy log f` and
//! `d2/dy2 log f` at the posterior draws. Ratios of raw density
//! derivatives such as `sum f' / sum f` become means under the normalized
//! weights `softmax(log f)`, using `f' = f * dlog f` and
//! `f'' = f * (d2log f + dlog f^2)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Draws;
use crate::numeric::{log_mean_exp, log_sum_exp};
use crate::psis::{psis_fit, PARETO_K_THRESHOLD};

/// Per-draw evaluations of one model at one data point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointEvaluations {
    pub model: usize,
    pub point: usize,
    pub loglik: Vec<f64>,
    pub dloglik: Vec<f64>,
    pub d2loglik: Vec<f64>,
}

impl PointEvaluations {
    pub fn new(
        model: usize,
        point: usize,
        loglik: Vec<f64>,
        dloglik: Vec<f64>,
        d2loglik: Vec<f64>,
    ) -> Result<Self> {
        let s = loglik.len();
        if s == 0 || dloglik.len() != s || d2loglik.len() != s {
            return Err(Error::DimensionMismatch(format!(
                "cell ({model}, {point}): vectors of lengths {}, {}, {}",
                s,
                dloglik.len(),
                d2loglik.len()
            )));
        }
        for (draw, ((a, b), c)) in loglik.iter().zip(&dloglik).zip(&d2loglik).enumerate() {
            if !(a.is_finite() && b.is_finite() && c.is_finite()) {
                return Err(Error::NonFiniteEvaluation { model, point, draw });
            }
        }
        Ok(Self {
            model,
            point,
            loglik,
            dloglik,
            d2loglik,
        })
    }

    pub fn draws(&self) -> usize {
        self.loglik.len()
    }
}

/// Estimated score functions of one predictive at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreEstimate {
    /// `d/dy log pi(y)`.
    pub grad: f64,
    /// `d2/dy2 log pi(y)`.
    pub lap: f64,
    /// Hyvärinen score `2 lap + grad^2`.
    pub hyva: f64,
    /// `log pi(y)`.
    pub log_density: f64,
    pub ess: f64,
    pub pareto_k: Option<f64>,
    /// Monte Carlo standard errors of `grad` and `lap` (delta method).
    pub grad_mcse: f64,
    pub lap_mcse: f64,
}

impl ScoreEstimate {
    pub fn flagged(&self) -> bool {
        self.pareto_k.is_some_and(|k| k > PARETO_K_THRESHOLD)
    }
}

/// How the second derivative of the log predictive is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondDerivative {
    /// `sum f'' / sum f - g^2`, the self-normalized estimator.
    #[default]
    ImportanceWeighted,
    /// Plain average of `d2/dy2 log f` over draws.
    PlugIn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreOptions {
    /// Leave-one-out reweighting of the draws for each point.
    pub loo: bool,
    /// Pareto-smooth the leave-one-out ratios.
    pub psis: bool,
    pub second: SecondDerivative,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        Self {
            loo: true,
            psis: true,
            second: SecondDerivative::ImportanceWeighted,
        }
    }
}

impl ScoreOptions {
    pub fn in_sample() -> Self {
        Self {
            loo: false,
            ..Self::default()
        }
    }
}

/// Leave-one-out importance ratios for one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct LooWeights {
    /// Log ratios `-log f(y_i | theta_s)`, possibly Pareto-smoothed.
    pub log_weights: Vec<f64>,
    pub pareto_k: Option<f64>,
    /// Effective sample size of the ratios alone.
    pub ess: f64,
    /// Nearly all mass sits on a single draw.
    pub concentrated: bool,
}

pub fn loo_reweight(pe: &PointEvaluations, smooth: bool) -> LooWeights {
    let raw: Vec<f64> = pe.loglik.iter().map(|l| -l).collect();
    let (log_weights, pareto_k) = if smooth {
        let s = psis_fit(&raw);
        (s.logweights, s.pareto_k)
    } else {
        (raw, None)
    };
    let ess = ess_from_log(&log_weights);
    LooWeights {
        concentrated: ess < 1.0 + 1e-6 && pe.draws() > 1,
        log_weights,
        pareto_k,
        ess,
    }
}

fn ess_from_log(logw: &[f64]) -> f64 {
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (s1, s2) = logw.iter().fold((0.0, 0.0), |(a, b), l| {
        let w = (l - max).exp();
        (a + w, b + w * w)
    });
    s1 * s1 / s2
}

/// Core self-normalized estimator with optional extra log-weights.
fn estimate(
    pe: &PointEvaluations,
    extra: Option<&[f64]>,
    second: SecondDerivative,
) -> ScoreEstimate {
    let s = pe.draws();
    let logw: Vec<f64> = match extra {
        Some(r) => pe.loglik.iter().zip(r).map(|(l, r)| l + r).collect(),
        None => pe.loglik.clone(),
    };
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();

    let mut grad = 0.0;
    let mut second_moment = 0.0;
    let mut sq = 0.0;
    for j in 0..s {
        let d = pe.dloglik[j];
        grad += w[j] * d;
        second_moment += w[j] * (pe.d2loglik[j] + d * d);
        sq += w[j] * w[j];
    }
    grad /= total;
    second_moment /= total;

    let lap = match second {
        SecondDerivative::ImportanceWeighted => second_moment - grad * grad,
        SecondDerivative::PlugIn => match extra {
            Some(r) => {
                let rmax = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let (num, den) = r.iter().zip(&pe.d2loglik).fold((0.0, 0.0), |(a, b), (r, d2)| {
                    let v = (r - rmax).exp();
                    (a + v * d2, b + v)
                });
                num / den
            }
            None => pe.d2loglik.iter().sum::<f64>() / s as f64,
        },
    };

    let (mut gvar, mut lvar) = (0.0, 0.0);
    for j in 0..s {
        let wn = w[j] / total;
        let d = pe.dloglik[j];
        let h = pe.d2loglik[j] + d * d;
        let psi_g = d - grad;
        let psi_l = (h - second_moment) - 2.0 * grad * psi_g;
        gvar += wn * wn * psi_g * psi_g;
        lvar += wn * wn * psi_l * psi_l;
    }

    let log_density = match extra {
        Some(r) => log_sum_exp(&logw) - log_sum_exp(r),
        None => log_mean_exp(&pe.loglik),
    };

    ScoreEstimate {
        grad,
        lap,
        hyva: 2.0 * lap + grad * grad,
        log_density,
        ess: total * total / sq,
        pareto_k: None,
        grad_mcse: gvar.sqrt(),
        lap_mcse: lvar.sqrt(),
    }
}

/// `d/dy log pi(y)` estimated by `sum_s f_s dlog f_s / sum_s f_s`.
pub fn grad_log_predictive(pe: &PointEvaluations) -> f64 {
    estimate(pe, None, SecondDerivative::ImportanceWeighted).grad
}

/// `d2/dy2 log pi(y)` estimated by `sum f'' / sum f - g^2`.
pub fn lap_log_predictive(pe: &PointEvaluations) -> f64 {
    estimate(pe, None, SecondDerivative::ImportanceWeighted).lap
}

/// In-sample score estimate for one cell.
pub fn hyvarinen_point(pe: &PointEvaluations) -> ScoreEstimate {
    estimate(pe, None, SecondDerivative::ImportanceWeighted)
}

/// `log(1/S sum_s f(y | theta_s))`.
pub fn log_predictive_density(pe: &PointEvaluations) -> f64 {
    log_mean_exp(&pe.loglik)
}

/// Score estimate for one cell under the given options.
pub fn score_cell(pe: &PointEvaluations, opts: &ScoreOptions) -> ScoreEstimate {
    if !opts.loo {
        return estimate(pe, None, opts.second);
    }
    let loo = loo_reweight(pe, opts.psis);
    let mut est = estimate(pe, Some(&loo.log_weights), opts.second);
    // The weighted harmonic-type mean cannot exceed the arithmetic mean when
    // the ratios are monotone in 1/f, which smoothing preserves; clamp the
    // last-bit rounding so the ordering holds exactly.
    est.log_density = est.log_density.min(log_mean_exp(&pe.loglik));
    est.pareto_k = loo.pareto_k;
    est
}

/// Leave-one-out log predictive density for one cell.
pub fn loo_log_predictive_density(pe: &PointEvaluations, smooth: bool) -> f64 {
    score_cell(
        pe,
        &ScoreOptions {
            loo: true,
            psis: smooth,
            second: SecondDerivative::ImportanceWeighted,
        },
    )
    .log_density
}

/// The `K x n` cache of per-draw evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalTensor {
    models: usize,
    points: usize,
    /// Model-major: cell `(k, i)` at `k * points + i`.
    cells: Vec<PointEvaluations>,
}

impl EvalTensor {
    pub fn from_cells(models: usize, points: usize, mut cells: Vec<PointEvaluations>) -> Result<Self> {
        if models == 0 || points == 0 {
            return Err(Error::DimensionMismatch("tensor needs K >= 1 and n >= 1".into()));
        }
        if cells.len() != models * points {
            return Err(Error::DimensionMismatch(format!(
                "expected {} cells, got {}",
                models * points,
                cells.len()
            )));
        }
        cells.sort_by_key(|c| (c.model, c.point));
        for (idx, c) in cells.iter().enumerate() {
            if (c.model, c.point) != (idx / points, idx % points) {
                return Err(Error::DimensionMismatch(format!(
                    "missing or duplicate cell near ({}, {})",
                    idx / points,
                    idx % points
                )));
            }
        }
        Ok(Self {
            models,
            points,
            cells,
        })
    }

    pub fn models(&self) -> usize {
        self.models
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn cell(&self, model: usize, point: usize) -> &PointEvaluations {
        &self.cells[model * self.points + point]
    }

    pub fn cells(&self) -> &[PointEvaluations] {
        &self.cells
    }

    /// Add a constant to every `log f` entry of one model.
    pub fn shift_loglik(&mut self, model: usize, c: f64) {
        for cell in &mut self.cells[model * self.points..(model + 1) * self.points] {
            cell.loglik.iter_mut().for_each(|l| *l += c);
        }
    }

    /// Keep only the listed models, in the given order.
    pub fn select_models(&self, order: &[usize]) -> Self {
        let mut cells = Vec::with_capacity(order.len() * self.points);
        for (new_k, &k) in order.iter().enumerate() {
            for i in 0..self.points {
                let mut c = self.cell(k, i).clone();
                c.model = new_k;
                cells.push(c);
            }
        }
        Self {
            models: order.len(),
            points: self.points,
            cells,
        }
    }
}

/// Evaluate every model at every data point.
pub fn build_eval_tensor(models: &[Draws], data: &[f64]) -> Result<EvalTensor> {
    build_eval_tensor_with_covariates(models, data, &[])
}

/// As [`build_eval_tensor`], with one covariate row per data point (or none).
pub fn build_eval_tensor_with_covariates(
    models: &[Draws],
    data: &[f64],
    covariates: &[Vec<f64>],
) -> Result<EvalTensor> {
    if !covariates.is_empty() && covariates.len() != data.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} covariate rows for {} points",
            covariates.len(),
            data.len()
        )));
    }
    let n = data.len();
    let cells = (0..models.len() * n)
        .into_par_iter()
        .map(|idx| {
            let (k, i) = (idx / n, idx % n);
            let draws = &models[k];
            let x: &[f64] = covariates.get(i).map(Vec::as_slice).unwrap_or(&[]);
            let s = draws.len();
            let (mut l, mut d1, mut d2) = (Vec::with_capacity(s), Vec::with_capacity(s), Vec::with_capacity(s));
            for theta in &draws.params {
                let e = draws.likelihood.eval(data[i], theta, x);
                l.push(e.log);
                d1.push(e.d1);
                d2.push(e.d2);
            }
            PointEvaluations::new(k, i, l, d1, d2)
        })
        .collect::<Result<Vec<_>>>()?;
    EvalTensor::from_cells(models.len(), n, cells)
}

/// Score estimates for every cell, model-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub models: usize,
    pub points: usize,
    pub cells: Vec<ScoreEstimate>,
    pub options: ScoreOptions,
}

impl ScoreTable {
    pub fn from_tensor(t: &EvalTensor, opts: ScoreOptions) -> Self {
        let cells = t.cells().par_iter().map(|c| score_cell(c, &opts)).collect();
        Self {
            models: t.models(),
            points: t.points(),
            cells,
            options: opts,
        }
    }

    pub fn get(&self, model: usize, point: usize) -> &ScoreEstimate {
        &self.cells[model * self.points + point]
    }

    /// Summed Hyvärinen score per model.
    pub fn total_hyva(&self) -> Vec<f64> {
        (0..self.models)
            .map(|k| (0..self.points).map(|i| self.get(k, i).hyva).sum())
            .collect()
    }

    /// Summed log predictive density per model.
    pub fn total_log_density(&self) -> Vec<f64> {
        (0..self.models)
            .map(|k| (0..self.points).map(|i| self.get(k, i).log_density).sum())
            .collect()
    }

    /// Number of cells whose Pareto diagnostic exceeds the threshold.
    pub fn flagged(&self) -> usize {
        self.cells.iter().filter(|c| c.flagged()).count()
    }
}
