//! Competing combination methods and held-out evaluation.
//!
//! Every method's output is expressed as a [`QuackParams`]: linear methods
//! as `w_0 = 1` with `beta` the mixture weights, log-linear ones with
//! `w_0 = 0`. Selection is a vertex of either.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{hybrid_grid_unnormalized, GridDensity};
use crate::models::Draws;
use crate::numeric::{argmax, argmin, log_sum_exp, softmax};
use crate::optimizer::exponentiated_gradient;
use crate::pooling::{pointwise_hyva, quacking_scores, ObjectiveCoefficients, QuackParams, SimplexWeights};
use crate::predictive::ScoreTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MlSelect,
    Bma,
    LooSelect,
    Stacking,
    HyvaSelect,
    Locking,
    Quacking,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::MlSelect,
        Method::Bma,
        Method::LooSelect,
        Method::Stacking,
        Method::HyvaSelect,
        Method::Locking,
        Method::Quacking,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::MlSelect => "ml_select",
            Method::Bma => "bma",
            Method::LooSelect => "loo_select",
            Method::Stacking => "stacking",
            Method::HyvaSelect => "hyva_select",
            Method::Locking => "locking",
            Method::Quacking => "quacking",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| invalid(format!("unknown method {s:?}")))
    }
}

/// One method's fitted combination and its held-out scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    /// Per-model weights for tabulation: simplex weights for linear and
    /// locking methods, the mixture weights `beta` for quacking.
    pub weights: SimplexWeights,
    pub params: QuackParams,
    pub test_log_score: f64,
    pub test_hyva_score: f64,
}

/// Index of the largest log marginal likelihood (first on ties).
pub fn ml_select(log_marginals: &[f64]) -> usize {
    argmax(log_marginals)
}

/// Posterior model probabilities under a uniform model prior.
pub fn bma_weights(log_marginals: &[f64]) -> Result<SimplexWeights> {
    if log_marginals.is_empty() || log_marginals.iter().any(|v| v.is_nan()) {
        return Err(invalid("log marginals must be non-empty and not NaN"));
    }
    SimplexWeights::normalized(softmax(log_marginals))
}

/// Leave-one-out expected log predictive density per model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooSummary {
    pub elpd: Vec<f64>,
    /// Cells above the Pareto threshold, per model.
    pub flagged: Vec<usize>,
    /// Largest Pareto shape per model, if any cell had enough draws.
    pub max_pareto_k: Vec<Option<f64>>,
}

pub fn loo_elpd(table: &ScoreTable) -> Result<LooSummary> {
    if !table.options.loo {
        return Err(invalid("leave-one-out summary needs a table built with loo = true"));
    }
    let mut flagged = vec![0; table.models];
    let mut max_pareto_k = vec![None; table.models];
    for k in 0..table.models {
        for i in 0..table.points {
            let cell = table.get(k, i);
            if cell.flagged() {
                flagged[k] += 1;
            }
            if let Some(pk) = cell.pareto_k {
                max_pareto_k[k] = Some(max_pareto_k[k].map_or(pk, |m: f64| m.max(pk)));
            }
        }
    }
    Ok(LooSummary {
        elpd: table.total_log_density(),
        flagged,
        max_pareto_k,
    })
}

pub fn loo_select(elpd: &[f64]) -> usize {
    argmax(elpd)
}

/// Model with the smallest summed Hyvärinen score (first on ties).
pub fn hyva_select(total_hyva: &[f64]) -> usize {
    argmin(total_hyva)
}

/// Stacking of predictive distributions: maximize
/// `sum_i log sum_k w_k exp(lpd_ik)` over the simplex, with `lpd` row-major
/// `points x models`.
pub fn stacking_weights(lpd: &[f64], points: usize, models: usize) -> Result<SimplexWeights> {
    if models == 0 || points == 0 || lpd.len() != points * models {
        return Err(Error::DimensionMismatch(format!(
            "{} log densities for {points} points x {models} models",
            lpd.len()
        )));
    }
    if lpd.iter().any(|v| !v.is_finite()) {
        return Err(invalid("stacking needs finite log predictive densities"));
    }
    // Row-max scaling leaves the maximizer unchanged.
    let scaled: Vec<f64> = lpd
        .chunks(models)
        .flat_map(|row| {
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            row.iter().map(move |v| (v - m).exp())
        })
        .collect();
    let value = |w: &[f64]| -> f64 {
        -scaled
            .chunks(models)
            .map(|row| row.iter().zip(w).map(|(p, w)| p * w).sum::<f64>().ln())
            .sum::<f64>()
    };
    let grad = |w: &[f64]| -> Vec<f64> {
        let mut g = vec![0.0; models];
        for row in scaled.chunks(models) {
            let total: f64 = row.iter().zip(w).map(|(p, w)| p * w).sum();
            for k in 0..models {
                g[k] -= row[k] / total;
            }
        }
        g
    };
    let out = exponentiated_gradient(models, value, grad, 1e-10, 10_000);
    SimplexWeights::normalized(out.w)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestScores {
    /// `sum_j log q(y_j)` under the normalized combined density.
    pub log_score: f64,
    /// `sum_j H(y_j; q)`.
    pub hyva_score: f64,
    /// Log normalizer (zero when the combination is normalized by
    /// construction).
    pub log_normalizer: f64,
    /// Endpoint-to-peak density ratio on the normalization grid, zero when
    /// no grid was needed.
    pub edge_ratio: f64,
}

/// Held-out evaluation for any [`QuackParams`].
///
/// Log scores use the exact per-model predictive densities at the test
/// points; non-linear pools are normalized on a grid of the per-model
/// predictives. Hyvärinen scores use in-sample (non-leave-one-out) score
/// estimates at the test points and need no normalizer.
#[derive(Debug, Clone)]
pub struct TestEvaluator {
    coeffs: ObjectiveCoefficients,
    grids: Vec<GridDensity>,
}

impl TestEvaluator {
    /// `coeffs` must come from a non-leave-one-out table at the test points.
    pub fn new(coeffs: ObjectiveCoefficients, models: &[Draws], lo: f64, hi: f64, grid_size: usize) -> Result<Self> {
        if models.len() != coeffs.models() {
            return Err(Error::DimensionMismatch(format!(
                "{} models for {}-model coefficients",
                models.len(),
                coeffs.models()
            )));
        }
        let grids = models
            .iter()
            .map(|d| predictive_grid(d, lo, hi, grid_size))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { coeffs, grids })
    }

    pub fn grids(&self) -> &[GridDensity] {
        &self.grids
    }

    pub fn evaluate(&self, p: &QuackParams) -> Result<TestScores> {
        let k = self.coeffs.models();
        if p.beta.len() != k || p.w.len() != k + 1 {
            return Err(Error::DimensionMismatch(format!("parameters for {} models, expected {k}", p.beta.len())));
        }
        let (log_normalizer, edge_ratio) = if self_normalized(p) {
            (0.0, 0.0)
        } else {
            let g = hybrid_grid_unnormalized(&self.grids, p)?;
            (g.log_mass(), g.edge_ratio())
        };
        let log_beta: Vec<f64> = p.beta.as_slice().iter().map(|b| b.ln()).collect();
        let mut log_score = 0.0;
        for i in 0..self.coeffs.points() {
            let mut term = 0.0;
            if p.w[0] != 0.0 {
                let parts: Vec<f64> = (0..k).map(|m| log_beta[m] + self.coeffs.log_density(i, m)).collect();
                term += p.w[0] * log_sum_exp(&parts);
            }
            for m in 0..k {
                if p.w[m + 1] != 0.0 {
                    term += p.w[m + 1] * self.coeffs.log_density(i, m);
                }
            }
            log_score += term - log_normalizer;
        }
        let (q1, q2) = quacking_scores(&self.coeffs, p);
        Ok(TestScores {
            log_score,
            hyva_score: pointwise_hyva(&q1, &q2).iter().sum(),
            log_normalizer,
            edge_ratio,
        })
    }
}

/// Whether the combination integrates to one without a grid: a mixture, or
/// a single unit exponent.
fn self_normalized(p: &QuackParams) -> bool {
    let exps = &p.w[1..];
    let ones = exps.iter().filter(|w| **w == 1.0).count();
    let zeros = exps.iter().filter(|w| **w == 0.0).count();
    (p.w[0] == 1.0 && zeros == exps.len()) || (p.w[0] == 0.0 && ones == 1 && zeros + 1 == exps.len())
}

/// Posterior predictive `log pi(y)` tabulated on a grid (exact values, not
/// renormalized).
pub fn predictive_grid(d: &Draws, lo: f64, hi: f64, m: usize) -> Result<GridDensity> {
    let mut g = GridDensity::from_log_fn(lo, hi, m, |_| 0.0)?;
    let xs = g.xs();
    g.logvals = xs.par_iter().map(|&y| d.log_predictive(y, &[])).collect();
    Ok(g)
}
