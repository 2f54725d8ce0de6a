//! Locking and quacking score functions and the Hyvärinen objective.
//!
//! For a locked pool `q = prod_k pi_k^{w_k}` the score functions are linear
//! in the weights, so the objective `sum_i (2 q''_i + q'_i^2)` is a convex
//! quadratic in `w`. The hybrid quacking pool
//! `q = (sum_k beta_k pi_k)^{w_0} prod_k pi_k^{w_k}` adds the score functions
//! of a linear mixture scaled by `w_0`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::predictive::{EvalTensor, ScoreOptions, ScoreTable};

/// Default Dirichlet concentration on the weights.
pub const DEFAULT_ALPHA: f64 = 1.01;

/// Per-point, per-model score-function estimates entering the objective.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveCoefficients {
    points: usize,
    models: usize,
    /// `a[i][k] = d/dy log pi_k(y_i)`, row-major.
    a: Vec<f64>,
    /// `b[i][k] = d2/dy2 log pi_k(y_i)`, row-major.
    b: Vec<f64>,
    /// `log pi_k(y_i)`, row-major. Used by the mixture part of quacking.
    log_density: Vec<f64>,
}

impl ObjectiveCoefficients {
    pub fn new(points: usize, models: usize, a: Vec<f64>, b: Vec<f64>, log_density: Vec<f64>) -> Result<Self> {
        let len = points * models;
        if points == 0 || models == 0 || a.len() != len || b.len() != len || log_density.len() != len {
            return Err(Error::DimensionMismatch(format!(
                "coefficients for {points} points x {models} models"
            )));
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(invalid("objective coefficients must be finite"));
        }
        Ok(Self {
            points,
            models,
            a,
            b,
            log_density,
        })
    }

    /// Coefficients without density information; quacking's mixture term
    /// then treats all predictives as equally dense.
    pub fn from_scores(points: usize, models: usize, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        Self::new(points, models, a, b, vec![0.0; points * models])
    }

    pub fn from_table(table: &ScoreTable) -> Self {
        let (n, k) = (table.points, table.models);
        let mut a = Vec::with_capacity(n * k);
        let mut b = Vec::with_capacity(n * k);
        let mut ld = Vec::with_capacity(n * k);
        for i in 0..n {
            for m in 0..k {
                let c = table.get(m, i);
                a.push(c.grad);
                b.push(c.lap);
                ld.push(c.log_density);
            }
        }
        Self {
            points: n,
            models: k,
            a,
            b,
            log_density: ld,
        }
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn models(&self) -> usize {
        self.models
    }

    pub fn a(&self, i: usize, k: usize) -> f64 {
        self.a[i * self.models + k]
    }

    pub fn b(&self, i: usize, k: usize) -> f64 {
        self.b[i * self.models + k]
    }

    pub fn log_density(&self, i: usize, k: usize) -> f64 {
        self.log_density[i * self.models + k]
    }

    fn row(v: &[f64], models: usize, i: usize) -> &[f64] {
        &v[i * models..(i + 1) * models]
    }

    /// Reorder (or subset) the model columns.
    pub fn select_models(&self, order: &[usize]) -> Self {
        let pick = |v: &[f64]| {
            (0..self.points)
                .flat_map(|i| order.iter().map(move |&k| v[i * self.models + k]))
                .collect::<Vec<_>>()
        };
        Self {
            points: self.points,
            models: order.len(),
            a: pick(&self.a),
            b: pick(&self.b),
            log_density: pick(&self.log_density),
        }
    }
}

/// Coefficients from an evaluation tensor.
pub fn objective_coefficients(t: &EvalTensor, opts: ScoreOptions) -> ObjectiveCoefficients {
    ObjectiveCoefficients::from_table(&ScoreTable::from_tensor(t, opts))
}

/// A point of the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(invalid("weights must be non-empty"));
        }
        if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(invalid(format!("weights must be non-negative and finite: {w:?}")));
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(Self(w))
    }

    /// Rescale non-negative values to sum to one.
    pub fn normalized(w: Vec<f64>) -> Result<Self> {
        let total: f64 = w.iter().sum();
        if !(total > 0.0) || w.iter().any(|v| !(*v >= 0.0)) {
            return Err(invalid(format!("cannot normalize {w:?}")));
        }
        Ok(Self(w.into_iter().map(|v| v / total).collect()))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn vertex(k: usize, j: usize) -> Self {
        let mut w = vec![0.0; k];
        w[j] = 1.0;
        Self(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for SimplexWeights {
    type Error = Error;

    fn try_from(w: Vec<f64>) -> Result<Self> {
        Self::new(w)
    }
}

impl From<SimplexWeights> for Vec<f64> {
    fn from(w: SimplexWeights) -> Self {
        w.0
    }
}

impl std::ops::Index<usize> for SimplexWeights {
    type Output = f64;

    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

/// Parameters of the hybrid pool: mixture weights `beta` and exponents
/// `w = (w_0, w_1, ..., w_K)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuackParams {
    pub beta: SimplexWeights,
    pub w: Vec<f64>,
}

impl QuackParams {
    pub fn new(beta: SimplexWeights, w: Vec<f64>) -> Result<Self> {
        if w.len() != beta.len() + 1 {
            return Err(Error::DimensionMismatch(format!(
                "{} exponents for {} models",
                w.len(),
                beta.len()
            )));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(invalid("quacking exponents must be finite"));
        }
        Ok(Self { beta, w })
    }

    /// The locked pool with weights `w` (`w_0 = 0`).
    pub fn locking(w: &SimplexWeights) -> Self {
        let mut e = vec![0.0];
        e.extend_from_slice(w.as_slice());
        Self {
            beta: SimplexWeights::uniform(w.len()),
            w: e,
        }
    }

    /// The linear mixture with weights `w` (`w_0 = 1`, other exponents 0).
    pub fn mixture(w: &SimplexWeights) -> Self {
        let mut e = vec![0.0; w.len() + 1];
        e[0] = 1.0;
        Self { beta: w.clone(), w: e }
    }
}

/// `(q'_i, q''_i)` for the locked pool.
pub fn locking_scores(c: &ObjectiveCoefficients, w: &SimplexWeights) -> (Vec<f64>, Vec<f64>) {
    locking_scores_raw(c, w.as_slice())
}

pub(crate) fn locking_scores_raw(c: &ObjectiveCoefficients, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let k = c.models;
    let mut q1 = Vec::with_capacity(c.points);
    let mut q2 = Vec::with_capacity(c.points);
    for i in 0..c.points {
        let a = ObjectiveCoefficients::row(&c.a, k, i);
        let b = ObjectiveCoefficients::row(&c.b, k, i);
        q1.push(a.iter().zip(w).map(|(a, w)| a * w).sum());
        q2.push(b.iter().zip(w).map(|(b, w)| b * w).sum());
    }
    (q1, q2)
}

fn score_sum(q1: &[f64], q2: &[f64]) -> f64 {
    q1.iter().zip(q2).map(|(g, l)| 2.0 * l + g * g).sum()
}

/// `-(alpha - 1) sum_k log w_k`; `+inf` on the boundary when `alpha > 1`.
pub fn dirichlet_penalty(w: &[f64], alpha: f64) -> f64 {
    if alpha == 1.0 {
        return 0.0;
    }
    -(alpha - 1.0) * w.iter().map(|v| v.ln()).sum::<f64>()
}

/// Summed Hyvärinen score of the locked pool plus the negative Dirichlet
/// log-prior (up to a constant).
pub fn hyva_objective(c: &ObjectiveCoefficients, w: &SimplexWeights, alpha: f64) -> f64 {
    hyva_objective_raw(c, w.as_slice(), alpha)
}

pub(crate) fn hyva_objective_raw(c: &ObjectiveCoefficients, w: &[f64], alpha: f64) -> f64 {
    let penalty = dirichlet_penalty(w, alpha);
    if penalty == f64::INFINITY {
        return f64::INFINITY;
    }
    let (q1, q2) = locking_scores_raw(c, w);
    score_sum(&q1, &q2) + penalty
}

/// Gradient of [`hyva_objective`] in `w`:
/// `sum_i (2 b_ik + 2 q'_i a_ik) - (alpha - 1) / w_k`.
pub fn hyva_gradient(c: &ObjectiveCoefficients, w: &[f64], alpha: f64) -> Vec<f64> {
    let k = c.models;
    let (q1, _) = locking_scores_raw(c, w);
    let mut g = vec![0.0; k];
    for (i, qi) in q1.iter().enumerate() {
        let a = ObjectiveCoefficients::row(&c.a, k, i);
        let b = ObjectiveCoefficients::row(&c.b, k, i);
        for m in 0..k {
            g[m] += 2.0 * b[m] + 2.0 * qi * a[m];
        }
    }
    if alpha != 1.0 {
        for m in 0..k {
            g[m] -= (alpha - 1.0) / w[m];
        }
    }
    g
}

/// `(q'_i, q''_i)` for the hybrid pool.
///
/// The mixture factor contributes `w_0 (m1)` and `w_0 (m2 - m1^2)` where
/// `m1`, `m2` are the `beta_k pi_k(y_i)`-weighted means of the per-model
/// `pi'/pi` and `pi''/pi`.
pub fn quacking_scores(c: &ObjectiveCoefficients, p: &QuackParams) -> (Vec<f64>, Vec<f64>) {
    let k = c.models;
    let w0 = p.w[0];
    let exps = &p.w[1..];
    let log_beta: Vec<f64> = p.beta.as_slice().iter().map(|b| b.ln()).collect();
    let mut q1 = Vec::with_capacity(c.points);
    let mut q2 = Vec::with_capacity(c.points);
    let mut rho = vec![0.0; k];
    for i in 0..c.points {
        let a = ObjectiveCoefficients::row(&c.a, k, i);
        let b = ObjectiveCoefficients::row(&c.b, k, i);
        let lock1: f64 = a.iter().zip(exps).map(|(a, w)| a * w).sum();
        let lock2: f64 = b.iter().zip(exps).map(|(b, w)| b * w).sum();
        if w0 == 0.0 {
            q1.push(lock1);
            q2.push(lock2);
            continue;
        }
        let ld = ObjectiveCoefficients::row(&c.log_density, k, i);
        let mut max = f64::NEG_INFINITY;
        for m in 0..k {
            rho[m] = log_beta[m] + ld[m];
            max = max.max(rho[m]);
        }
        let mut total = 0.0;
        for r in rho.iter_mut() {
            *r = (*r - max).exp();
            total += *r;
        }
        let (mut m1, mut m2) = (0.0, 0.0);
        for m in 0..k {
            let r = rho[m] / total;
            m1 += r * a[m];
            m2 += r * (b[m] + a[m] * a[m]);
        }
        q1.push(w0 * m1 + lock1);
        q2.push(w0 * (m2 - m1 * m1) + lock2);
    }
    (q1, q2)
}

/// Hybrid scores straight from a tensor.
pub fn quacking_scores_from_tensor(t: &EvalTensor, p: &QuackParams, opts: ScoreOptions) -> (Vec<f64>, Vec<f64>) {
    quacking_scores(&objective_coefficients(t, opts), p)
}

/// Summed Hyvärinen score of the hybrid pool plus a Dirichlet penalty on
/// `beta`.
pub fn quacking_objective(c: &ObjectiveCoefficients, p: &QuackParams, alpha: f64) -> f64 {
    let penalty = dirichlet_penalty(p.beta.as_slice(), alpha);
    if penalty == f64::INFINITY {
        return f64::INFINITY;
    }
    let (q1, q2) = quacking_scores(c, p);
    score_sum(&q1, &q2) + penalty
}

/// Per-point Hyvärinen scores `2 q'' + q'^2`.
pub fn pointwise_hyva(q1: &[f64], q2: &[f64]) -> Vec<f64> {
    q1.iter().zip(q2).map(|(g, l)| 2.0 * l + g * g).collect()
}
