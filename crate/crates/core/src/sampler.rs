//! Self-normalized importance sampling from a locked predictive, using the
//! equal-weight mixture of the component predictives as proposal.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{locking_grid, GridDensity};
use crate::models::Draws;
use crate::numeric::{log_sum_exp, softmax};
use crate::pooling::SimplexWeights;
use crate::psis::{psis_fit, PARETO_K_THRESHOLD};
use crate::rng::{label, stream};

/// Proposal draws generated per RNG stream.
pub const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    pub values: Vec<f64>,
    /// Smoothed, unnormalized log weights.
    pub logweights: Vec<f64>,
    pub pareto_k: Option<f64>,
    pub ess: f64,
}

/// Weighted moment estimates with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedMoments {
    pub mean: f64,
    pub mean_se: f64,
    pub var: f64,
    pub var_se: f64,
}

impl WeightedSample {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn flagged(&self) -> bool {
        self.pareto_k.is_some_and(|k| k > PARETO_K_THRESHOLD)
    }

    /// Weights normalized to sum to one.
    pub fn weights(&self) -> Vec<f64> {
        softmax(&self.logweights)
    }

    /// Self-normalized mean and variance; standard errors by the delta
    /// method, `sqrt(sum_s wbar_s^2 (h(y_s) - E h)^2)`.
    pub fn moments(&self) -> WeightedMoments {
        let w = self.weights();
        let mean: f64 = w.iter().zip(&self.values).map(|(w, y)| w * y).sum();
        let var: f64 = w.iter().zip(&self.values).map(|(w, y)| w * (y - mean).powi(2)).sum();
        let mean_se = w
            .iter()
            .zip(&self.values)
            .map(|(w, y)| (w * (y - mean)).powi(2))
            .sum::<f64>()
            .sqrt();
        let var_se = w
            .iter()
            .zip(&self.values)
            .map(|(w, y)| (w * ((y - mean).powi(2) - var)).powi(2))
            .sum::<f64>()
            .sqrt();
        WeightedMoments {
            mean,
            mean_se,
            var,
            var_se,
        }
    }

    /// Gaussian-kernel density estimate with a rule-of-thumb bandwidth
    /// based on the effective sample size.
    pub fn kde(&self, lo: f64, hi: f64, m: usize) -> Result<GridDensity> {
        let w = self.weights();
        let sd = self.moments().var.sqrt().max(1e-12);
        let h = 1.06 * sd * self.ess.max(1.0).powf(-0.2);
        let mut g = GridDensity::from_log_fn(lo, hi, m, |_| 0.0)?;
        let xs = g.xs();
        let norm = -(h * (2.0 * std::f64::consts::PI).sqrt()).ln();
        g.logvals = xs
            .par_iter()
            .map(|&x| {
                let total: f64 = w
                    .iter()
                    .zip(&self.values)
                    .map(|(w, y)| w * (-0.5 * ((x - y) / h).powi(2)).exp())
                    .sum();
                total.ln() + norm
            })
            .collect();
        Ok(g)
    }
}

/// Draw `n_samples` proposals and weight them toward `prod_k pi_k^{w_k}`.
///
/// Proposals come in chunks of [`CHUNK`], each from its own stream derived
/// from `seed`, so the result does not depend on the thread count.
pub fn sample_locked(models: &[Draws], w: &SimplexWeights, n_samples: usize, seed: u64) -> Result<WeightedSample> {
    if n_samples == 0 {
        return Err(invalid("n_samples must be at least 1"));
    }
    if models.is_empty() || models.len() != w.len() {
        return Err(Error::DimensionMismatch(format!("{} models, {} weights", models.len(), w.len())));
    }
    if let Some(m) = models.iter().find(|m| m.is_empty()) {
        return Err(invalid(format!("model {} has no draws", m.model_id)));
    }
    let k = models.len();
    let chunks = n_samples.div_ceil(CHUNK);
    let (values, raw): (Vec<f64>, Vec<f64>) = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = stream(seed, &[label::SAMPLER, c as u64]);
            let len = CHUNK.min(n_samples - c * CHUNK);
            (0..len)
                .map(|_| {
                    let m = rng.random_range(0..k);
                    let s = rng.random_range(0..models[m].len());
                    models[m].likelihood.sample(&models[m].params[s], &[], &mut rng)
                })
                .collect::<Vec<_>>()
        })
        .map(|y| {
            let logs: Vec<f64> = models.iter().map(|d| d.log_predictive(y, &[])).collect();
            let target: f64 = logs
                .iter()
                .zip(w.as_slice())
                .filter(|(_, w)| **w != 0.0)
                .map(|(l, w)| w * l)
                .sum();
            let proposal = log_sum_exp(&logs) - (k as f64).ln();
            (y, target - proposal)
        })
        .unzip();
    if raw.iter().any(|v| v.is_nan()) {
        return Err(invalid("importance weight evaluated to NaN"));
    }
    let smoothed = psis_fit(&raw);
    let norm = softmax(&smoothed.logweights);
    let ess = 1.0 / norm.iter().map(|v| v * v).sum::<f64>();
    Ok(WeightedSample {
        values,
        logweights: smoothed.logweights,
        pareto_k: smoothed.pareto_k,
        ess,
    })
}

/// Outcome of checking that a locked pool's mode lies between the
/// component modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ModeBoundReport {
    Checked {
        mode: f64,
        lower: f64,
        upper: f64,
        cell: f64,
        locked_unimodal: bool,
        within: bool,
    },
    Skipped {
        reason: String,
    },
}

impl ModeBoundReport {
    /// `Some(true)` when the check ran and passed, `None` when skipped.
    pub fn holds(&self) -> Option<bool> {
        match self {
            ModeBoundReport::Checked {
                locked_unimodal, within, ..
            } => Some(*locked_unimodal && *within),
            ModeBoundReport::Skipped { .. } => None,
        }
    }
}

/// For unimodal components, the locked density should be unimodal with its
/// mode inside `[min mode, max mode]`, up to one grid cell.
pub fn mode_bound_check(components: &[GridDensity], w: &SimplexWeights) -> Result<ModeBoundReport> {
    if let Some(j) = components.iter().position(|g| !g.is_unimodal()) {
        return Ok(ModeBoundReport::Skipped {
            reason: format!("component {j} is not unimodal"),
        });
    }
    let locked = locking_grid(components, w.as_slice())?;
    let modes: Vec<f64> = components.iter().map(|g| g.mode()).collect();
    let lower = modes.iter().copied().fold(f64::INFINITY, f64::min);
    let upper = modes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cell = locked.step();
    let mode = locked.mode();
    Ok(ModeBoundReport::Checked {
        mode,
        lower,
        upper,
        cell,
        locked_unimodal: locked.is_unimodal(),
        within: mode >= lower - cell * (1.0 + 1e-9) && mode <= upper + cell * (1.0 + 1e-9),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DEFAULT_GRID_SIZE;
    use crate::numeric::normal_logpdf;

    fn normal_grid(mean: f64, var: f64) -> GridDensity {
        GridDensity::from_log_fn(-10.0, 10.0, DEFAULT_GRID_SIZE, |y| normal_logpdf(y, mean, var)).unwrap()
    }

    #[test]
    fn single_model_has_flat_weights() {
        let models = vec![Draws::gaussian("a", 0.5, 2.0)];
        let s = sample_locked(&models, &SimplexWeights::uniform(1), 1000, 1).unwrap();
        assert_eq!(s.len(), 1000);
        assert!((s.ess - 1000.0).abs() < 1e-6);
        assert!(!s.flagged());
    }

    #[test]
    fn chunked_draws_are_reproducible() {
        let models = vec![Draws::gaussian("a", -1.0, 1.0), Draws::gaussian("b", 1.0, 1.0)];
        let w = SimplexWeights::uniform(2);
        let a = sample_locked(&models, &w, CHUNK + 17, 9).unwrap();
        let b = sample_locked(&models, &w, CHUNK + 17, 9).unwrap();
        assert_eq!(a, b);
        let c = sample_locked(&models, &w, CHUNK + 17, 10).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn rejects_bad_input() {
        let models = vec![Draws::gaussian("a", 0.0, 1.0)];
        assert!(sample_locked(&models, &SimplexWeights::uniform(1), 0, 1).is_err());
        assert!(sample_locked(&models, &SimplexWeights::uniform(2), 10, 1).is_err());
    }

    #[test]
    fn mode_bound_examples() {
        let a = normal_grid(-1.0, 1.0);
        let b = normal_grid(1.0, 1.0);
        let w = SimplexWeights::new(vec![0.3, 0.7]).unwrap();
        match mode_bound_check(&[a.clone(), b.clone()], &w).unwrap() {
            ModeBoundReport::Checked { mode, cell, .. } => assert!((mode - 0.4).abs() <= cell),
            other => panic!("{other:?}"),
        }
        let same = mode_bound_check(&[b.clone(), b.clone()], &w).unwrap();
        assert_eq!(same.holds(), Some(true));
        if let ModeBoundReport::Checked { mode, .. } = same {
            assert!((mode - 1.0).abs() < 1e-12);
        }
        let bimodal = GridDensity::from_log_fn(-10.0, 10.0, 2001, |y| {
            log_sum_exp(&[normal_logpdf(y, -3.0, 1.0), normal_logpdf(y, 3.0, 1.0)])
        })
        .unwrap();
        assert!(matches!(
            mode_bound_check(&[a, bimodal], &w).unwrap(),
            ModeBoundReport::Skipped { .. }
        ));
    }
}
