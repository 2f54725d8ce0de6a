//! Densities tabulated on a uniform 1-D grid.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::{argmax, log_trapezoid};
use crate::pooling::QuackParams;

/// Default number of grid nodes.
pub const DEFAULT_GRID_SIZE: usize = 4001;

/// Tolerance on the trapezoid integral of a normalized grid density.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    pub lo: f64,
    pub hi: f64,
    pub logvals: Vec<f64>,
    pub normalized: bool,
}

impl GridDensity {
    /// Tabulate `logf` at `m` evenly spaced nodes (unnormalized).
    pub fn from_log_fn(lo: f64, hi: f64, m: usize, logf: impl Fn(f64) -> f64) -> Result<Self> {
        if !(hi > lo) || m < 2 {
            return Err(invalid(format!("grid needs hi > lo and m >= 2, got [{lo}, {hi}], m={m}")));
        }
        let h = (hi - lo) / (m - 1) as f64;
        Ok(Self {
            lo,
            hi,
            logvals: (0..m).map(|j| logf(lo + j as f64 * h)).collect(),
            normalized: false,
        })
    }

    pub fn len(&self) -> usize {
        self.logvals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logvals.is_empty()
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.len() - 1) as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        self.lo + j as f64 * self.step()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.x(j)).collect()
    }

    pub fn densities(&self) -> Vec<f64> {
        self.logvals.iter().map(|v| v.exp()).collect()
    }

    /// `log` of the trapezoid integral.
    pub fn log_mass(&self) -> f64 {
        log_trapezoid(&self.logvals, self.step())
    }

    pub fn normalize(mut self) -> Result<Self> {
        let z = self.log_mass();
        if !z.is_finite() {
            return Err(invalid("density has zero or infinite mass on the grid"));
        }
        self.logvals.iter_mut().for_each(|v| *v -= z);
        self.normalized = true;
        Ok(self)
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.lo == other.lo && self.hi == other.hi && self.len() == other.len()
    }

    /// Grid location of the maximum (first on ties).
    pub fn argmax(&self) -> usize {
        argmax(&self.logvals)
    }

    pub fn mode(&self) -> f64 {
        self.x(self.argmax())
    }

    /// Linear interpolation of the log density at `y` (`None` off-grid).
    pub fn log_density_at(&self, y: f64) -> Option<f64> {
        if !(y >= self.lo && y <= self.hi) {
            return None;
        }
        let t = (y - self.lo) / self.step();
        let j = (t.floor() as usize).min(self.len() - 2);
        let frac = t - j as f64;
        let (a, b) = (self.logvals[j], self.logvals[j + 1]);
        if frac == 0.0 {
            return Some(a);
        }
        Some(a + frac * (b - a))
    }

    /// Whether the discrete slope changes sign at most once, from rising to
    /// falling. Flat steps are ignored.
    pub fn is_unimodal(&self) -> bool {
        let mut falling = false;
        for pair in self.logvals.windows(2) {
            let d = pair[1] - pair[0];
            if d.is_nan() {
                continue;
            }
            if d < 0.0 {
                falling = true;
            } else if d > 0.0 && falling {
                return false;
            }
        }
        true
    }

    /// Ratio of the larger endpoint density to the peak density. Large values
    /// indicate the grid truncates a heavy or non-integrable tail.
    pub fn edge_ratio(&self) -> f64 {
        let peak = self.logvals[self.argmax()];
        let edge = self.logvals[0].max(self.logvals[self.len() - 1]);
        (edge - peak).exp()
    }

    /// Mean and variance under the normalized density (trapezoid rule).
    pub fn moments(&self) -> (f64, f64) {
        let h = self.step();
        let dens = self.densities();
        let xs = self.xs();
        let w = |j: usize| if j == 0 || j + 1 == dens.len() { 0.5 } else { 1.0 };
        let mass: f64 = (0..dens.len()).map(|j| w(j) * dens[j]).sum::<f64>() * h;
        let mean: f64 = (0..dens.len()).map(|j| w(j) * dens[j] * xs[j]).sum::<f64>() * h / mass;
        let var: f64 = (0..dens.len())
            .map(|j| w(j) * dens[j] * (xs[j] - mean).powi(2))
            .sum::<f64>()
            * h
            / mass;
        (mean, var)
    }
}

fn check_shared(ds: &[GridDensity], w: &[f64]) -> Result<()> {
    if ds.is_empty() {
        return Err(invalid("no component densities"));
    }
    if ds.len() != w.len() {
        return Err(Error::DimensionMismatch(format!("{} densities, {} weights", ds.len(), w.len())));
    }
    if let Some(bad) = ds.iter().find(|d| !d.same_grid(&ds[0])) {
        return Err(Error::GridMismatch(format!(
            "[{}, {}] x {} vs [{}, {}] x {}",
            ds[0].lo,
            ds[0].hi,
            ds[0].len(),
            bad.lo,
            bad.hi,
            bad.len()
        )));
    }
    Ok(())
}

fn with_values(template: &GridDensity, logvals: Vec<f64>) -> GridDensity {
    GridDensity {
        lo: template.lo,
        hi: template.hi,
        logvals,
        normalized: false,
    }
}

fn log_sum_exp_weighted(terms: impl Iterator<Item = (f64, f64)>) -> f64 {
    let terms: Vec<(f64, f64)> = terms.filter(|(w, _)| *w > 0.0).collect();
    let max = terms.iter().map(|(_, l)| *l).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return f64::NEG_INFINITY;
    }
    max + terms.iter().map(|(w, l)| w * (l - max).exp()).sum::<f64>().ln()
}

/// Linear mixture `sum_k w_k pi_k`, normalized.
pub fn mixture_grid(ds: &[GridDensity], w: &[f64]) -> Result<GridDensity> {
    check_shared(ds, w)?;
    let logvals = (0..ds[0].len())
        .map(|j| log_sum_exp_weighted(ds.iter().zip(w).map(|(d, w)| (*w, d.logvals[j]))))
        .collect();
    with_values(&ds[0], logvals).normalize()
}

/// Log-linear pool `prod_k pi_k^{w_k}`, normalized.
pub fn locking_grid(ds: &[GridDensity], w: &[f64]) -> Result<GridDensity> {
    check_shared(ds, w)?;
    let logvals = (0..ds[0].len())
        .map(|j| {
            ds.iter()
                .zip(w)
                .filter(|(_, w)| **w != 0.0)
                .map(|(d, w)| w * d.logvals[j])
                .sum()
        })
        .collect();
    with_values(&ds[0], logvals).normalize()
}

/// Superposition `|sum_k sqrt(w_k pi_k) e^{i alpha_k}|^2`, normalized.
///
/// Expanded as `sum_k w_k pi_k + 2 sum_{k<j} sqrt(w_k w_j) sqrt(pi_k pi_j)
/// cos(alpha_k - alpha_j)`, with the root product formed in log space.
pub fn superposition_grid(ds: &[GridDensity], w: &[f64], alphas: &[f64]) -> Result<GridDensity> {
    check_shared(ds, w)?;
    if alphas.len() != ds.len() {
        return Err(Error::DimensionMismatch(format!("{} phases for {} densities", alphas.len(), ds.len())));
    }
    let k = ds.len();
    let logvals = (0..ds[0].len())
        .map(|j| {
            let logs: Vec<f64> = ds.iter().map(|d| d.logvals[j]).collect();
            let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !max.is_finite() {
                return f64::NEG_INFINITY;
            }
            let mut total = 0.0;
            for a in 0..k {
                total += w[a] * (logs[a] - max).exp();
                for b in a + 1..k {
                    let cross = (0.5 * (logs[a] + logs[b]) - max).exp();
                    total += 2.0 * (w[a] * w[b]).sqrt() * cross * (alphas[a] - alphas[b]).cos();
                }
            }
            if total > 0.0 {
                max + total.ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    with_values(&ds[0], logvals).normalize()
}

/// Hybrid pool `(sum_k beta_k pi_k)^{w_0} prod_k pi_k^{w_k}`, normalized.
pub fn hybrid_grid(ds: &[GridDensity], p: &QuackParams) -> Result<GridDensity> {
    hybrid_grid_unnormalized(ds, p)?.normalize()
}

/// Hybrid pool tabulated without normalization; its
/// [`GridDensity::log_mass`] is the log normalizer.
pub fn hybrid_grid_unnormalized(ds: &[GridDensity], p: &QuackParams) -> Result<GridDensity> {
    check_shared(ds, p.beta.as_slice())?;
    let logvals = (0..ds[0].len())
        .map(|j| {
            let mix = if p.w[0] != 0.0 {
                p.w[0] * log_sum_exp_weighted(ds.iter().zip(p.beta.as_slice()).map(|(d, b)| (*b, d.logvals[j])))
            } else {
                0.0
            };
            mix + ds
                .iter()
                .zip(&p.w[1..])
                .filter(|(_, w)| **w != 0.0)
                .map(|(d, w)| w * d.logvals[j])
                .sum::<f64>()
        })
        .collect();
    Ok(with_values(&ds[0], logvals))
}
