//! Pareto-smoothed importance weights.
//!
//! The largest log-weights are modelled by a generalized Pareto distribution
//! fitted with the Zhang–Stephens profile-likelihood estimator. The tail is
//! then replaced by the fitted distribution's expected order statistics and
//! truncated at the raw maximum. The fitted shape `k` is the reliability
//! diagnostic: above [`PARETO_K_THRESHOLD`] the weights have (nearly)
//! infinite variance.

use crate::numeric::log_sum_exp;

/// Below this many weights no tail is fitted.
pub const MIN_DRAWS: usize = 25;

/// Shape values above this flag unreliable importance sampling.
pub const PARETO_K_THRESHOLD: f64 = 0.7;

/// Reported shape when the tail is degenerate (all tail weights equal).
pub const DEGENERATE_K: f64 = f64::NEG_INFINITY;

#[derive(Debug, Clone, PartialEq)]
pub struct Smoothed {
    pub logweights: Vec<f64>,
    /// `None` when too few weights to estimate.
    pub pareto_k: Option<f64>,
}

impl Smoothed {
    pub fn flagged(&self) -> bool {
        self.pareto_k.is_some_and(|k| k > PARETO_K_THRESHOLD)
    }
}

/// Number of weights treated as the tail for `s` draws.
pub fn tail_length(s: usize) -> usize {
    let s = s as f64;
    (0.2 * s).min(3.0 * s.sqrt()).ceil() as usize
}

/// Generalized Pareto fit `(k, sigma)` to non-negative exceedances sorted
/// ascending.
///
/// Profile likelihood over `theta = -k / sigma`, integrated against a grid
/// of `30 + sqrt(n)` quantile-based candidates, followed by the weakly
/// informative shrinkage of `k` towards 0.5.
pub fn gpd_fit(sorted: &[f64]) -> (f64, f64) {
    let n = sorted.len();
    let nf = n as f64;
    let prior = 3.0;
    let m = 30 + (nf.sqrt().floor() as usize);
    let x_max = sorted[n - 1];
    let x_quart = sorted[((nf / 4.0 + 0.5).floor() as usize).max(1) - 1];

    let theta: Vec<f64> = (1..=m)
        .map(|j| 1.0 / x_max + (1.0 - (m as f64 / (j as f64 - 0.5)).sqrt()) / prior / x_quart)
        .collect();
    let profile: Vec<f64> = theta
        .iter()
        .map(|&t| {
            let k = sorted.iter().map(|&x| (-t * x).ln_1p()).sum::<f64>() / nf;
            nf * ((-t / k).ln() - k - 1.0)
        })
        .collect();
    let norm = log_sum_exp(&profile);
    let theta_hat: f64 = theta
        .iter()
        .zip(&profile)
        .map(|(t, l)| t * (l - norm).exp())
        .filter(|v| v.is_finite())
        .sum();

    let k = sorted.iter().map(|&x| (-theta_hat * x).ln_1p()).sum::<f64>() / nf;
    let sigma = -k / theta_hat;
    let k = (nf * k + 10.0 * 0.5) / (nf + 10.0);
    (k, sigma)
}

/// Generalized Pareto quantile function.
pub fn gpd_quantile(p: f64, k: f64, sigma: f64) -> f64 {
    if k.abs() < 1e-12 {
        -sigma * (-p).ln_1p()
    } else {
        sigma * ((-k * (-p).ln_1p()).exp_m1()) / k
    }
}

/// Pareto-smooth a vector of log importance weights.
pub fn psis_fit(logweights: &[f64]) -> Smoothed {
    let s = logweights.len();
    if s < MIN_DRAWS {
        return Smoothed {
            logweights: logweights.to_vec(),
            pareto_k: None,
        };
    }
    let m = tail_length(s);
    let max = logweights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = logweights.iter().map(|w| w - max).collect();

    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| shifted[a].total_cmp(&shifted[b]).then(a.cmp(&b)));
    let tail_idx = &order[s - m..];
    let cutoff = shifted[order[s - m - 1]];
    let tail_lo = shifted[tail_idx[0]];
    let tail_hi = shifted[tail_idx[m - 1]];
    if tail_hi - tail_lo <= f64::EPSILON / 100.0 {
        return Smoothed {
            logweights: logweights.to_vec(),
            pareto_k: Some(DEGENERATE_K),
        };
    }

    let exp_cut = cutoff.exp();
    let exceed: Vec<f64> = tail_idx
        .iter()
        .map(|&i| (shifted[i].exp() - exp_cut).max(0.0))
        .collect();
    let (k, sigma) = gpd_fit(&exceed);
    if !k.is_finite() || !sigma.is_finite() {
        return Smoothed {
            logweights: logweights.to_vec(),
            pareto_k: Some(k),
        };
    }

    let mut out = shifted;
    for (j, &i) in tail_idx.iter().enumerate() {
        let p = (j as f64 + 0.5) / m as f64;
        let smoothed = (gpd_quantile(p, k, sigma) + exp_cut).ln();
        out[i] = smoothed.min(0.0);
    }
    out.iter_mut().for_each(|w| *w += max);
    Smoothed {
        logweights: out,
        pareto_k: Some(k),
    }
}
