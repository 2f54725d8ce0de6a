//! Small numerical helpers shared across modules.

use std::f64::consts::PI;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Numerically stable `log(sum(exp(xs)))`. Returns `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `log(mean(exp(xs)))`.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    log_sum_exp(xs) - (xs.len() as f64).ln()
}

/// Normalized probabilities from unnormalized log values.
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= total);
    out
}

pub fn normal_logpdf(y: f64, mean: f64, var: f64) -> f64 {
    let z = y - mean;
    -0.5 * (LN_2PI + var.ln() + z * z / var)
}

pub fn student_t_logpdf(y: f64, loc: f64, scale: f64, df: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let z = (y - loc) / scale;
    ln_gamma((df + 1.0) / 2.0)
        - ln_gamma(df / 2.0)
        - 0.5 * (df * PI).ln()
        - scale.ln()
        - (df + 1.0) / 2.0 * (z * z / df).ln_1p()
}

/// Trapezoid rule on a uniform grid with spacing `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1])),
    }
}

/// `log` of the trapezoid integral of `exp(logvals)` on a uniform grid.
pub fn log_trapezoid(logvals: &[f64], h: f64) -> f64 {
    let max = logvals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let scaled: Vec<f64> = logvals.iter().map(|v| (v - max).exp()).collect();
    max + trapezoid(&scaled, h).ln()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with `n - 1` denominator.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Index of the smallest finite value, first index on ties.
pub fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x < xs[best] || (xs[best].is_nan() && !x.is_nan()) {
            best = i;
        }
    }
    best
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] || (xs[best].is_nan() && !x.is_nan()) {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_is_shift_stable() {
        let xs = [1000.0, 1000.0];
        assert!((log_sum_exp(&xs) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn student_t_matches_statrs() {
        use statrs::distribution::{Continuous, StudentsT};
        let t = StudentsT::new(0.5, 2.0, 3.0).unwrap();
        for y in [-3.0, 0.0, 0.5, 4.0] {
            assert!((student_t_logpdf(y, 0.5, 2.0, 3.0) - t.ln_pdf(y)).abs() < 1e-12);
        }
    }

    #[test]
    fn trapezoid_integrates_standard_normal() {
        let m = 4001;
        let h = 20.0 / (m - 1) as f64;
        let logs: Vec<f64> = (0..m)
            .map(|j| normal_logpdf(-10.0 + j as f64 * h, 0.0, 1.0))
            .collect();
        assert!(log_trapezoid(&logs, h).abs() < 1e-10);
    }
}
