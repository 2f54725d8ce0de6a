#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;

use lockstack::rng::{stream, StreamRng};

pub fn rng(seed: u64) -> StreamRng {
    stream(seed, &[0xC0FFEE])
}

pub fn normal_sample(n: usize, mean: f64, sd: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| mean + sd * r.sample::<f64, _>(StandardNormal)).collect()
}

/// One-sample Kolmogorov–Smirnov statistic.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic critical value of the one-sample KS statistic at level 0.01.
pub fn ks_critical_01(n: f64) -> f64 {
    1.628 / n.sqrt()
}

/// Two-sample KS statistic between a weighted sample and an unweighted one.
pub fn ks_two_sample_weighted(values: &[f64], weights: &[f64], other: &[f64]) -> f64 {
    let mut a: Vec<(f64, f64)> = values.iter().copied().zip(weights.iter().copied()).collect();
    a.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut b = other.to_vec();
    b.sort_by(f64::total_cmp);
    let total: f64 = weights.iter().sum();
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0, 0.0);
    let mut d: f64 = 0.0;
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) => x.0.min(*y),
            (Some(x), None) => x.0,
            (None, Some(y)) => *y,
            (None, None) => break,
        };
        while i < a.len() && a[i].0 <= next {
            fa += a[i].1 / total;
            i += 1;
        }
        while j < b.len() && b[j] <= next {
            fb += 1.0 / b.len() as f64;
            j += 1;
        }
        d = d.max((fa - fb).abs());
    }
    d
}
