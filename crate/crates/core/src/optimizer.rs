//! Weight fitting for locking (exponentiated-gradient mirror descent) and
//! quacking (multi-start Nelder–Mead), plus an exhaustive grid oracle.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::softmax;
use crate::pooling::{
    hyva_gradient, hyva_objective_raw, quacking_objective, ObjectiveCoefficients,
    QuackParams, SimplexWeights, DEFAULT_ALPHA,
};
use crate::rng::stream;

/// Initial mirror-descent step size.
pub const ETA0: f64 = 0.1;

/// Largest change of any log weight in one mirror-descent step.
pub const MAX_LOG_STEP: f64 = 5.0;

/// Box on quacking exponents.
pub const QUACK_BOUND: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FittedWeights {
    Locking(SimplexWeights),
    Quacking(QuackParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub weights: FittedWeights,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
}

impl FitResult {
    pub fn simplex(&self) -> Option<&SimplexWeights> {
        match &self.weights {
            FittedWeights::Locking(w) => Some(w),
            FittedWeights::Quacking(_) => None,
        }
    }

    pub fn quack(&self) -> Option<&QuackParams> {
        match &self.weights {
            FittedWeights::Quacking(p) => Some(p),
            FittedWeights::Locking(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LockingOptions {
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LockingOptions {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            tol: 1e-8,
            max_iter: 10_000,
        }
    }
}

/// Stationarity measure on the simplex: the gradient projected onto the
/// tangent space in the entropic geometry,
/// `sqrt(sum_k w_k (g_k - sum_j w_j g_j)^2)`.
pub fn simplex_gradient_norm(w: &[f64], g: &[f64]) -> f64 {
    let mean: f64 = w.iter().zip(g).map(|(w, g)| w * g).sum();
    w.iter()
        .zip(g)
        .map(|(w, g)| w * (g - mean) * (g - mean))
        .sum::<f64>()
        .sqrt()
}

pub(crate) struct EgOutcome {
    pub w: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    pub trace: Vec<f64>,
}

/// Exponentiated-gradient descent over the simplex from the uniform point.
///
/// A step is accepted when the objective does not increase, or when it is
/// flat to rounding and the directional derivative at the new point along
/// the step is non-positive (for a convex objective the segment is then
/// non-increasing). Accepted steps double the step size; rejected ones halve
/// it. No single step moves a log weight by more than [`MAX_LOG_STEP`], which
/// keeps iterates off the numerical boundary of the simplex.
pub(crate) fn exponentiated_gradient(
    k: usize,
    value: impl Fn(&[f64]) -> f64,
    grad: impl Fn(&[f64]) -> Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> EgOutcome {
    let mut w = vec![1.0 / k as f64; k];
    let mut f = value(&w);
    let mut g = grad(&w);
    let mut eta = ETA0;
    let mut trace = vec![f];
    let mut iterations = 0;
    let mut gn = simplex_gradient_norm(&w, &g);

    while gn > tol && iterations < max_iter {
        iterations += 1;
        let gmean: f64 = w.iter().zip(&g).map(|(w, g)| w * g).sum();
        let spread = g.iter().map(|g| (g - gmean).abs()).fold(0.0, f64::max);
        eta = eta.min(MAX_LOG_STEP / spread);
        let mut accepted = false;
        while eta * spread > 1e-15 {
            let mut cand: Vec<f64> = w
                .iter()
                .zip(&g)
                .map(|(w, g)| w * (-eta * (g - gmean)).exp())
                .collect();
            let total: f64 = cand.iter().sum();
            cand.iter_mut().for_each(|v| *v /= total);
            let fc = value(&cand);
            if fc.is_finite() {
                let slack = 16.0 * f64::EPSILON * f.abs().max(1.0);
                let ok = fc <= f || {
                    fc <= f + slack && {
                        let gc = grad(&cand);
                        gc.iter().zip(cand.iter().zip(&w)).map(|(g, (c, w))| g * (c - w)).sum::<f64>() <= 0.0
                    }
                };
                if ok {
                    w = cand;
                    f = fc;
                    g = grad(&w);
                    accepted = true;
                    break;
                }
            }
            eta *= 0.5;
        }
        if !accepted {
            break;
        }
        trace.push(f);
        gn = simplex_gradient_norm(&w, &g);
        eta *= 2.0;
    }
    EgOutcome {
        w,
        value: f,
        iterations,
        converged: gn <= tol,
        gradient_norm: gn,
        trace,
    }
}

fn check_coefficients(c: &ObjectiveCoefficients) -> Result<()> {
    for i in 0..c.points() {
        for k in 0..c.models() {
            if !c.a(i, k).is_finite() || !c.b(i, k).is_finite() {
                return Err(invalid(format!("non-finite coefficient at ({i}, {k})")));
            }
        }
    }
    Ok(())
}

/// Minimize the locking objective over the simplex.
pub fn fit_locking(c: &ObjectiveCoefficients, opts: &LockingOptions) -> Result<FitResult> {
    fit_locking_traced(c, opts).map(|(fit, _)| fit)
}

/// As [`fit_locking`], also returning the objective after every accepted
/// iteration.
pub fn fit_locking_traced(c: &ObjectiveCoefficients, opts: &LockingOptions) -> Result<(FitResult, Vec<f64>)> {
    check_coefficients(c)?;
    if !(opts.alpha >= 1.0) {
        return Err(invalid(format!("alpha must be >= 1 for a convex objective, got {}", opts.alpha)));
    }
    let alpha = opts.alpha;
    let out = exponentiated_gradient(
        c.models(),
        |w| hyva_objective_raw(c, w, alpha),
        |w| hyva_gradient(c, w, alpha),
        opts.tol,
        opts.max_iter,
    );
    let mut out = out;
    // Refine unless the iteration budget ran out; mirror descent can also
    // stop by stalling at rounding level just above the tolerance.
    let refined = if out.converged || out.iterations < opts.max_iter {
        newton_refine(c, &out.w, out.value, alpha)
    } else {
        None
    };
    if let Some((w, value)) = refined {
        out.gradient_norm = simplex_gradient_norm(&w, &hyva_gradient(c, &w, alpha));
        out.converged = out.gradient_norm <= opts.tol;
        out.trace.push(value);
        out.w = w;
        out.value = value;
    }
    let fit = FitResult {
        weights: FittedWeights::Locking(SimplexWeights::normalized(out.w)?),
        objective: out.value,
        iterations: out.iterations,
        converged: out.converged,
        gradient_norm: out.gradient_norm,
    };
    Ok((fit, out.trace))
}

/// Equality-constrained Newton steps from an interior point, used to take
/// the mirror-descent solution to full precision. Returns `None` unless the
/// objective strictly decreased.
fn newton_refine(c: &ObjectiveCoefficients, w0: &[f64], f0: f64, alpha: f64) -> Option<(Vec<f64>, f64)> {
    let k = c.models();
    if k < 2 || alpha <= 1.0 || w0.iter().any(|w| *w <= 0.0) {
        return None;
    }
    let stationarity = |w: &[f64]| simplex_gradient_norm(w, &hyva_gradient(c, w, alpha));
    let (mut w, mut f) = (w0.to_vec(), f0);
    let mut r = stationarity(&w);
    let mut improved = false;
    for _ in 0..30 {
        let g = hyva_gradient(c, &w, alpha);
        let mut kkt = DMatrix::<f64>::zeros(k + 1, k + 1);
        for i in 0..c.points() {
            for m in 0..k {
                for n in 0..k {
                    kkt[(m, n)] += 2.0 * c.a(i, m) * c.a(i, n);
                }
            }
        }
        for m in 0..k {
            kkt[(m, m)] += (alpha - 1.0) / (w[m] * w[m]);
            kkt[(m, k)] = 1.0;
            kkt[(k, m)] = 1.0;
        }
        let rhs = DVector::from_iterator(k + 1, g.iter().map(|v| -v).chain([0.0]));
        let d = kkt.lu().solve(&rhs)?;
        let mut t = 1.0;
        let next = loop {
            let cand: Vec<f64> = (0..k).map(|m| w[m] + t * d[m]).collect();
            if cand.iter().all(|v| *v > 0.0) {
                let total: f64 = cand.iter().sum();
                let cand: Vec<f64> = cand.into_iter().map(|v| v / total).collect();
                let fc = hyva_objective_raw(c, &cand, alpha);
                let rc = stationarity(&cand);
                let flat = fc <= f + 16.0 * f64::EPSILON * f.abs().max(1.0);
                if fc < f || (flat && rc < r) {
                    break Some((cand, fc, rc));
                }
            }
            t *= 0.5;
            if t < 1e-10 {
                break None;
            }
        };
        match next {
            Some((cand, fc, rc)) => {
                (w, f, r) = (cand, fc, rc);
                improved = true;
            }
            None => break,
        }
    }
    improved.then_some((w, f))
}

/// Exhaustive search over the simplex lattice with spacing `resolution`
/// (K = 2 or 3). Grid search makes no stationarity claim, so `converged`
/// is false and `gradient_norm` is the stationarity at the returned point.
pub fn grid_oracle(c: &ObjectiveCoefficients, alpha: f64, resolution: f64) -> Result<FitResult> {
    let k = c.models();
    if !(2..=3).contains(&k) {
        return Err(Error::Unsupported(format!("grid oracle supports K = 2 or 3, got {k}")));
    }
    if !(resolution > 0.0 && resolution <= 0.5) {
        return Err(invalid(format!("resolution must lie in (0, 0.5], got {resolution}")));
    }
    let steps = (1.0 / resolution).round() as usize;
    let mut best = (f64::INFINITY, vec![1.0 / k as f64; k]);
    let mut evaluated = 0;
    let mut consider = |w: Vec<f64>| {
        evaluated += 1;
        let f = hyva_objective_raw(c, &w, alpha);
        if f < best.0 {
            best = (f, w);
        }
    };
    if k == 2 {
        for j in 0..=steps {
            let t = j as f64 / steps as f64;
            consider(vec![t, 1.0 - t]);
        }
    } else {
        for i in 0..=steps {
            for j in 0..=steps - i {
                let (a, b) = (i as f64 / steps as f64, j as f64 / steps as f64);
                consider(vec![a, b, (1.0 - a - b).max(0.0)]);
            }
        }
    }
    let (objective, w) = best;
    let gradient_norm = simplex_gradient_norm(&w, &hyva_gradient(c, &w, alpha));
    Ok(FitResult {
        weights: FittedWeights::Locking(SimplexWeights::normalized(w)?),
        objective,
        iterations: evaluated,
        converged: false,
        gradient_norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuackingOptions {
    pub alpha: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Pin `w_0 = 0` and keep `w_1..w_K` on the simplex under the Dirichlet
    /// penalty, so the search space is exactly the locking problem.
    pub nested: bool,
    pub max_evals: usize,
    /// Finite-difference gradient tolerance for declaring convergence.
    pub grad_tol: f64,
}

impl Default for QuackingOptions {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            restarts: 10,
            seed: 0,
            nested: false,
            max_evals: 20_000,
            grad_tol: 1e-3,
        }
    }
}

/// Unconstrained parametrization of the quacking search space.
struct QuackSpace<'a> {
    c: &'a ObjectiveCoefficients,
    alpha: f64,
    nested: bool,
}

impl QuackSpace<'_> {
    fn k(&self) -> usize {
        self.c.models()
    }

    fn decode(&self, x: &[f64]) -> Option<QuackParams> {
        let k = self.k();
        if self.nested {
            let w = SimplexWeights::normalized(softmax(x)).ok()?;
            return Some(QuackParams::locking(&w));
        }
        if x[k..].iter().any(|v| v.abs() > QUACK_BOUND) {
            return None;
        }
        let beta = SimplexWeights::normalized(softmax(&x[..k])).ok()?;
        Some(QuackParams {
            beta,
            w: x[k..].to_vec(),
        })
    }

    fn value(&self, x: &[f64]) -> f64 {
        match self.decode(x) {
            None => f64::INFINITY,
            Some(p) if self.nested => hyva_objective_raw(self.c, &p.w[1..], self.alpha),
            Some(p) => {
                let v = quacking_objective(self.c, &p, self.alpha);
                if v.is_nan() {
                    f64::INFINITY
                } else {
                    v
                }
            }
        }
    }
}

/// Fit the hybrid pool by Nelder–Mead from `restarts` starting points.
///
/// Start 0 is the locking solution padded with `w_0 = 0` and uniform `beta`;
/// the others perturb it randomly. The lowest objective wins, ties going to
/// the lowest start index.
pub fn fit_quacking(c: &ObjectiveCoefficients, opts: &QuackingOptions) -> Result<FitResult> {
    check_coefficients(c)?;
    let restarts = opts.restarts.max(1);
    let lock = fit_locking(
        c,
        &LockingOptions {
            alpha: opts.alpha,
            ..Default::default()
        },
    )?;
    let lw = lock.simplex().expect("locking fit").as_slice().to_vec();
    let space = QuackSpace {
        c,
        alpha: opts.alpha,
        nested: opts.nested,
    };
    let k = c.models();
    let base: Vec<f64> = if opts.nested {
        lw.iter().map(|w| w.max(1e-300).ln()).collect()
    } else {
        let mut x = vec![0.0; k];
        x.push(0.0);
        x.extend(lw.iter().copied());
        x
    };
    let start_value = space.value(&base);

    let mut rng = stream(opts.seed, &[crate::rng::label::QUACKING]);
    let starts: Vec<Vec<f64>> = (0..restarts)
        .map(|r| {
            if r == 0 {
                return base.clone();
            }
            base.iter()
                .enumerate()
                .map(|(j, v)| {
                    let z: f64 = rng.sample(StandardNormal);
                    let scale = if !opts.nested && j >= k { 0.5 } else { 1.0 };
                    let x = v + scale * z;
                    if !opts.nested && j >= k {
                        x.clamp(-QUACK_BOUND + 1e-6, QUACK_BOUND - 1e-6)
                    } else {
                        x
                    }
                })
                .collect()
        })
        .collect();

    let mut best: Option<(f64, Vec<f64>, usize, bool)> = None;
    let mut total_evals = 0;
    for x0 in &starts {
        let mut nm = nelder_mead(|x| space.value(x), x0, 0.25, opts.max_evals, 1e-13);
        total_evals += nm.evals;
        // One restart from the result guards against simplex collapse.
        let again = nelder_mead(|x| space.value(x), &nm.x, 0.05, opts.max_evals, 1e-13);
        total_evals += again.evals;
        if again.value <= nm.value {
            nm = NmOutcome {
                converged: again.converged,
                ..again
            };
        }
        if best.as_ref().is_none_or(|b| nm.value < b.0) {
            best = Some((nm.value, nm.x, nm.evals, nm.converged));
        }
    }
    let (value, x, _, nm_converged) = best.expect("at least one restart");

    let (value, x, improved) = if value < start_value {
        (value, x, true)
    } else {
        (start_value, base, false)
    };
    let gradient_norm = fd_gradient_norm(|x| space.value(x), &x, |j| !opts.nested && j >= k);
    let params = space.decode(&x).expect("feasible optimum");
    Ok(FitResult {
        weights: FittedWeights::Quacking(params),
        objective: value,
        iterations: total_evals,
        converged: improved && nm_converged && gradient_norm <= opts.grad_tol,
        gradient_norm,
    })
}

/// Central-difference gradient norm, projected onto the feasible box: a
/// component pointing out of an active bound is dropped.
fn fd_gradient_norm(f: impl Fn(&[f64]) -> f64, x: &[f64], bounded: impl Fn(usize) -> bool) -> f64 {
    let h = 1e-6;
    let f0 = f(x);
    let mut y = x.to_vec();
    let mut total = 0.0;
    for j in 0..x.len() {
        y[j] = x[j] + h;
        let fp = f(&y);
        y[j] = x[j] - h;
        let fm = f(&y);
        y[j] = x[j];
        let d = if fp.is_finite() && fm.is_finite() {
            (fp - fm) / (2.0 * h)
        } else if fp.is_finite() {
            (fp - f0) / h
        } else {
            (f0 - fm) / h
        };
        let at_upper = bounded(j) && x[j] >= QUACK_BOUND - 1e-5;
        let at_lower = bounded(j) && x[j] <= -QUACK_BOUND + 1e-5;
        if (at_upper && d < 0.0) || (at_lower && d > 0.0) {
            continue;
        }
        total += d * d;
    }
    total.sqrt()
}

pub(crate) struct NmOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Nelder–Mead simplex minimization with standard coefficients.
pub(crate) fn nelder_mead(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    step: f64,
    max_evals: usize,
    ftol: f64,
) -> NmOutcome {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for j in 0..n {
        let mut v = x0.to_vec();
        v[j] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut evals = n + 1;
    let mut converged = false;

    while evals < max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = (values[n] - values[0]).abs();
        let size = simplex[1..]
            .iter()
            .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread <= ftol * (values[0].abs() + 1e-10) && size <= 1e-9 {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };

        let xr = along(-1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = along(-0.5);
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = along(0.5);
            let fc = f(&xc);
            (xc, fc)
        };
        evals += 1;
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        for i in 1..=n {
            let shrunk: Vec<f64> = simplex[i]
                .iter()
                .zip(&simplex[0])
                .map(|(v, b)| b + 0.5 * (v - b))
                .collect();
            values[i] = f(&shrunk);
            simplex[i] = shrunk;
        }
        evals += n;
    }
    let best = crate::numeric::argmin(&values);
    NmOutcome {
        x: simplex[best].clone(),
        value: values[best],
        evals,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pooling::hyva_objective;

    fn random_coeffs(seed: u64, n: usize, k: usize) -> ObjectiveCoefficients {
        let mut rng = stream(seed, &[9]);
        let a = (0..n * k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let b = (0..n * k).map(|_| -rng.random::<f64>() * 2.0).collect();
        ObjectiveCoefficients::from_scores(n, k, a, b).unwrap()
    }

    #[test]
    fn identical_columns_give_uniform() {
        let a: Vec<f64> = (0..20).flat_map(|i| [i as f64 * 0.1, i as f64 * 0.1]).collect();
        let b: Vec<f64> = (0..20).flat_map(|_| [-1.0, -1.0]).collect();
        let c = ObjectiveCoefficients::from_scores(20, 2, a, b).unwrap();
        let fit = fit_locking(&c, &LockingOptions::default()).unwrap();
        let w = fit.simplex().unwrap();
        assert!((w[0] - 0.5).abs() < 1e-12);
        assert!(fit.converged);
    }

    #[test]
    fn single_model_is_trivial() {
        let c = random_coeffs(1, 10, 1);
        let fit = fit_locking(&c, &LockingOptions::default()).unwrap();
        assert_eq!(fit.simplex().unwrap().as_slice(), &[1.0]);
        assert_eq!(fit.iterations, 0);
        assert!(fit.converged);
    }

    #[test]
    fn mirror_descent_is_monotone_and_converges() {
        for seed in 0..20 {
            let c = random_coeffs(seed, 50, 3);
            let (fit, trace) = fit_locking_traced(&c, &LockingOptions::default()).unwrap();
            assert!(fit.converged, "seed {seed}: {fit:?}");
            assert!(fit.gradient_norm <= 1e-8);
            for pair in trace.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-12 * pair[0].abs().max(1.0), "seed {seed}");
            }
            let w = fit.simplex().unwrap();
            assert!((hyva_objective(&c, w, 1.01) - fit.objective).abs() < 1e-12 * fit.objective.abs().max(1.0));
        }
    }

    #[test]
    fn reports_non_convergence() {
        let c = random_coeffs(4, 50, 3);
        let fit = fit_locking(
            &c,
            &LockingOptions {
                max_iter: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 1);
    }

    #[test]
    fn grid_oracle_limits() {
        let c = random_coeffs(1, 10, 4);
        assert!(matches!(grid_oracle(&c, 1.01, 0.01), Err(Error::Unsupported(_))));
        let c3 = random_coeffs(2, 30, 3);
        let g = grid_oracle(&c3, 1.01, 0.01).unwrap();
        let fit = fit_locking(&c3, &LockingOptions::default()).unwrap();
        let (gw, fw) = (g.simplex().unwrap(), fit.simplex().unwrap());
        for k in 0..3 {
            assert!((gw[k] - fw[k]).abs() <= 0.02);
        }
        assert!(fit.objective <= g.objective + 1e-9);
    }

    #[test]
    fn nelder_mead_minimizes_rosenbrock() {
        let out = nelder_mead(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
            0.5,
            20_000,
            1e-15,
        );
        assert!((out.x[0] - 1.0).abs() < 1e-4 && (out.x[1] - 1.0).abs() < 1e-4, "{:?}", out.x);
    }

    #[test]
    fn fit_result_json_fields() {
        let c = random_coeffs(5, 10, 2);
        let fit = fit_locking(&c, &LockingOptions::default()).unwrap();
        let v: serde_json::Value = serde_json::to_value(&fit).unwrap();
        for key in ["weights", "objective", "iterations", "converged"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(v["weights"].is_array());
        let back: FitResult = serde_json::from_value(v).unwrap();
        assert_eq!(back, fit);
    }
}
