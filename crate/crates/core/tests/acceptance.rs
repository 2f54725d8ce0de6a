//! End-to-end acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the report is always
//! printed. Criteria 1 to 9 each emit a CSV buffer; criterion 10 reruns them
//! and compares the bytes.

mod common;

use std::fmt::Write as _;
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use lockstack::baselines::Method;
use lockstack::experiments::{
    fit_normal_models, locked_gaussian_moments, overfit_gaps, run_nonnested, run_overfit, NonnestedConfig,
    OverfitConfig, ReplicationResult,
};
use lockstack::grid::{locking_grid, mixture_grid, superposition_grid, GridDensity, DEFAULT_GRID_SIZE};
use lockstack::io::{format_float, write_overfit, write_results, write_samples};
use lockstack::models::{simulate_scenario, Draws, M1Posterior, ScenarioConfig};
use lockstack::numeric::{mean, normal_logpdf, student_t_logpdf, variance};
use lockstack::optimizer::{fit_locking, grid_oracle, LockingOptions};
use lockstack::pooling::{
    hyva_gradient, locking_scores, quacking_scores, ObjectiveCoefficients, QuackParams, SimplexWeights,
};
use lockstack::predictive::{build_eval_tensor, ScoreOptions, ScoreTable};
use lockstack::sampler::{mode_bound_check, sample_locked};

use common::{normal_sample, rng};

struct Outcome {
    pass: bool,
    detail: String,
    csv: Vec<u8>,
}

fn outcome(pass: bool, detail: String, csv: Vec<u8>) -> Outcome {
    Outcome { pass, detail, csv }
}

fn f(v: f64) -> String {
    format_float(v)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let data = normal_sample(200, 1.0, 1.0, 101);
    let post = M1Posterior::from_data(&data, 10.0).unwrap();
    let draws = post.draws(4000, &mut rng(102));
    let (mu, var) = post.predictive();
    let pts: Vec<f64> = (0..50).map(|j| mu - 2.5 + 5.0 * j as f64 / 49.0).collect();
    let t = build_eval_tensor(std::slice::from_ref(&draws), &pts).unwrap();
    let table = ScoreTable::from_tensor(&t, ScoreOptions::in_sample());
    let (mut ok_grad, mut ok_lap) = (0, 0);
    let mut csv = String::from("y,grad,grad_mcse,lap,lap_mcse\n");
    for (i, y) in pts.iter().enumerate() {
        let c = table.get(0, i);
        ok_grad += usize::from((c.grad + (y - mu) / var).abs() <= 3.0 * c.grad_mcse);
        ok_lap += usize::from((c.lap + 1.0 / var).abs() <= 3.0 * c.lap_mcse);
        writeln!(csv, "{},{},{},{},{}", f(*y), f(c.grad), f(c.grad_mcse), f(c.lap), f(c.lap_mcse)).unwrap();
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        ok_grad >= 48 && ok_lap >= 48 && secs < 10.0,
        format!("estimator-oracle agreement: grad {ok_grad}/50, lap {ok_lap}/50 within 3 MCSE (need 48), {secs:.2} s"),
        csv.into_bytes(),
    )
}

fn criterion_2() -> Outcome {
    let d = Draws::gaussian("std", 0.0, 1.0);
    let ys = [0.0, 1.0, 2.0];
    let t = build_eval_tensor(std::slice::from_ref(&d), &ys).unwrap();
    let table = ScoreTable::from_tensor(&t, ScoreOptions::in_sample());
    let mut worst: f64 = 0.0;
    let mut csv = String::from("y,hyva\n");
    for (i, y) in ys.iter().enumerate() {
        let h = table.get(0, i).hyva;
        worst = worst.max((h - (y * y - 2.0)).abs());
        writeln!(csv, "{},{}", f(*y), f(h)).unwrap();
    }
    outcome(
        worst <= 1e-12,
        format!("exact score identity H(y) = y^2 - 2: max error {worst:.1e} (tol 1e-12)"),
        csv.into_bytes(),
    )
}

/// Per-point in-sample vs leave-one-out log density for every fitted model
/// of the non-nested runs, plus every overfitting row.
fn criterion_3(cfgs: &[NonnestedConfig], overfit: &OverfitConfig) -> Outcome {
    let (mut checked, mut violations) = (0usize, 0usize);
    let mut csv = String::from("scenario,replication,model,violations\n");
    for (s, cfg) in cfgs.iter().enumerate() {
        for rep in 0..cfg.scenario.replications as u64 {
            let (train, _) = simulate_scenario(&cfg.scenario, rep).unwrap();
            let models = fit_normal_models(cfg, &train, rep).unwrap();
            let t = build_eval_tensor(&models, &train).unwrap();
            let ins = ScoreTable::from_tensor(&t, ScoreOptions::in_sample());
            let loo = ScoreTable::from_tensor(&t, ScoreOptions::default());
            for k in 0..models.len() {
                let bad = (0..train.len())
                    .filter(|&i| !(ins.get(k, i).log_density >= loo.get(k, i).log_density))
                    .count();
                checked += train.len();
                violations += bad;
                writeln!(csv, "{},{rep},{k},{bad}", s + 1).unwrap();
            }
        }
    }
    let rows = run_overfit(overfit).unwrap();
    let bad_rows = rows.iter().filter(|r| !(r.insample_lpd >= r.loo_lpd)).count();
    writeln!(csv, "overfit,all,regression,{bad_rows}").unwrap();
    outcome(
        violations == 0 && bad_rows == 0,
        format!(
            "in-sample >= leave-one-out: {violations} violations over {checked} point-model pairs, {bad_rows} over {} regression fits",
            rows.len()
        ),
        csv.into_bytes(),
    )
}

fn random_k2_coefficients(r: &mut impl Rng, n: usize) -> ObjectiveCoefficients {
    let a: Vec<f64> = (0..2 * n).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
    let b: Vec<f64> = (0..2 * n).map(|_| r.random_range(-2.0..0.5)).collect();
    ObjectiveCoefficients::from_scores(n, 2, a, b).unwrap()
}

fn criterion_4() -> Outcome {
    let mut r = rng(404);
    let mut worst_w: f64 = 0.0;
    let mut csv = String::from("trial,fit_w1,grid_w1\n");
    for trial in 0..100 {
        let n = r.random_range(5..80);
        let c = random_k2_coefficients(&mut r, n);
        let fit = fit_locking(&c, &LockingOptions::default()).unwrap();
        let grid = grid_oracle(&c, 1.01, 1e-3).unwrap();
        let (fw, gw) = (fit.simplex().unwrap()[0], grid.simplex().unwrap()[0]);
        worst_w = worst_w.max((fw - gw).abs());
        writeln!(csv, "{trial},{},{}", f(fw), f(gw)).unwrap();
    }
    let mut worst_g: f64 = 0.0;
    for _ in 0..100 {
        let c = random_k2_coefficients(&mut r, 40);
        let t: f64 = r.random_range(0.02..0.98);
        let w = [t, 1.0 - t];
        let g = hyva_gradient(&c, &w, 1.01);
        let value = |v: &[f64]| -> f64 {
            let mut total = 0.0;
            for i in 0..c.points() {
                let q1 = v[0] * c.a(i, 0) + v[1] * c.a(i, 1);
                let q2 = v[0] * c.b(i, 0) + v[1] * c.b(i, 1);
                total += 2.0 * q2 + q1 * q1;
            }
            total - 0.01 * (v[0].ln() + v[1].ln())
        };
        for m in 0..2 {
            let h = 1e-6 * w[m];
            let (mut up, mut dn) = (w, w);
            up[m] += h;
            dn[m] -= h;
            let fd = (value(&up) - value(&dn)) / (2.0 * h);
            worst_g = worst_g.max((fd - g[m]).abs() / g[m].abs().max(1.0));
        }
    }
    outcome(
        worst_w <= 2e-3 && worst_g <= 1e-5,
        format!("convex solver: max |fit - grid| w1 {worst_w:.2e} (tol 2e-3), max gradient rel. error {worst_g:.2e} (tol 1e-5)"),
        csv.into_bytes(),
    )
}

fn scenario_configs(replications: usize) -> Vec<NonnestedConfig> {
    (1..=4)
        .map(|id| {
            let mut scenario = ScenarioConfig::preset(id).unwrap();
            scenario.replications = replications;
            NonnestedConfig {
                scenario,
                ..Default::default()
            }
        })
        .collect()
}

const SIX: [Method; 6] = [
    Method::MlSelect,
    Method::Bma,
    Method::LooSelect,
    Method::Stacking,
    Method::HyvaSelect,
    Method::Locking,
];

/// Paired comparison of locking against the best of the six methods.
/// Returns (best method, mean difference best - locking, paired SE).
fn locking_vs_best(results: &[ReplicationResult]) -> (Method, f64, f64) {
    let scores = |m: Method| -> Vec<f64> { results.iter().map(|r| r.report(m).test_log_score).collect() };
    let best = SIX
        .into_iter()
        .max_by(|a, b| mean(&scores(*a)).total_cmp(&mean(&scores(*b))))
        .unwrap();
    let diffs: Vec<f64> = scores(best).iter().zip(scores(Method::Locking)).map(|(b, l)| b - l).collect();
    let se = if diffs.len() > 1 {
        (variance(&diffs) / diffs.len() as f64).sqrt()
    } else {
        0.0
    };
    (best, mean(&diffs), se)
}

fn criterion_5(cfgs: &[NonnestedConfig]) -> Outcome {
    let start = Instant::now();
    let mut csv = Vec::new();
    let mut all: Vec<Vec<ReplicationResult>> = Vec::new();
    let mut failures = 0;
    for (s, cfg) in cfgs.iter().enumerate() {
        let mut ok = Vec::new();
        for r in run_nonnested(cfg) {
            match r {
                Ok(r) => ok.push(r),
                Err(_) => failures += 1,
            }
        }
        write_results(&mut csv, None, s as u8 + 1, &ok).unwrap();
        all.push(ok);
    }
    let secs = start.elapsed().as_secs_f64();
    let w1 = |res: &[ReplicationResult], m: Method| mean(&res.iter().map(|r| r.report(m).weights[0]).collect::<Vec<_>>());
    let (bma1, ml1) = (w1(&all[0], Method::Bma), w1(&all[0], Method::MlSelect));
    let hyva_m2 = all[1].iter().filter(|r| r.report(Method::HyvaSelect).weights[1] == 1.0).count();
    let hyva_frac = hyva_m2 as f64 / all[1].len().max(1) as f64;
    let mut lock_ok = true;
    let mut lock_detail = Vec::new();
    for (s, res) in all.iter().enumerate() {
        let (best, diff, se) = locking_vs_best(res);
        let ok = diff <= 2.0 * se;
        lock_ok &= ok;
        lock_detail.push(format!("s{}: best {best}, gap {diff:.3} vs 2SE {:.3}", s + 1, 2.0 * se));
    }
    let pass = failures == 0 && bma1 >= 0.95 && ml1 >= 0.95 && hyva_frac >= 0.9 && lock_ok && secs < 600.0;
    outcome(
        pass,
        format!(
            "scenario trends: s1 mean w1 BMA {bma1:.3}, ML {ml1:.3} (need >= 0.95); s2 Hyvarinen picks M2 {hyva_m2}/{} (need >= 90%); locking within 2 paired SE of best [{}]; {failures} failed replications; {secs:.1} s (limit 600 s)",
            all[1].len(),
            lock_detail.join("; ")
        ),
        csv,
    )
}

fn criterion_6(cfg: &OverfitConfig) -> Outcome {
    let rows = run_overfit(cfg).unwrap();
    let mut csv = Vec::new();
    write_overfit(&mut csv, None, &rows).unwrap();
    let gaps = overfit_gaps(&rows);
    let first = gaps.iter().find(|g| g.0 == 1).unwrap();
    let last = gaps.iter().find(|g| g.0 == 100).unwrap();
    let lpd_growth = last.1 / first.1;
    let hyva_growth = last.2 / first.2;
    outcome(
        lpd_growth >= 5.0 && hyva_growth < lpd_growth,
        format!(
            "overfitting trend: log-score gap {:.3} -> {:.3} (x{lpd_growth:.1}, need >= 5), Hyvarinen gap {:.3} -> {:.3} (x{hyva_growth:.1}, need < x{lpd_growth:.1})",
            first.1, last.1, first.2, last.2
        ),
        csv,
    )
}

fn random_unimodal(r: &mut impl Rng) -> GridDensity {
    let loc: f64 = r.random_range(-5.0..5.0);
    let scale: f64 = r.random_range(0.5..3.0);
    if r.random_bool(0.5) {
        GridDensity::from_log_fn(-30.0, 30.0, DEFAULT_GRID_SIZE, |y| normal_logpdf(y, loc, scale * scale)).unwrap()
    } else {
        let df: f64 = r.random_range(1.0..30.0);
        GridDensity::from_log_fn(-30.0, 30.0, DEFAULT_GRID_SIZE, |y| student_t_logpdf(y, loc, scale, df)).unwrap()
    }
}

fn criterion_7() -> Outcome {
    let mut r = rng(707);
    let mut violations = 0;
    let mut csv = String::from("trial,holds\n");
    for trial in 0..500 {
        let comps = [random_unimodal(&mut r), random_unimodal(&mut r)];
        let w1: f64 = r.random_range(0.0..1.0);
        let report = mode_bound_check(&comps, &SimplexWeights::new(vec![w1, 1.0 - w1]).unwrap()).unwrap();
        let holds = report.holds() == Some(true);
        violations += usize::from(!holds);
        writeln!(csv, "{trial},{holds}").unwrap();
    }
    outcome(
        violations == 0,
        format!("mode bound on 500 random Gaussian/Student-t pairs: {violations} violations"),
        csv.into_bytes(),
    )
}

fn criterion_8() -> Outcome {
    let a = GridDensity::from_log_fn(-10.0, 10.0, DEFAULT_GRID_SIZE, |y| normal_logpdf(y, -2.0, 1.0)).unwrap();
    let b = GridDensity::from_log_fn(-10.0, 10.0, DEFAULT_GRID_SIZE, |y| student_t_logpdf(y, 1.5, 0.8, 4.0)).unwrap();
    let w = [0.3, 0.7];
    let sup = superposition_grid(&[a.clone(), b.clone()], &w, &[0.0, std::f64::consts::FRAC_PI_2]).unwrap();
    let mix = mixture_grid(&[a.clone(), b.clone()], &w).unwrap();
    let mix_err = sup
        .densities()
        .iter()
        .zip(mix.densities())
        .map(|(s, m)| (s - m).abs())
        .fold(0.0, f64::max);
    let same = superposition_grid(&[b.clone(), b.clone()], &w, &[0.0, 0.0]).unwrap();
    let b_norm = b.clone().normalize().unwrap();
    let same_err = same
        .densities()
        .iter()
        .zip(b_norm.densities())
        .map(|(s, m)| (s - m).abs())
        .fold(0.0, f64::max);

    let mut r = rng(808);
    let mut score_err: f64 = 0.0;
    for _ in 0..100 {
        let (n, k) = (30, 3);
        let a: Vec<f64> = (0..n * k).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let bb: Vec<f64> = (0..n * k).map(|_| r.random_range(-3.0..0.5)).collect();
        let ld: Vec<f64> = (0..n * k).map(|_| r.random_range(-6.0..0.0)).collect();
        let c = ObjectiveCoefficients::new(n, k, a, bb, ld).unwrap();
        let wk = SimplexWeights::normalized((0..k).map(|_| r.random_range(0.01..1.0)).collect()).unwrap();
        let beta = SimplexWeights::normalized((0..k).map(|_| r.random_range(0.01..1.0)).collect()).unwrap();
        let mut exps = vec![0.0];
        exps.extend_from_slice(wk.as_slice());
        let (l1, l2) = locking_scores(&c, &wk);
        let (q1, q2) = quacking_scores(&c, &QuackParams::new(beta, exps).unwrap());
        for i in 0..n {
            score_err = score_err.max((l1[i] - q1[i]).abs()).max((l2[i] - q2[i]).abs());
        }
    }
    let mut csv = String::from("x,superposition,mixture,locking\n");
    let lock = locking_grid(&[a, b], &w).unwrap();
    for j in (0..sup.len()).step_by(100) {
        writeln!(csv, "{},{},{},{}", f(sup.x(j)), f(sup.logvals[j]), f(mix.logvals[j]), f(lock.logvals[j])).unwrap();
    }
    outcome(
        mix_err <= 1e-12 && same_err <= 1e-12 && score_err <= 1e-9,
        format!(
            "superposition identities: phase pi/2 vs mixture {mix_err:.1e}, identical components {same_err:.1e} (tol 1e-12); quacking w0 = 0 vs locking scores {score_err:.1e} (tol 1e-9)"
        ),
        csv.into_bytes(),
    )
}

fn criterion_9() -> Outcome {
    let models = vec![Draws::gaussian("a", -1.0, 1.0), Draws::gaussian("b", 1.0, 1.0)];
    let s = sample_locked(&models, &SimplexWeights::uniform(2), 20_000, 909).unwrap();
    let (mean_exact, var_exact) = locked_gaussian_moments(&[-1.0, 1.0], &[1.0, 1.0], &[0.5, 0.5]);
    let m = s.moments();
    let k = s.pareto_k.unwrap_or(f64::INFINITY);
    let zm = (m.mean - mean_exact).abs() / m.mean_se;
    let zv = (m.var - var_exact).abs() / m.var_se;
    let mut csv = Vec::new();
    write_samples(&mut csv, None, &s).unwrap();
    outcome(
        zm < 3.0 && zv < 3.0 && k < 0.7,
        format!("locked sampling: mean {:.4} ({zm:.2} SE), variance {:.4} ({zv:.2} SE), Pareto k {k:.3} (need < 0.7)", m.mean, m.var),
        csv,
    )
}

fn run_all(cfgs: &[NonnestedConfig], overfit: &OverfitConfig) -> Vec<Outcome> {
    vec![
        criterion_1(),
        criterion_2(),
        criterion_3(cfgs, overfit),
        criterion_4(),
        criterion_5(cfgs),
        criterion_6(overfit),
        criterion_7(),
        criterion_8(),
        criterion_9(),
    ]
}

fn main() -> ExitCode {
    let cfgs = scenario_configs(20);
    let overfit = OverfitConfig::default();
    let first = run_all(&cfgs, &overfit);
    let mut all_pass = true;
    for (i, o) in first.iter().enumerate() {
        println!("criterion {:>2} {} {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        all_pass &= o.pass;
    }
    let second = run_all(&cfgs, &overfit);
    let differing: Vec<usize> = first
        .iter()
        .zip(&second)
        .enumerate()
        .filter(|(_, (a, b))| a.csv != b.csv)
        .map(|(i, _)| i + 1)
        .collect();
    let bytes: usize = first.iter().map(|o| o.csv.len()).sum();
    let det = differing.is_empty();
    println!(
        "criterion 10 {} determinism: rerun of criteria 1-9 gives byte-identical CSVs ({bytes} bytes compared, differing: {differing:?})",
        if det { "PASS" } else { "FAIL" }
    );
    all_pass &= det;
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
