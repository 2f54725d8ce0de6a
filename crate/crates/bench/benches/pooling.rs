//! Throughput of the evaluation-table pipeline at the non-nested experiment
//! scale (2 models, 200 points, 4000 draws).

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use lockstack::experiments::{fit_normal_models, NonnestedConfig};
use lockstack::models::simulate_scenario;
use lockstack::optimizer::{fit_locking, fit_quacking, LockingOptions, QuackingOptions};
use lockstack::pooling::ObjectiveCoefficients;
use lockstack::predictive::{build_eval_tensor, EvalTensor, ScoreOptions, ScoreTable};
use lockstack::psis::psis_fit;

fn tensor() -> EvalTensor {
    let cfg = NonnestedConfig::default();
    let (train, _) = simulate_scenario(&cfg.scenario, 0).unwrap();
    let models = fit_normal_models(&cfg, &train, 0).unwrap();
    build_eval_tensor(&models, &train).unwrap()
}

fn evaluation(c: &mut Criterion) {
    let cfg = NonnestedConfig::default();
    let (train, _) = simulate_scenario(&cfg.scenario, 0).unwrap();
    let models = fit_normal_models(&cfg, &train, 0).unwrap();
    c.bench_function("build_eval_tensor", |b| {
        b.iter(|| build_eval_tensor(black_box(&models), black_box(&train)).unwrap())
    });
    let t = tensor();
    c.bench_function("score_table_loo", |b| {
        b.iter(|| ScoreTable::from_tensor(black_box(&t), ScoreOptions::default()))
    });
    c.bench_function("score_table_in_sample", |b| {
        b.iter(|| ScoreTable::from_tensor(black_box(&t), ScoreOptions::in_sample()))
    });
    let raw: Vec<f64> = t.cell(0, 0).loglik.iter().map(|l| -l).collect();
    c.bench_function("psis_fit_4000", |b| b.iter(|| psis_fit(black_box(&raw))));
}

fn fitting(c: &mut Criterion) {
    let coeffs = ObjectiveCoefficients::from_table(&ScoreTable::from_tensor(&tensor(), ScoreOptions::default()));
    c.bench_function("fit_locking", |b| {
        b.iter(|| fit_locking(black_box(&coeffs), &LockingOptions::default()).unwrap())
    });
    c.bench_function("fit_quacking", |b| {
        b.iter(|| fit_quacking(black_box(&coeffs), &QuackingOptions::default()).unwrap())
    });
}

criterion_group!(benches, evaluation, fitting);
criterion_main!(benches);
