use lockstack::baselines::Method;
use lockstack::experiments::{run_nonnested, run_replication, NonnestedConfig};
use lockstack::io::{read_overfit, write_overfit, write_results};
use lockstack::models::ScenarioConfig;

fn config(id: u8, replications: usize, draws: usize) -> NonnestedConfig {
    let mut scenario = ScenarioConfig::preset(id).unwrap();
    scenario.replications = replications;
    NonnestedConfig {
        scenario,
        draws,
        ..Default::default()
    }
}

#[test]
fn both_correct_models_share_locking_weight() {
    let results: Vec<_> = run_nonnested(&config(4, 20, 4000)).into_iter().map(|r| r.unwrap()).collect();
    let dev: f64 = results
        .iter()
        .map(|r| (r.report(Method::Locking).weights[0] - 0.5).abs())
        .sum::<f64>()
        / results.len() as f64;
    assert!(dev < 0.25, "mean |w1 - 1/2| = {dev}");
}

#[test]
fn every_method_reports_finite_scores() {
    for id in 1..=4 {
        let r = run_replication(&config(id, 1, 400), 0).unwrap();
        assert_eq!(r.reports.len(), Method::ALL.len());
        for rep in &r.reports {
            assert!(rep.test_log_score.is_finite() && rep.test_hyva_score.is_finite(), "{rep:?}");
            assert!((rep.weights.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(r.locking_fit.converged);
    }
}

#[test]
fn replications_are_independent_of_batch() {
    let cfg = config(3, 3, 300);
    let batch: Vec<_> = run_nonnested(&cfg).into_iter().map(|r| r.unwrap()).collect();
    let alone = run_replication(&cfg, 2).unwrap();
    assert_eq!(batch[2], alone);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    write_results(&mut a, Some("x"), 3, &batch).unwrap();
    write_results(&mut b, Some("x"), 3, &run_nonnested(&cfg).into_iter().map(|r| r.unwrap()).collect::<Vec<_>>()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn overfit_rows_round_trip() {
    use lockstack::experiments::{run_overfit, OverfitConfig};
    let cfg = OverfitConfig {
        p_list: vec![1, 5],
        iterations: 2,
        n: 30,
        draws: 300,
        warmup: 100,
        ..Default::default()
    };
    let rows = run_overfit(&cfg).unwrap();
    let mut buf = Vec::new();
    write_overfit(&mut buf, Some("manifest: abc"), &rows).unwrap();
    assert_eq!(read_overfit(buf.as_slice()).unwrap(), rows);
}
