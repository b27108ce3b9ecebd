use nuv_core::experiments::{
    mcnemar, mcnemar_with, paired_auc, run_experiment, run_experiment_with_progress, ExperimentConfig, McnemarMethod,
};
use nuv_core::{BinSpec, Strategy};
use std::sync::atomic::{AtomicUsize, Ordering};

fn small(regime_general: bool) -> ExperimentConfig {
    let mut cfg = if regime_general { ExperimentConfig::general() } else { ExperimentConfig::spherical() };
    cfg.trials = 100;
    cfg.d_range = (60, 200);
    cfg
}

/// Paired AUC via sorted differences: positive differences are wins, zero
/// differences half-wins.
fn rank_auc(pairs: &[(f64, f64)]) -> f64 {
    let mut diffs: Vec<f64> = pairs.iter().map(|(noise, distorted)| noise - distorted).collect();
    diffs.sort_by(f64::total_cmp);
    let below = diffs.partition_point(|&x| x < 0.0);
    let not_above = diffs.partition_point(|&x| x <= 0.0);
    let wins = diffs.len() - not_above;
    let ties = not_above - below;
    (wins as f64 + 0.5 * ties as f64) / diffs.len() as f64
}

#[test]
fn aggregate_auc_matches_rank_statistic() {
    let cfg = small(true);
    let run = run_experiment(&cfg).unwrap();
    let agg = run.aggregate(cfg.mcnemar).unwrap();
    for cell in &agg.cells {
        let pairs: Vec<(f64, f64)> = run
            .records
            .iter()
            .flat_map(|r| r.cells.iter())
            .filter(|c| c.strategy == cell.strategy && c.bin_spec == cell.bin_spec && c.is_ok())
            .map(|c| (c.d_noise.unwrap(), c.d_distorted.unwrap()))
            .collect();
        assert_eq!(pairs.len(), cell.scored);
        let expected = rank_auc(&pairs);
        assert!((cell.auc - expected).abs() < 1e-12);
        assert!((paired_auc(&pairs).unwrap() - expected).abs() < 1e-12);
    }
}

#[test]
fn runs_are_deterministic_and_thread_independent() {
    let cfg = small(false);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| run_experiment(&cfg)).unwrap();
    let b = four.install(|| run_experiment(&cfg)).unwrap();
    let c = four.install(|| run_experiment(&cfg)).unwrap();
    assert_eq!(a, b);
    assert_eq!(b, c);
    assert_eq!(a.aggregate(cfg.mcnemar).unwrap(), b.aggregate(cfg.mcnemar).unwrap());

    let mut other = cfg.clone();
    other.master_seed += 1;
    assert_ne!(run_experiment(&other).unwrap().records, a.records);
}

#[test]
fn every_trial_covers_the_grid() {
    let cfg = small(true);
    let run = run_experiment(&cfg).unwrap();
    for r in &run.records {
        assert_eq!(r.cells.len(), cfg.strategies.len() * cfg.bin_specs.len());
        for c in &r.cells {
            assert!(c.effective_b <= c.requested_b);
        }
    }
}

#[test]
fn single_bin_cells_always_tie() {
    let mut cfg = small(true);
    cfg.trials = 20;
    cfg.bin_specs = vec![BinSpec::Fixed(1)];
    let run = run_experiment(&cfg).unwrap();
    let agg = run.aggregate(cfg.mcnemar).unwrap();
    for s in Strategy::ALL {
        assert_eq!(agg.strategy(s).unwrap().auc_pooled, 0.5);
    }
}

#[test]
fn progress_reports_every_trial() {
    let cfg = small(true);
    let calls = AtomicUsize::new(0);
    let max = AtomicUsize::new(0);
    run_experiment_with_progress(&cfg, |done, total| {
        assert_eq!(total, cfg.trials);
        calls.fetch_add(1, Ordering::Relaxed);
        max.fetch_max(done, Ordering::Relaxed);
    })
    .unwrap();
    assert_eq!(calls.into_inner(), cfg.trials);
    assert_eq!(max.into_inner(), cfg.trials);
}

#[test]
fn mcnemar_reference_values() {
    assert!((mcnemar(50, 50) - 0.920_344).abs() < 1e-5);
    assert!(mcnemar(50, 0) < 1e-6);
    assert_eq!(mcnemar(0, 0), 1.0);
    // exact two-sided binomial: 2 * (1 + 10) / 2^10
    assert!((mcnemar(1, 9) - 22.0 / 1024.0).abs() < 1e-12);
    assert!((mcnemar_with(1, 9, McnemarMethod::Exact) - 22.0 / 1024.0).abs() < 1e-12);
    assert!(mcnemar_with(1, 9, McnemarMethod::ChiSquare) > 0.0);
}

#[test]
fn invalid_config_is_rejected() {
    let mut cfg = small(true);
    cfg.strategies.clear();
    assert!(run_experiment(&cfg).is_err());
}
