//! The `simulate` subcommand and its three artifacts.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use nuv_core::experiments::{
    run_experiment_with_progress, AggregateResult, ExperimentConfig, ExperimentRun, Regime, TrialFailure,
};
use serde::{Deserialize, Serialize};

use crate::commands::sig12;
use crate::{CliError, SimulateArgs};

/// Everything needed to rerun an experiment.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub created_unix_seconds: u64,
    pub master_seed: u64,
    pub threads: Option<usize>,
    pub config: ExperimentConfig,
}

#[derive(Serialize)]
struct AggregateFile<'a> {
    #[serde(flatten)]
    aggregate: &'a AggregateResult,
    trial_failures: &'a [TrialFailure],
}

/// One row per (trial, strategy, bin spec).
#[derive(Serialize)]
struct TrialRow<'a> {
    trial_index: u64,
    d: usize,
    d_tau: usize,
    distribution: &'a str,
    gamma: f64,
    sigma2: f64,
    sigma2_m: Option<f64>,
    model_hash: Option<&'a str>,
    strategy: &'a str,
    bin_spec: String,
    requested_b: usize,
    effective_b: usize,
    status: &'a str,
    failure: Option<&'a str>,
    d_noise: Option<f64>,
    d_distorted: Option<f64>,
    prediction_noise: Option<f64>,
    prediction_distorted: Option<f64>,
    recognized: Option<bool>,
    tie: Option<bool>,
    greedy_objective: Option<f64>,
}

fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
    if let Ok(manifest) = serde_json::from_str::<RunManifest>(&text) {
        return Ok(manifest.config);
    }
    serde_json::from_str(&text).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))
}

fn build_config(args: &SimulateArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let mut cfg = load_config(path)?;
            if let Some(regime) = args.regime {
                cfg.regime = regime;
            }
            cfg
        }
        None => ExperimentConfig::new(args.regime.unwrap_or(Regime::General)),
    };
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    if let Some(lo) = args.d_min {
        cfg.d_range.0 = lo;
    }
    if let Some(hi) = args.d_max {
        cfg.d_range.1 = hi;
    }
    if let Some(s) = &args.strategies {
        cfg.strategies = s.clone();
    }
    if let Some(b) = &args.bin_specs {
        cfg.bin_specs = b.clone();
    }
    if let Some(r) = args.restarts {
        cfg.greedy_restarts = r;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn pretty<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

fn trials_csv(run: &ExperimentRun) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for r in &run.records {
        for c in &r.cells {
            w.serialize(TrialRow {
                trial_index: r.trial_index,
                d: r.d,
                d_tau: r.d_tau,
                distribution: r.distribution.name(),
                gamma: r.gamma,
                sigma2: r.sigma2,
                sigma2_m: r.sigma2_m,
                model_hash: r.model_hash.as_deref(),
                strategy: c.strategy.name(),
                bin_spec: c.bin_spec.to_string(),
                requested_b: c.requested_b,
                effective_b: c.effective_b,
                status: if c.is_ok() { "ok" } else { "failed" },
                failure: c.failure.as_deref(),
                d_noise: c.d_noise,
                d_distorted: c.d_distorted,
                prediction_noise: c.prediction_noise,
                prediction_distorted: c.prediction_distorted,
                recognized: c.recognized,
                tie: c.tie,
                greedy_objective: c.greedy_objective,
            })
            .map_err(|e| CliError::io(e.to_string()))?;
        }
    }
    w.into_inner().map_err(|e| CliError::io(e.to_string()))
}

fn print_summary(agg: &AggregateResult) {
    println!(
        "trials used {}, trials failed {}, cells failed {}",
        agg.trials_used, agg.trials_failed, agg.cells_failed
    );
    println!("{:<8} {:>10} {:>14}", "strategy", "auc", "auc(mean spec)");
    for s in &agg.strategies {
        println!("{:<8} {:>10} {:>14}", s.strategy.name(), format!("{:.4}", s.auc_pooled), format!("{:.4}", s.auc_mean_of_specs));
    }
    println!(
        "noise:     measured {} predicted {} relative difference {}",
        sig12(agg.alignment_noise.mean_measured),
        sig12(agg.alignment_noise.mean_predicted),
        sig12(agg.alignment_noise.relative_difference)
    );
    println!(
        "distorted: measured {} predicted {} relative difference {}",
        sig12(agg.alignment_distorted.mean_measured),
        sig12(agg.alignment_distorted.mean_predicted),
        sig12(agg.alignment_distorted.relative_difference)
    );
}

pub fn simulate(args: SimulateArgs, threads: Option<usize>) -> Result<(), CliError> {
    let cfg = build_config(&args)?;
    fs::create_dir_all(&args.output)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", args.output.display())))?;

    let quiet = args.quiet;
    let step = (cfg.trials / 100).max(1);
    let run = run_experiment_with_progress(&cfg, |done, total| {
        if !quiet && (done % step == 0 || done == total) {
            let mut err = std::io::stderr().lock();
            let _ = write!(err, "\rtrial {done}/{total}");
            if done == total {
                let _ = writeln!(err);
            }
        }
    })?;
    let agg = run.aggregate(cfg.mcnemar)?;

    let manifest = RunManifest {
        tool: "nuv".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        created_unix_seconds: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        master_seed: cfg.master_seed,
        threads,
        config: cfg.clone(),
    };
    let aggregate_json = pretty(&AggregateFile { aggregate: &agg, trial_failures: &run.failures })?;

    write_file(&args.output.join("trials.csv"), &trials_csv(&run)?)?;
    write_file(&args.output.join("aggregate.json"), aggregate_json.as_bytes())?;
    write_file(&args.output.join("manifest.json"), pretty(&manifest)?.as_bytes())?;

    if args.json {
        println!("{aggregate_json}");
    } else {
        print_summary(&agg);
    }
    Ok(())
}
