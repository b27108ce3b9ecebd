//! Monte-Carlo harness for the pattern-recognition experiments.
//!
//! Each trial samples a template, a pure-noise window and a distorted noisy
//! copy of the template, bins the template with every strategy and bin
//! count, and records whether the distorted copy is closer to the template
//! than the noise window. Trials run in parallel; each owns a generator
//! derived from the master seed and its index, and records are folded in
//! index order, so results do not depend on the thread count.

mod aggregate;
mod config;
mod stats;
mod trial;

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use aggregate::{aggregate, Alignment, AggregateResult, CellSummary, McnemarMatrix, StrategySummary};
pub use config::{ExperimentConfig, Regime};
pub use stats::{mcnemar, mcnemar_with, paired_auc, McnemarMethod};
pub use trial::{
    run_trial, sample_template, sample_trial, CellRecord, TemplateDistribution, TemplateMeta, TrialRecord,
    TrialSample,
};

use crate::error::Result;

/// A trial that could not be sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial_index: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRun {
    pub records: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
}

impl ExperimentRun {
    pub fn aggregate(&self, method: McnemarMethod) -> Result<AggregateResult> {
        aggregate(&self.records, self.failures.len(), method)
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentRun> {
    run_experiment_with_progress(cfg, |_, _| {})
}

/// Runs every trial on the current rayon pool. `progress(done, total)` is
/// called after each trial from whichever worker finished it.
pub fn run_experiment_with_progress<F>(cfg: &ExperimentConfig, progress: F) -> Result<ExperimentRun>
where
    F: Fn(usize, usize) + Sync,
{
    cfg.validate()?;
    let done = AtomicUsize::new(0);
    let outcomes: Vec<(u64, Result<TrialRecord>)> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|i| {
            let r = run_trial(cfg, i);
            progress(done.fetch_add(1, Ordering::Relaxed) + 1, cfg.trials);
            (i, r)
        })
        .collect();

    let mut records = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for (trial_index, outcome) in outcomes {
        match outcome {
            Ok(r) => records.push(r),
            Err(e) => failures.push(TrialFailure { trial_index, reason: e.to_string() }),
        }
    }
    Ok(ExperimentRun { records, failures })
}
