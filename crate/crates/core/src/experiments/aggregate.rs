//! Folding trial records into AUC, prediction alignment and McNemar tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::stats::{mcnemar_with, McnemarMethod};
use super::trial::{CellRecord, TrialRecord};
use crate::binning::{BinSpec, Strategy};
use crate::error::{NuvError, Result};

/// Measured versus predicted means for one population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub mean_measured: f64,
    pub mean_predicted: f64,
    /// `|measured - predicted| / predicted`.
    pub relative_difference: f64,
}

impl Alignment {
    fn from_sums(measured: f64, predicted: f64, n: usize) -> Self {
        let mean_measured = measured / n as f64;
        let mean_predicted = predicted / n as f64;
        Self {
            mean_measured,
            mean_predicted,
            relative_difference: (mean_measured - mean_predicted).abs() / mean_predicted.abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub strategy: Strategy,
    pub bin_spec: BinSpec,
    pub scored: usize,
    pub failed: usize,
    pub recognized: usize,
    pub ties: usize,
    pub auc: f64,
    pub mean_effective_b: f64,
    pub noise: Alignment,
    pub distorted: Alignment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub scored: usize,
    /// AUC over trial-level outcomes pooled across bin specs.
    pub auc_pooled: f64,
    /// Mean of the per-bin-spec AUCs.
    pub auc_mean_of_specs: f64,
    pub noise: Alignment,
    pub distorted: Alignment,
}

/// Pairwise McNemar tests over strategies, using strict recognition bits
/// pooled across bin specs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McnemarMatrix {
    pub strategies: Vec<Strategy>,
    pub p_values: Vec<Vec<f64>>,
    /// `discordant[a][b] = (n01, n10)`: pairs where only `b` recognized,
    /// and pairs where only `a` recognized.
    pub discordant: Vec<Vec<(u64, u64)>>,
}

impl McnemarMatrix {
    pub fn p_value(&self, a: Strategy, b: Strategy) -> Option<f64> {
        let i = self.strategies.iter().position(|&s| s == a)?;
        let j = self.strategies.iter().position(|&s| s == b)?;
        Some(self.p_values[i][j])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub trials_used: usize,
    pub trials_failed: usize,
    pub cells_failed: usize,
    pub cells: Vec<CellSummary>,
    pub strategies: Vec<StrategySummary>,
    /// Pooled over every scored cell.
    pub alignment_noise: Alignment,
    pub alignment_distorted: Alignment,
    /// Largest per-cell relative difference for each population.
    pub max_cell_relative_difference_noise: f64,
    pub max_cell_relative_difference_distorted: f64,
    pub mcnemar: McnemarMatrix,
}

impl AggregateResult {
    pub fn strategy(&self, s: Strategy) -> Option<&StrategySummary> {
        self.strategies.iter().find(|x| x.strategy == s)
    }

    pub fn cell(&self, s: Strategy, spec: BinSpec) -> Option<&CellSummary> {
        self.cells.iter().find(|x| x.strategy == s && x.bin_spec == spec)
    }
}

#[derive(Default)]
struct Acc {
    scored: usize,
    failed: usize,
    recognized: usize,
    ties: usize,
    credit: f64,
    effective_b: f64,
    noise: (f64, f64),
    distorted: (f64, f64),
}

impl Acc {
    fn push(&mut self, c: &CellRecord) {
        let Some(credit) = c.credit() else {
            self.failed += 1;
            return;
        };
        self.scored += 1;
        self.credit += credit;
        self.recognized += usize::from(c.recognized == Some(true));
        self.ties += usize::from(c.tie == Some(true));
        self.effective_b += c.effective_b as f64;
        self.noise.0 += c.d_noise.unwrap();
        self.noise.1 += c.prediction_noise.unwrap();
        self.distorted.0 += c.d_distorted.unwrap();
        self.distorted.1 += c.prediction_distorted.unwrap();
    }

    fn auc(&self) -> f64 {
        self.credit / self.scored as f64
    }
}

/// Aggregates index-ordered records. Trials that failed to sample are
/// counted in `trials_failed`; failed cells are excluded from every mean.
pub fn aggregate(records: &[TrialRecord], trials_failed: usize, method: McnemarMethod) -> Result<AggregateResult> {
    if records.is_empty() {
        return Err(NuvError::InvalidInput("no usable trials to aggregate".into()));
    }
    let mut strategies: Vec<Strategy> = Vec::new();
    let mut specs: Vec<BinSpec> = Vec::new();
    for c in &records[0].cells {
        if !strategies.contains(&c.strategy) {
            strategies.push(c.strategy);
        }
        if !specs.contains(&c.bin_spec) {
            specs.push(c.bin_spec);
        }
    }

    let mut cell_acc: BTreeMap<(usize, usize), Acc> = BTreeMap::new();
    let mut strategy_acc: Vec<Acc> = strategies.iter().map(|_| Acc::default()).collect();
    let mut pooled = Acc::default();
    let mut cells_failed = 0;
    for r in records {
        for c in &r.cells {
            let si = strategies.iter().position(|&s| s == c.strategy).ok_or_else(|| {
                NuvError::InvalidInput(format!("trial {} has an unexpected strategy", r.trial_index))
            })?;
            let bi = specs.iter().position(|&b| b == c.bin_spec).ok_or_else(|| {
                NuvError::InvalidInput(format!("trial {} has an unexpected bin spec", r.trial_index))
            })?;
            cell_acc.entry((si, bi)).or_default().push(c);
            strategy_acc[si].push(c);
            pooled.push(c);
            cells_failed += usize::from(!c.is_ok());
        }
    }
    if pooled.scored == 0 {
        return Err(NuvError::InvalidInput("every cell failed; nothing to aggregate".into()));
    }

    let mut cells = Vec::new();
    let mut max_noise: f64 = 0.0;
    let mut max_distorted: f64 = 0.0;
    for (&(si, bi), acc) in &cell_acc {
        if acc.scored == 0 {
            continue;
        }
        let noise = Alignment::from_sums(acc.noise.0, acc.noise.1, acc.scored);
        let distorted = Alignment::from_sums(acc.distorted.0, acc.distorted.1, acc.scored);
        max_noise = max_noise.max(noise.relative_difference);
        max_distorted = max_distorted.max(distorted.relative_difference);
        cells.push(CellSummary {
            strategy: strategies[si],
            bin_spec: specs[bi],
            scored: acc.scored,
            failed: acc.failed,
            recognized: acc.recognized,
            ties: acc.ties,
            auc: acc.auc(),
            mean_effective_b: acc.effective_b / acc.scored as f64,
            noise,
            distorted,
        });
    }

    let strategy_summaries = strategies
        .iter()
        .zip(&strategy_acc)
        .filter(|(_, acc)| acc.scored > 0)
        .map(|(&s, acc)| {
            let spec_aucs: Vec<f64> = cells.iter().filter(|c| c.strategy == s).map(|c| c.auc).collect();
            StrategySummary {
                strategy: s,
                scored: acc.scored,
                auc_pooled: acc.auc(),
                auc_mean_of_specs: spec_aucs.iter().sum::<f64>() / spec_aucs.len() as f64,
                noise: Alignment::from_sums(acc.noise.0, acc.noise.1, acc.scored),
                distorted: Alignment::from_sums(acc.distorted.0, acc.distorted.1, acc.scored),
            }
        })
        .collect();

    Ok(AggregateResult {
        trials_used: records.len(),
        trials_failed,
        cells_failed,
        cells,
        strategies: strategy_summaries,
        alignment_noise: Alignment::from_sums(pooled.noise.0, pooled.noise.1, pooled.scored),
        alignment_distorted: Alignment::from_sums(pooled.distorted.0, pooled.distorted.1, pooled.scored),
        max_cell_relative_difference_noise: max_noise,
        max_cell_relative_difference_distorted: max_distorted,
        mcnemar: mcnemar_matrix(records, &strategies, &specs, method),
    })
}

fn mcnemar_matrix(
    records: &[TrialRecord],
    strategies: &[Strategy],
    specs: &[BinSpec],
    method: McnemarMethod,
) -> McnemarMatrix {
    let k = strategies.len();
    let mut discordant = vec![vec![(0u64, 0u64); k]; k];
    for r in records {
        for &spec in specs {
            let bits: Vec<Option<bool>> = strategies
                .iter()
                .map(|&s| {
                    r.cells
                        .iter()
                        .find(|c| c.strategy == s && c.bin_spec == spec)
                        .and_then(|c| c.recognized)
                })
                .collect();
            for a in 0..k {
                for b in 0..k {
                    if let (Some(x), Some(y)) = (bits[a], bits[b]) {
                        match (x, y) {
                            (false, true) => discordant[a][b].0 += 1,
                            (true, false) => discordant[a][b].1 += 1,
                            _ => {}
                        }
                    }
                }
            }
        }
    }
    let p_values = (0..k)
        .map(|a| {
            (0..k)
                .map(|b| if a == b { 1.0 } else { mcnemar_with(discordant[a][b].0, discordant[a][b].1, method) })
                .collect()
        })
        .collect();
    McnemarMatrix { strategies: strategies.to_vec(), p_values, discordant }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::trial::TemplateDistribution;

    fn cell(strategy: Strategy, spec: BinSpec, dn: f64, dd: f64) -> CellRecord {
        CellRecord {
            strategy,
            bin_spec: spec,
            requested_b: 2,
            effective_b: 2,
            failure: None,
            d_noise: Some(dn),
            d_distorted: Some(dd),
            prediction_noise: Some(0.9),
            prediction_distorted: Some(0.8),
            recognized: Some(dd < dn),
            tie: Some(dd == dn),
            greedy_objective: None,
        }
    }

    fn record(i: u64, cells: Vec<CellRecord>) -> TrialRecord {
        TrialRecord {
            trial_index: i,
            d: 10,
            d_tau: 10,
            distribution: TemplateDistribution::Uniform,
            gamma: 1.0,
            sigma2: 1.0,
            sigma2_m: None,
            model_hash: None,
            cells,
        }
    }

    #[test]
    fn all_recognized_gives_unit_auc() {
        let spec = BinSpec::Fixed(2);
        let recs: Vec<_> = (0..5)
            .map(|i| record(i, vec![cell(Strategy::Eqw, spec, 0.9, 0.5), cell(Strategy::Kmeans, spec, 0.9, 0.4)]))
            .collect();
        let agg = aggregate(&recs, 0, McnemarMethod::default()).unwrap();
        assert_eq!(agg.strategy(Strategy::Eqw).unwrap().auc_pooled, 1.0);
        // identical bits: no discordant pairs
        assert_eq!(agg.mcnemar.p_value(Strategy::Eqw, Strategy::Kmeans), Some(1.0));
        assert_eq!(agg.mcnemar.p_values[0][0], 1.0);
    }

    #[test]
    fn ties_count_half() {
        let spec = BinSpec::Fixed(2);
        let recs = vec![
            record(0, vec![cell(Strategy::Eqw, spec, 0.5, 0.5)]),
            record(1, vec![cell(Strategy::Eqw, spec, 0.5, 0.7)]),
        ];
        let agg = aggregate(&recs, 0, McnemarMethod::default()).unwrap();
        assert_eq!(agg.cell(Strategy::Eqw, spec).unwrap().auc, 0.25);
        assert_eq!(agg.cell(Strategy::Eqw, spec).unwrap().ties, 1);
    }

    #[test]
    fn failed_cells_are_excluded() {
        let spec = BinSpec::Fixed(2);
        let mut bad = cell(Strategy::Eqw, spec, 0.0, 0.0);
        bad.failure = Some("degenerate".into());
        bad.recognized = None;
        bad.tie = None;
        let recs = vec![record(0, vec![bad]), record(1, vec![cell(Strategy::Eqw, spec, 0.9, 0.1)])];
        let agg = aggregate(&recs, 3, McnemarMethod::default()).unwrap();
        assert_eq!(agg.cells_failed, 1);
        assert_eq!(agg.trials_failed, 3);
        assert_eq!(agg.cell(Strategy::Eqw, spec).unwrap().scored, 1);
        assert_eq!(agg.strategy(Strategy::Eqw).unwrap().auc_pooled, 1.0);
    }

    #[test]
    fn mcnemar_matrix_is_symmetric() {
        let spec = BinSpec::Fixed(2);
        let recs: Vec<_> = (0..40)
            .map(|i| {
                let eqw = if i % 3 == 0 { 0.3 } else { 0.95 };
                let km = if i % 5 == 0 { 0.95 } else { 0.3 };
                record(i, vec![cell(Strategy::Eqw, spec, 0.9, eqw), cell(Strategy::Kmeans, spec, 0.9, km)])
            })
            .collect();
        let agg = aggregate(&recs, 0, McnemarMethod::default()).unwrap();
        let m = &agg.mcnemar;
        assert_eq!(m.p_values[0][1], m.p_values[1][0]);
        assert!(m.p_values[0][1] < 0.01);
        let (n01, n10) = m.discordant[0][1];
        assert_eq!((n01, n10), m.discordant[1][0].swap());
    }

    trait Swap {
        fn swap(self) -> Self;
    }
    impl Swap for (u64, u64) {
        fn swap(self) -> Self {
            (self.1, self.0)
        }
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(aggregate(&[], 0, McnemarMethod::default()).is_err());
    }
}
