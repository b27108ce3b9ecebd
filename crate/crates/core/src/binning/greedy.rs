//! Greedy maximization of the Frobenius alignment between the hat matrix of
//! a binning and the cross-product matrix of the expected distortion.
//!
//! Starting from a random partition, every pass evaluates moving each
//! interior boundary one unique value to the left or right and applies the
//! single move with the largest gain. Per-bin block sums are updated
//! incrementally: moving one unique value in or out of a bin changes the
//! bin's block sum by that value's row and column contribution.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{block_sum, check_feasible, frobenius_objective, CrossProductMatrix};
use crate::error::{NuvError, Result};
use crate::measure::BinPartition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyConfig {
    /// Independently seeded passes; the best result is kept.
    pub restarts: usize,
    pub seed: u64,
    /// Cap on accepted moves per pass.
    pub max_iterations: usize,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        Self { restarts: 1, seed: 0, max_iterations: 1_000_000 }
    }
}

impl GreedyConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(NuvError::Config("greedy restarts must be at least 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(NuvError::Config("greedy max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyOutcome {
    pub partition: BinPartition,
    /// Objective recomputed from scratch on `partition`.
    pub objective: f64,
    /// Incrementally tracked objective of the winning pass, starting with the
    /// random initial state and then once per accepted move.
    pub trace: Vec<f64>,
    /// Index of the winning restart.
    pub best_restart: usize,
    /// Accepted moves per restart.
    pub restart_moves: Vec<usize>,
}

/// Contribution of unique value `e` to the block sum of the bin spanning
/// `range`: `C[e,e] n_e^2 + 2 sum_{k in range, k != e} C[e,k] n_e n_k`.
fn row_col_sum(cross: &DMatrix<f64>, n_tau: &[f64], e: usize, range: std::ops::Range<usize>) -> f64 {
    let col = cross.column(e);
    let mut off = 0.0;
    for k in range {
        if k != e {
            off += col[k] * n_tau[k];
        }
    }
    col[e] * n_tau[e] * n_tau[e] + 2.0 * off * n_tau[e]
}

struct Move {
    gain: f64,
    boundary: usize,
    step: isize,
    left_sum: f64,
    right_sum: f64,
    left_count: f64,
    right_count: f64,
}

struct Pass {
    partition: BinPartition,
    trace: Vec<f64>,
    moves: usize,
}

fn run_pass(
    cross: &DMatrix<f64>,
    n_tau: &[usize],
    b: usize,
    seed: u64,
    max_iterations: usize,
) -> Result<Pass> {
    let n = n_tau.len();
    let weights: Vec<f64> = n_tau.iter().map(|&c| c as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut interior: Vec<usize> = sample(&mut rng, n - 1, b - 1)
        .into_iter()
        .map(|c| c + 1)
        .collect();
    interior.sort_unstable();
    let mut cuts = Vec::with_capacity(b + 1);
    cuts.push(0);
    cuts.extend(interior);
    cuts.push(n);

    let mut sums = Vec::with_capacity(b);
    let mut counts = Vec::with_capacity(b);
    for j in 0..b {
        let (s, c) = block_sum(cross, n_tau, cuts[j]..cuts[j + 1]);
        sums.push(s);
        counts.push(c);
    }
    let mut objective: f64 = sums.iter().zip(&counts).map(|(s, c)| s / c).sum();
    let mut trace = vec![objective];
    let mut moves = 0;

    loop {
        let mut best: Option<Move> = None;
        // threshold against floating-point noise in the gain
        let mut best_gain = 64.0 * f64::EPSILON * objective.abs().max(1.0);
        for i in 1..b {
            let (l, r) = (i - 1, i);
            // shrink the left bin: its last value joins the right bin
            if cuts[i] - 1 > cuts[l] {
                let e = cuts[i] - 1;
                let left_sum = sums[l] - row_col_sum(cross, &weights, e, cuts[l]..cuts[i]);
                let right_sum = sums[r] + row_col_sum(cross, &weights, e, cuts[i]..cuts[r + 1]);
                let left_count = counts[l] - weights[e];
                let right_count = counts[r] + weights[e];
                let gain = left_sum / left_count + right_sum / right_count
                    - sums[l] / counts[l]
                    - sums[r] / counts[r];
                if gain > best_gain {
                    best_gain = gain;
                    best = Some(Move { gain, boundary: i, step: -1, left_sum, right_sum, left_count, right_count });
                }
            }
            // shrink the right bin: its first value joins the left bin
            if cuts[i] + 1 < cuts[r + 1] {
                let e = cuts[i];
                let right_sum = sums[r] - row_col_sum(cross, &weights, e, cuts[i]..cuts[r + 1]);
                let left_sum = sums[l] + row_col_sum(cross, &weights, e, cuts[l]..cuts[i]);
                let right_count = counts[r] - weights[e];
                let left_count = counts[l] + weights[e];
                let gain = left_sum / left_count + right_sum / right_count
                    - sums[l] / counts[l]
                    - sums[r] / counts[r];
                if gain > best_gain {
                    best_gain = gain;
                    best = Some(Move { gain, boundary: i, step: 1, left_sum, right_sum, left_count, right_count });
                }
            }
        }

        let Some(mv) = best else { break };
        if moves == max_iterations {
            return Err(NuvError::IterationLimit { limit: max_iterations });
        }
        let i = mv.boundary;
        cuts[i] = cuts[i].checked_add_signed(mv.step).expect("boundary stays in range");
        sums[i - 1] = mv.left_sum;
        sums[i] = mv.right_sum;
        counts[i - 1] = mv.left_count;
        counts[i] = mv.right_count;
        objective += mv.gain;
        trace.push(objective);
        moves += 1;
    }

    Ok(Pass { partition: BinPartition::new(cuts, n)?, trace, moves })
}

/// Greedy boundary-move optimization of `<A, S_tau Cross S_tau^T>_F`.
///
/// Each restart `r` draws its initial partition uniformly among all
/// partitions into `b` nonempty contiguous bins using the seed
/// `cfg.seed ^ r`. The best final objective wins; ties go to the lower
/// restart index. The result is a local optimum of single boundary moves,
/// not necessarily the global one.
pub fn greedy_binning(
    cross: &CrossProductMatrix,
    n_tau: &[usize],
    b: usize,
    cfg: &GreedyConfig,
) -> Result<GreedyOutcome> {
    cfg.validate()?;
    let n = n_tau.len();
    if cross.dim() != n {
        return Err(NuvError::InvalidInput(format!(
            "cross-product matrix is {}x{} but there are {} unique values",
            cross.dim(),
            cross.dim(),
            n
        )));
    }
    check_feasible(b, n)?;

    if b == 1 || b == n {
        let partition = if b == 1 { BinPartition::single(n) } else { BinPartition::full_rank(n) };
        let objective = frobenius_objective(&partition, cross, n_tau)?;
        return Ok(GreedyOutcome {
            partition,
            objective,
            trace: vec![objective],
            best_restart: 0,
            restart_moves: vec![0; cfg.restarts],
        });
    }

    let passes: Vec<Result<Pass>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_pass(cross.entries(), n_tau, b, cfg.seed ^ r as u64, cfg.max_iterations))
        .collect();

    let mut best: Option<(usize, Pass, f64)> = None;
    let mut restart_moves = Vec::with_capacity(cfg.restarts);
    for (r, pass) in passes.into_iter().enumerate() {
        let pass = pass?;
        restart_moves.push(pass.moves);
        let objective = frobenius_objective(&pass.partition, cross, n_tau)?;
        if best.as_ref().map_or(true, |(_, _, o)| objective > *o) {
            best = Some((r, pass, objective));
        }
    }
    let (best_restart, pass, objective) = best.expect("at least one restart");
    Ok(GreedyOutcome {
        partition: pass.partition,
        objective,
        trace: pass.trace,
        best_restart,
        restart_moves,
    })
}
