//! Equal-width and equal-frequency baselines.

use super::check_feasible;
use crate::error::{NuvError, Result};
use crate::measure::{BinPartition, FullRankDecomposition};

/// `b` equal-width intervals over `[tau_min, tau_max]`. Interval `j` is
/// half-open `[lo + j w, lo + (j + 1) w)` except the last, which also holds
/// `tau_max`. Intervals containing no unique value are dropped, so the
/// returned partition may have fewer than `b` bins.
pub fn eqw_binning(fr: &FullRankDecomposition, b: usize) -> Result<BinPartition> {
    if b == 0 {
        return Err(NuvError::BinCount("at least one bin is required".into()));
    }
    let tau = fr.tau();
    let n = tau.len();
    let lo = tau[0];
    let hi = tau[n - 1];
    let width = (hi - lo) / b as f64;
    if n == 1 || width <= 0.0 {
        return Ok(BinPartition::single(n));
    }
    let interval = |v: f64| (((v - lo) / width).floor() as usize).min(b - 1);

    let mut cuts = vec![0];
    let mut current = interval(tau[0]);
    for (k, &v) in tau.iter().enumerate().skip(1) {
        let j = interval(v);
        if j != current {
            cuts.push(k);
            current = j;
        }
    }
    cuts.push(n);
    BinPartition::new(cuts, n)
}

/// `b` bins holding coordinate counts as equal as the ties allow: the cuts
/// minimize the sum of squared bin counts, which for a fixed total is the
/// spread of the counts around `d / b`. Solved exactly in integers over
/// suffixes; ties go to the lexicographically smallest cut vector.
/// O(d_tau^2 b) time.
pub fn eqf_binning(fr: &FullRankDecomposition, b: usize) -> Result<BinPartition> {
    let n = fr.unique_len();
    check_feasible(b, n)?;
    if b == 1 {
        return Ok(BinPartition::single(n));
    }
    if b == n {
        return Ok(BinPartition::full_rank(n));
    }
    let mut cumulative = Vec::with_capacity(n + 1);
    cumulative.push(0u64);
    for &c in fr.n_tau() {
        cumulative.push(cumulative.last().unwrap() + c as u64);
    }
    let cost = |i: usize, j: usize| {
        let c = (cumulative[j] - cumulative[i]) as u128;
        c * c
    };

    // best[k][i]: minimal cost of splitting the suffix i..n into k + 1 bins;
    // next[k][i]: the smallest first cut achieving it.
    let mut best = vec![vec![u128::MAX; n + 1]; b];
    let mut next = vec![vec![0usize; n + 1]; b];
    for i in 0..n {
        best[0][i] = cost(i, n);
    }
    for k in 1..b {
        for i in 0..=(n - k - 1) {
            let mut min = u128::MAX;
            let mut arg = i + 1;
            for c in (i + 1)..=(n - k) {
                let v = cost(i, c) + best[k - 1][c];
                if v < min {
                    min = v;
                    arg = c;
                }
            }
            best[k][i] = min;
            next[k][i] = arg;
        }
    }

    let mut cuts = Vec::with_capacity(b + 1);
    cuts.push(0);
    let mut i = 0;
    for k in (1..b).rev() {
        i = next[k][i];
        cuts.push(i);
    }
    cuts.push(n);
    BinPartition::new(cuts, n)
}
