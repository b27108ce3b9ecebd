//! Exact weighted 1-D k-means over the sorted unique values.
//!
//! Optimal 1-D k-means clusters are contiguous in sorted order, so the
//! problem is a shortest path over cut positions. The table is built over
//! suffixes so that reconstruction can pick the smallest optimal cut at
//! every step, which yields the lexicographically smallest optimal cut
//! vector.

use super::check_feasible;
use crate::error::Result;
use crate::measure::{BinPartition, FullRankDecomposition};

/// Weighted prefix sums giving O(1) within-interval squared error.
struct IntervalCost {
    weight: Vec<f64>,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl IntervalCost {
    fn new(tau: &[f64], n_tau: &[usize]) -> Self {
        let total: f64 = n_tau.iter().map(|&n| n as f64).sum();
        let center = tau.iter().zip(n_tau).map(|(t, &n)| t * n as f64).sum::<f64>() / total;
        let mut weight = vec![0.0; tau.len() + 1];
        let mut first = vec![0.0; tau.len() + 1];
        let mut second = vec![0.0; tau.len() + 1];
        for (k, (&t, &n)) in tau.iter().zip(n_tau).enumerate() {
            let n = n as f64;
            let x = t - center;
            weight[k + 1] = weight[k] + n;
            first[k + 1] = first[k] + n * x;
            second[k + 1] = second[k] + n * x * x;
        }
        Self { weight, first, second }
    }

    /// Weighted SSE of unique values `i..j`.
    fn cost(&self, i: usize, j: usize) -> f64 {
        let w = self.weight[j] - self.weight[i];
        let s = self.first[j] - self.first[i];
        let q = self.second[j] - self.second[i];
        (q - s * s / w).max(0.0)
    }
}

/// Partition into `b` bins minimizing the representation error
/// `||A t - t||^2`. O(d_tau^2 b) time, O(d_tau b) space.
pub fn kmeans_binning(fr: &FullRankDecomposition, b: usize) -> Result<BinPartition> {
    let n = fr.unique_len();
    check_feasible(b, n)?;
    if b == 1 {
        return Ok(BinPartition::single(n));
    }
    if b == n {
        return Ok(BinPartition::full_rank(n));
    }
    let cost = IntervalCost::new(fr.tau(), fr.n_tau());

    // best[k][i]: minimal cost of splitting the suffix i..n into k + 1 bins.
    // next[k][i]: the smallest first cut achieving it.
    let mut best = vec![vec![f64::INFINITY; n + 1]; b];
    let mut next = vec![vec![0usize; n + 1]; b];
    for i in 0..n {
        best[0][i] = cost.cost(i, n);
    }
    for k in 1..b {
        let bins = k + 1;
        for i in 0..=(n - bins) {
            let mut min = f64::INFINITY;
            let mut arg = i + 1;
            for c in (i + 1)..=(n - k) {
                let v = cost.cost(i, c) + best[k - 1][c];
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
