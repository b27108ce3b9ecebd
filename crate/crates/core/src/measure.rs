//! The piecewise-constant normalized unexplained variance (nUV).
//!
//! A binning of the template induces a partition of the coordinates. The
//! hat matrix of that partition replaces every window value by the mean of
//! the window values sharing its bin, so the measure reduces to per-bin means
//! and counts. Neither the slice transform nor the hat matrix is ever
//! materialized.

use serde::{Deserialize, Serialize};

use crate::error::{NuvError, Result};

/// A template vector of dimension `d >= 2` with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    values: Vec<f64>,
}

impl Template {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(NuvError::InvalidInput(format!(
                "template needs at least 2 values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(NuvError::InvalidInput(format!(
                "template value at index {i} is not finite"
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.values
    }
}

/// Sorted unique template values, their multiplicities and the map from
/// coordinates to unique-value indices (the full-rank slice transform in
/// implicit form).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullRankDecomposition {
    tau: Vec<f64>,
    n_tau: Vec<usize>,
    index_map: Vec<usize>,
}

impl FullRankDecomposition {
    /// Strictly increasing unique values.
    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    /// Multiplicity of every unique value.
    pub fn n_tau(&self) -> &[usize] {
        &self.n_tau
    }

    /// `index_map[i]` is the unique-value index of coordinate `i`.
    pub fn index_map(&self) -> &[usize] {
        &self.index_map
    }

    /// Dimension `d` of the template.
    pub fn len(&self) -> usize {
        self.index_map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_map.is_empty()
    }

    /// Number of unique values `d_tau`.
    pub fn unique_len(&self) -> usize {
        self.tau.len()
    }

    /// True when every template value is distinct.
    pub fn is_unique(&self) -> bool {
        self.tau.len() == self.index_map.len()
    }

    /// Multiplicities as reals, convenient for weighted sums.
    pub fn weights(&self) -> Vec<f64> {
        self.n_tau.iter().map(|&n| n as f64).collect()
    }

    /// The (possibly rounded) template, `S_tau * tau`.
    pub fn reconstruct(&self) -> Vec<f64> {
        self.expand(&self.tau)
    }

    /// Expands a vector over unique values to coordinate space.
    pub fn expand(&self, per_unique: &[f64]) -> Vec<f64> {
        debug_assert_eq!(per_unique.len(), self.tau.len());
        self.index_map.iter().map(|&k| per_unique[k]).collect()
    }
}

/// Rounds half to even at `digits` decimals.
pub fn round_half_even(x: f64, digits: u32) -> f64 {
    // Decimal formatting rounds the exact binary value, so 0.1235 (stored
    // just below the tie) goes down while a true tie like 0.125 goes to even.
    let r: f64 = format!("{x:.*}", digits as usize).parse().unwrap_or(x);
    // -0.0 and 0.0 must land in the same unique value.
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub fn full_rank_decompose(t: &Template, round_digits: Option<u32>) -> FullRankDecomposition {
    let values: Vec<f64> = match round_digits {
        Some(k) => t.values().iter().map(|&v| round_half_even(v, k)).collect(),
        None => t.values().to_vec(),
    };
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    let mut tau: Vec<f64> = Vec::new();
    let mut n_tau: Vec<usize> = Vec::new();
    let mut index_map = vec![0usize; values.len()];
    for &i in &order {
        let v = values[i];
        match tau.last() {
            Some(&last) if last == v => *n_tau.last_mut().unwrap() += 1,
            _ => {
                tau.push(v);
                n_tau.push(1);
            }
        }
        index_map[i] = tau.len() - 1;
    }
    FullRankDecomposition { tau, n_tau, index_map }
}

/// `b` contiguous bins over the sorted unique values, stored as `b + 1` cut
/// indices with `cuts[0] = 0` and `cuts[b] = d_tau`. Bin `j` holds the unique
/// indices in `cuts[j]..cuts[j + 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinPartition {
    cuts: Vec<usize>,
}

impl BinPartition {
    pub fn new(cuts: Vec<usize>, unique_len: usize) -> Result<Self> {
        if cuts.len() < 2 {
            return Err(NuvError::InvalidPartition("need at least one bin".into()));
        }
        if cuts[0] != 0 || *cuts.last().unwrap() != unique_len {
            return Err(NuvError::InvalidPartition(format!(
                "cuts must start at 0 and end at {unique_len}, got {cuts:?}"
            )));
        }
        if let Some(j) = cuts.windows(2).position(|w| w[0] >= w[1]) {
            return Err(NuvError::InvalidPartition(format!("bin {j} is empty")));
        }
        Ok(Self { cuts })
    }

    /// Every unique value in one bin.
    pub fn single(unique_len: usize) -> Self {
        Self { cuts: vec![0, unique_len] }
    }

    /// One bin per unique value.
    pub fn full_rank(unique_len: usize) -> Self {
        Self { cuts: (0..=unique_len).collect() }
    }

    /// Builds a partition from the interior boundaries only.
    pub fn from_interior(interior: &[usize], unique_len: usize) -> Result<Self> {
        let mut cuts = Vec::with_capacity(interior.len() + 2);
        cuts.push(0);
        cuts.extend_from_slice(interior);
        cuts.push(unique_len);
        Self::new(cuts, unique_len)
    }

    pub fn cuts(&self) -> &[usize] {
        &self.cuts
    }

    /// Number of bins `b`.
    pub fn bins(&self) -> usize {
        self.cuts.len() - 1
    }

    pub fn unique_len(&self) -> usize {
        *self.cuts.last().unwrap()
    }

    /// Unique-index range of every bin.
    pub fn ranges(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        self.cuts.windows(2).map(|w| w[0]..w[1])
    }

    /// Bin index of every unique value.
    pub fn labels(&self) -> Vec<usize> {
        let mut out = vec![0; self.unique_len()];
        for (j, r) in self.ranges().enumerate() {
            out[r].fill(j);
        }
        out
    }

    /// Lower edge of every bin above the first, in template units.
    pub fn cut_values(&self, tau: &[f64]) -> Vec<f64> {
        self.cuts[1..self.cuts.len() - 1].iter().map(|&c| tau[c]).collect()
    }
}

/// The slice transform in implicit form: bin index per coordinate and
/// coordinate count per bin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinAssignment {
    bin_of: Vec<usize>,
    bin_counts: Vec<usize>,
}

impl BinAssignment {
    pub fn bin_of(&self) -> &[usize] {
        &self.bin_of
    }

    pub fn bin_counts(&self) -> &[usize] {
        &self.bin_counts
    }

    pub fn bins(&self) -> usize {
        self.bin_counts.len()
    }

    pub fn len(&self) -> usize {
        self.bin_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bin_of.is_empty()
    }
}

pub fn assign_bins(fr: &FullRankDecomposition, p: &BinPartition) -> Result<BinAssignment> {
    if p.unique_len() != fr.unique_len() {
        return Err(NuvError::InvalidPartition(format!(
            "partition covers {} unique values, template has {}",
            p.unique_len(),
            fr.unique_len()
        )));
    }
    let labels = p.labels();
    let bin_of: Vec<usize> = fr.index_map().iter().map(|&k| labels[k]).collect();
    let mut bin_counts = vec![0usize; p.bins()];
    for &j in &bin_of {
        bin_counts[j] += 1;
    }
    if let Some(j) = bin_counts.iter().position(|&c| c == 0) {
        return Err(NuvError::InvalidPartition(format!("bin {j} has no coordinates")));
    }
    Ok(BinAssignment { bin_of, bin_counts })
}

/// `(1/d) * sum (v_i - mean)^2`, the population variance.
pub fn population_variance(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(NuvError::InvalidInput("variance of an empty vector".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(NuvError::InvalidInput("non-finite entry".into()));
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    Ok(v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n)
}

fn check_window(a: &BinAssignment, w: &[f64]) -> Result<()> {
    if w.len() != a.len() {
        return Err(NuvError::InvalidInput(format!(
            "window has {} values, template has {}",
            w.len(),
            a.len()
        )));
    }
    if let Some(i) = w.iter().position(|v| !v.is_finite()) {
        return Err(NuvError::InvalidInput(format!(
            "window value at index {i} is not finite"
        )));
    }
    Ok(())
}

/// `(A w)_i`: the mean of the window values in the bin of coordinate `i`.
pub fn conditional_means(a: &BinAssignment, w: &[f64]) -> Result<Vec<f64>> {
    check_window(a, w)?;
    let mut sums = vec![0.0; a.bins()];
    for (&j, &x) in a.bin_of.iter().zip(w) {
        sums[j] += x;
    }
    let means: Vec<f64> = sums
        .iter()
        .zip(&a.bin_counts)
        .map(|(s, &c)| s / c as f64)
        .collect();
    Ok(a.bin_of.iter().map(|&j| means[j]).collect())
}

/// Sum of squared deviations from the mean, accumulated in sorted order so
/// the result depends only on the multiset of values. Deviations are taken
/// after shifting by the first value, which makes a constant run exactly 0.
fn sorted_sse(sorted: &[f64]) -> f64 {
    let Some(&shift) = sorted.first() else {
        return 0.0;
    };
    let n = sorted.len() as f64;
    let mean = sorted.iter().map(|x| x - shift).sum::<f64>() / n;
    sorted.iter().map(|x| (x - shift - mean) * (x - shift - mean)).sum()
}

/// Residual sum of squares of the piecewise-constant fit and the total sum of
/// squares of `w`, i.e. `||A w - w||^2` and `d var(w)`.
pub fn residual_and_total(a: &BinAssignment, w: &[f64]) -> Result<(f64, f64)> {
    check_window(a, w)?;
    let mut keyed: Vec<(usize, f64)> = a.bin_of.iter().copied().zip(w.iter().copied()).collect();
    keyed.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
    let values: Vec<f64> = keyed.iter().map(|&(_, x)| x).collect();

    let mut residual = 0.0;
    let mut start = 0;
    for &count in &a.bin_counts {
        residual += sorted_sse(&values[start..start + count]);
        start += count;
    }

    let mut all = values;
    all.sort_by(f64::total_cmp);
    Ok((residual, sorted_sse(&all)))
}

/// `D(t, w) = ||A w - w||^2 / (d var(w))`.
pub fn nuv(a: &BinAssignment, w: &[f64]) -> Result<f64> {
    let (residual, total) = residual_and_total(a, w)?;
    if total <= 0.0 {
        return Err(NuvError::DegenerateVariance);
    }
    Ok((residual / total).clamp(0.0, 1.0))
}

/// `||A t - t||^2`: the within-bin weighted sum of squared deviations of the
/// unique values from their bin means. This is the k-means objective.
pub fn representation_error(fr: &FullRankDecomposition, p: &BinPartition) -> f64 {
    let tau = fr.tau();
    let n = fr.n_tau();
    p.ranges()
        .map(|r| weighted_sse(&tau[r.clone()], &n[r]))
        .sum()
}

/// `d var(t)` computed over the unique values.
pub fn total_sum_of_squares(fr: &FullRankDecomposition) -> f64 {
    weighted_sse(fr.tau(), fr.n_tau())
}

fn weighted_sse(values: &[f64], counts: &[usize]) -> f64 {
    let weight: f64 = counts.iter().map(|&c| c as f64).sum();
    let mean = values
        .iter()
        .zip(counts)
        .map(|(v, &c)| v * c as f64)
        .sum::<f64>()
        / weight;
    values
        .iter()
        .zip(counts)
        .map(|(v, &c)| c as f64 * (v - mean) * (v - mean))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked() -> (FullRankDecomposition, BinAssignment) {
        let t = Template::new(vec![2.0, 0.0, 5.0]).unwrap();
        let fr = full_rank_decompose(&t, None);
        let p = BinPartition::new(vec![0, 2, 3], 3).unwrap();
        let a = assign_bins(&fr, &p).unwrap();
        (fr, a)
    }

    #[test]
    fn population_variance_examples() {
        assert_eq!(population_variance(&[8.0, 2.0, 2.0]).unwrap(), 8.0);
        assert_eq!(population_variance(&[3.5; 7]).unwrap(), 0.0);
        assert!(population_variance(&[]).is_err());
    }

    #[test]
    fn decomposition_examples() {
        let fr = full_rank_decompose(&Template::new(vec![2.0, 0.0, 5.0]).unwrap(), None);
        assert_eq!(fr.tau(), &[0.0, 2.0, 5.0]);
        assert_eq!(fr.n_tau(), &[1, 1, 1]);
        assert_eq!(fr.index_map(), &[1, 0, 2]);

        let fr = full_rank_decompose(&Template::new(vec![0.3, 0.3, 0.7]).unwrap(), None);
        assert_eq!(fr.tau(), &[0.3, 0.7]);
        assert_eq!(fr.n_tau(), &[2, 1]);

        let fr = full_rank_decompose(&Template::new(vec![0.1234, 0.1235]).unwrap(), Some(3));
        assert_eq!(fr.tau(), &[0.123]);
        assert_eq!(fr.n_tau(), &[2]);
        assert_eq!(fr.reconstruct(), vec![0.123, 0.123]);
    }

    #[test]
    fn rounding_is_half_even() {
        assert_eq!(round_half_even(0.5, 0), 0.0);
        assert_eq!(round_half_even(1.5, 0), 2.0);
        assert_eq!(round_half_even(2.5, 0), 2.0);
        assert_eq!(round_half_even(0.125, 2), 0.12);
        assert_eq!(round_half_even(0.1235, 3), 0.123);
        assert_eq!(round_half_even(-0.0001, 3), 0.0);
        assert!(round_half_even(-0.0001, 3).is_sign_positive());
    }

    #[test]
    fn template_rejects_bad_input() {
        assert!(Template::new(vec![1.0]).is_err());
        assert!(Template::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn partition_validation() {
        assert!(BinPartition::new(vec![0, 2, 2, 3], 3).is_err());
        assert!(BinPartition::new(vec![1, 3], 3).is_err());
        assert!(BinPartition::new(vec![0, 2], 3).is_err());
        assert!(BinPartition::new(vec![0], 0).is_err());
        assert_eq!(BinPartition::from_interior(&[2], 3).unwrap().cuts(), &[0, 2, 3]);
    }

    #[test]
    fn assignment_examples() {
        let (fr, a) = worked();
        assert_eq!(a.bin_of(), &[0, 0, 1]);
        assert_eq!(a.bin_counts(), &[2, 1]);

        let single = assign_bins(&fr, &BinPartition::single(3)).unwrap();
        assert_eq!(single.bin_of(), &[0, 0, 0]);

        let full = assign_bins(&fr, &BinPartition::full_rank(3)).unwrap();
        assert_eq!(full.bin_of(), &[1, 0, 2]);

        assert!(assign_bins(&fr, &BinPartition::single(4)).is_err());
    }

    #[test]
    fn conditional_means_examples() {
        let (fr, a) = worked();
        assert_eq!(conditional_means(&a, &[8.0, 2.0, 2.0]).unwrap(), vec![5.0, 5.0, 2.0]);

        let single = assign_bins(&fr, &BinPartition::single(3)).unwrap();
        assert_eq!(conditional_means(&single, &[1.0, 2.0, 6.0]).unwrap(), vec![3.0; 3]);

        let full = assign_bins(&fr, &BinPartition::full_rank(3)).unwrap();
        assert_eq!(conditional_means(&full, &[1.0, 2.0, 6.0]).unwrap(), vec![1.0, 2.0, 6.0]);

        assert!(conditional_means(&a, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn nuv_examples() {
        let (fr, a) = worked();
        let d = nuv(&a, &[8.0, 2.0, 2.0]).unwrap();
        assert!((d - 0.75).abs() < 1e-12);

        // w = M[t] with M constant on each bin
        assert_eq!(nuv(&a, &[-1.0, -1.0, 4.0]).unwrap(), 0.0);

        let full = assign_bins(&fr, &BinPartition::full_rank(3)).unwrap();
        assert_eq!(nuv(&full, &[0.3, -2.0, 9.0]).unwrap(), 0.0);

        let single = assign_bins(&fr, &BinPartition::single(3)).unwrap();
        assert_eq!(nuv(&single, &[0.3, -2.0, 9.0]).unwrap(), 1.0);

        assert_eq!(nuv(&a, &[1.0, 1.0, 1.0]), Err(NuvError::DegenerateVariance));
    }

    #[test]
    fn representation_error_examples() {
        let fr = full_rank_decompose(&Template::new(vec![0.0, 2.0, 5.0]).unwrap(), None);
        assert_eq!(representation_error(&fr, &BinPartition::full_rank(3)), 0.0);
        let e = representation_error(&fr, &BinPartition::single(3));
        assert!((e - 38.0 / 3.0).abs() < 1e-12);
        assert!((total_sum_of_squares(&fr) - 38.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn representation_error_matches_residual_with_ties() {
        let t = Template::new(vec![0.1, 0.4, 0.4, 0.9, 0.1, 0.7, 0.4]).unwrap();
        let fr = full_rank_decompose(&t, None);
        let p = BinPartition::new(vec![0, 2, 4], 4).unwrap();
        let a = assign_bins(&fr, &p).unwrap();
        let (residual, total) = residual_and_total(&a, t.values()).unwrap();
        assert!((representation_error(&fr, &p) - residual).abs() < 1e-12);
        assert!((total_sum_of_squares(&fr) - total).abs() < 1e-12);
    }
}
