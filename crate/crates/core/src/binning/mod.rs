//! Template binning strategies and the objectives they optimize.
//!
//! Every strategy returns a [`BinPartition`] of the sorted unique template
//! values: bins are contiguous in value order and nonempty.

mod greedy;
mod kmeans;
mod simple;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{NuvError, Result};
use crate::measure::{BinPartition, FullRankDecomposition};

pub use greedy::{greedy_binning, GreedyConfig, GreedyOutcome};
pub use kmeans::kmeans_binning;
pub use simple::{eqf_binning, eqw_binning};

/// `Cross(m) = E[m m^T]` over the unique-value coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossProductMatrix {
    entries: DMatrix<f64>,
}

impl CrossProductMatrix {
    /// Validates squareness, finiteness, symmetry to 1e-9 relative and a
    /// nonnegative diagonal.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(NuvError::InvalidInput(format!(
                "cross-product matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(NuvError::InvalidInput("cross-product matrix has non-finite entries".into()));
        }
        let scale = entries.amax().max(f64::MIN_POSITIVE);
        let n = entries.nrows();
        for i in 0..n {
            if entries[(i, i)] < 0.0 {
                return Err(NuvError::InvalidInput(format!(
                    "cross-product diagonal entry {i} is negative"
                )));
            }
            for j in (i + 1)..n {
                if (entries[(i, j)] - entries[(j, i)]).abs() > 1e-9 * scale {
                    return Err(NuvError::InvalidInput(format!(
                        "cross-product matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    /// `sigma2 * I`.
    pub fn scaled_identity(dim: usize, sigma2: f64) -> Result<Self> {
        Self::new(DMatrix::from_diagonal_element(dim, dim, sigma2))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// `<n_tau, diag(Cross)>`, i.e. `<n_tau, E m^2>`.
    pub fn weighted_trace(&self, n_tau: &[usize]) -> f64 {
        n_tau
            .iter()
            .enumerate()
            .map(|(i, &n)| n as f64 * self.entries[(i, i)])
            .sum()
    }

    /// `n_tau^T Cross n_tau`.
    pub fn quadratic_form(&self, n_tau: &[usize]) -> f64 {
        let n = self.dim();
        let mut total = 0.0;
        for j in 0..n {
            let col = self.entries.column(j);
            let inner: f64 = (0..n).map(|i| col[i] * n_tau[i] as f64).sum();
            total += inner * n_tau[j] as f64;
        }
        total
    }
}

fn check_dims(p: &BinPartition, cross: &CrossProductMatrix, n_tau: &[usize]) -> Result<()> {
    if cross.dim() != n_tau.len() || p.unique_len() != n_tau.len() {
        return Err(NuvError::InvalidInput(format!(
            "dimension mismatch: partition over {}, cross {}x{}, {} multiplicities",
            p.unique_len(),
            cross.dim(),
            cross.dim(),
            n_tau.len()
        )));
    }
    Ok(())
}

/// Weighted block sum `sum_{p,q in bin} n_p n_q Cross[p,q]` and bin weight
/// `sum_{p in bin} n_p` for one bin.
pub(crate) fn block_sum(cross: &DMatrix<f64>, n_tau: &[usize], r: std::ops::Range<usize>) -> (f64, f64) {
    let mut s = 0.0;
    for q in r.clone() {
        let col = cross.column(q);
        let inner: f64 = r.clone().map(|p| col[p] * n_tau[p] as f64).sum();
        s += inner * n_tau[q] as f64;
    }
    let n: usize = n_tau[r].iter().sum();
    (s, n as f64)
}

/// `<A, S_tau Cross S_tau^T>_F`, expanded per bin as
/// `sum_bins [sum_{p,q in bin} n_p n_q Cross[p,q]] / [sum_{p in bin} n_p]`.
pub fn frobenius_objective(p: &BinPartition, cross: &CrossProductMatrix, n_tau: &[usize]) -> Result<f64> {
    check_dims(p, cross, n_tau)?;
    Ok(p.ranges()
        .map(|r| {
            let (s, n) = block_sum(cross.entries(), n_tau, r);
            s / n
        })
        .sum())
}

/// Histogram bin-count rules evaluated over the number of unique values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinCountRules {
    pub sturges: usize,
    pub rice: usize,
    pub sqrt: usize,
}

/// Sturges `ceil(log2 n) + 1`, Rice `ceil(2 n^(1/3))` and square-root
/// `ceil(sqrt n)`, each clamped to `[1, n]`.
pub fn bin_count_rules(d_tau: usize) -> BinCountRules {
    let n = d_tau.max(1);
    let clamp = |b: usize| b.clamp(1, n);
    BinCountRules {
        sturges: clamp(ceil_log2(n) + 1),
        rice: clamp(ceil_twice_cbrt(n)),
        sqrt: clamp(ceil_sqrt(n)),
    }
}

fn ceil_log2(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// Smallest `r` with `r^3 >= 8 n`, i.e. `ceil(2 n^(1/3))` without rounding
/// trouble at perfect cubes.
fn ceil_twice_cbrt(n: usize) -> usize {
    let target = 8 * n as u128;
    let mut r = (2.0 * (n as f64).cbrt()) as u128;
    while r * r * r < target {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) * (r - 1) >= target {
        r -= 1;
    }
    r as usize
}

fn ceil_sqrt(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r < n {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) >= n {
        r -= 1;
    }
    r
}

/// A requested bin count: a fixed integer or one of the rules.
///
/// Serialized as its display string (`"2"`, `"sturges"`, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum BinSpec {
    Fixed(usize),
    Sturges,
    Rice,
    Sqrt,
}

impl BinSpec {
    /// Requested bin count for `d_tau` unique values (not clamped for
    /// fixed counts).
    pub fn resolve(&self, d_tau: usize) -> usize {
        let rules = bin_count_rules(d_tau);
        match *self {
            BinSpec::Fixed(b) => b,
            BinSpec::Sturges => rules.sturges,
            BinSpec::Rice => rules.rice,
            BinSpec::Sqrt => rules.sqrt,
        }
    }
}

impl fmt::Display for BinSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BinSpec::Fixed(b) => write!(f, "{b}"),
            BinSpec::Sturges => f.write_str("sturges"),
            BinSpec::Rice => f.write_str("rice"),
            BinSpec::Sqrt => f.write_str("sqrt"),
        }
    }
}

impl From<BinSpec> for String {
    fn from(spec: BinSpec) -> String {
        spec.to_string()
    }
}

impl TryFrom<String> for BinSpec {
    type Error = NuvError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl FromStr for BinSpec {
    type Err = NuvError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sturges" => Ok(BinSpec::Sturges),
            "rice" => Ok(BinSpec::Rice),
            "sqrt" => Ok(BinSpec::Sqrt),
            other => other
                .parse::<usize>()
                .map(BinSpec::Fixed)
                .map_err(|_| NuvError::Config(format!("unknown bin spec '{s}'"))),
        }
    }
}

/// The four binning strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Eqw,
    Eqf,
    Kmeans,
    Greedy,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Eqw, Strategy::Eqf, Strategy::Kmeans, Strategy::Greedy];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Eqw => "eqw",
            Strategy::Eqf => "eqf",
            Strategy::Kmeans => "kmeans",
            Strategy::Greedy => "greedy",
        }
    }

    /// Runs the strategy. Greedy requires `cross`. Returns the partition and,
    /// for greedy, the optimizer outcome.
    pub fn partition(
        &self,
        fr: &FullRankDecomposition,
        b: usize,
        cross: Option<&CrossProductMatrix>,
        cfg: &GreedyConfig,
    ) -> Result<(BinPartition, Option<GreedyOutcome>)> {
        match self {
            Strategy::Eqw => Ok((eqw_binning(fr, b)?, None)),
            Strategy::Eqf => Ok((eqf_binning(fr, b)?, None)),
            Strategy::Kmeans => Ok((kmeans_binning(fr, b)?, None)),
            Strategy::Greedy => {
                let cross = cross.ok_or_else(|| {
                    NuvError::InvalidInput("greedy binning needs a cross-product matrix".into())
                })?;
                let out = greedy_binning(cross, fr.n_tau(), b, cfg)?;
                Ok((out.partition.clone(), Some(out)))
            }
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = NuvError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "eqw" => Ok(Strategy::Eqw),
            "eqf" => Ok(Strategy::Eqf),
            "kmeans" | "k-means" => Ok(Strategy::Kmeans),
            "greedy" => Ok(Strategy::Greedy),
            _ => Err(NuvError::Config(format!("unknown strategy '{s}'"))),
        }
    }
}

pub(crate) fn check_feasible(b: usize, d_tau: usize) -> Result<()> {
    if b == 0 {
        return Err(NuvError::BinCount("at least one bin is required".into()));
    }
    if b > d_tau {
        return Err(NuvError::Infeasible { bins: b, unique: d_tau });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dense `<A, S Cross S^T>_F` with materialized matrices.
    fn dense_objective(p: &BinPartition, cross: &DMatrix<f64>, n_tau: &[usize]) -> f64 {
        let d: usize = n_tau.iter().sum();
        let mut unique_of = Vec::with_capacity(d);
        for (k, &n) in n_tau.iter().enumerate() {
            unique_of.extend(std::iter::repeat(k).take(n));
        }
        let s_tau = DMatrix::from_fn(d, n_tau.len(), |i, k| if unique_of[i] == k { 1.0 } else { 0.0 });
        let labels = p.labels();
        let s = DMatrix::from_fn(d, p.bins(), |i, j| if labels[unique_of[i]] == j { 1.0 } else { 0.0 });
        let sts = s.transpose() * &s;
        let inv = DMatrix::from_diagonal(&sts.diagonal().map(|x| 1.0 / x));
        let a = &s * inv * s.transpose();
        let m = &s_tau * cross * s_tau.transpose();
        a.component_mul(&m).sum()
    }

    #[test]
    fn objective_matches_dense_oracle() {
        let n_tau = [2usize, 1, 3, 1, 1];
        let g = DMatrix::from_fn(5, 5, |i, j| ((i * 7 + j * 3) % 5) as f64 - 1.7 + 0.1 * i as f64);
        let cross = CrossProductMatrix::new(&g * g.transpose()).unwrap();
        for cuts in [vec![0, 5], vec![0, 2, 5], vec![0, 1, 3, 5], vec![0, 1, 2, 3, 4, 5]] {
            let p = BinPartition::new(cuts, 5).unwrap();
            let fast = frobenius_objective(&p, &cross, &n_tau).unwrap();
            let dense = dense_objective(&p, cross.entries(), &n_tau);
            assert!((fast - dense).abs() <= 1e-10 * dense.abs().max(1.0), "{fast} vs {dense}");
        }
    }

    #[test]
    fn objective_identity_cross_is_b_sigma2() {
        let cross = CrossProductMatrix::scaled_identity(6, 0.7).unwrap();
        let ones = [1usize; 6];
        for cuts in [vec![0, 6], vec![0, 3, 6], vec![0, 1, 2, 6], vec![0, 1, 2, 3, 4, 5, 6]] {
            let p = BinPartition::new(cuts, 6).unwrap();
            let b = p.bins() as f64;
            assert!((frobenius_objective(&p, &cross, &ones).unwrap() - b * 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn objective_single_bin_is_mean_of_sum() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, -0.3, 0.5, 1.0, 0.2, -0.3, 0.2, 3.0]);
        let cross = CrossProductMatrix::new(m.clone()).unwrap();
        let v = frobenius_objective(&BinPartition::single(3), &cross, &[1, 1, 1]).unwrap();
        assert!((v - m.sum() / 3.0).abs() < 1e-12);
    }

    #[test]
    fn cross_validation() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(CrossProductMatrix::new(asym).is_err());
        let neg = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        assert!(CrossProductMatrix::new(neg).is_err());
        assert!(CrossProductMatrix::new(DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn bin_count_rule_values() {
        assert_eq!(bin_count_rules(256), BinCountRules { sturges: 9, rice: 13, sqrt: 16 });
        assert_eq!(bin_count_rules(1000), BinCountRules { sturges: 11, rice: 20, sqrt: 32 });
        assert_eq!(bin_count_rules(1), BinCountRules { sturges: 1, rice: 1, sqrt: 1 });
        // independent float evaluation of the formulas
        for n in 2..2000usize {
            let r = bin_count_rules(n);
            let x = n as f64;
            assert_eq!(r.sturges, ((x.log2().ceil() as usize) + 1).min(n), "n={n}");
            assert_eq!(r.sqrt, (x.sqrt().ceil() as usize).min(n), "n={n}");
        }
    }

    #[test]
    fn spec_and_strategy_parse() {
        assert_eq!("rice".parse::<BinSpec>().unwrap(), BinSpec::Rice);
        assert_eq!("5".parse::<BinSpec>().unwrap(), BinSpec::Fixed(5));
        assert!("five".parse::<BinSpec>().is_err());
        assert_eq!("k-means".parse::<Strategy>().unwrap(), Strategy::Kmeans);
        assert_eq!(BinSpec::Sqrt.to_string(), "sqrt");
    }
}
