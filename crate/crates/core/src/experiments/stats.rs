//! AUC and McNemar significance for paired recognition outcomes.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};
use statrs::function::erf::erfc;

/// How the McNemar p-value is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum McnemarMethod {
    /// Exact binomial test below `exact_below` discordant pairs, continuity
    /// corrected chi-square otherwise.
    Auto { exact_below: u64 },
    Exact,
    ChiSquare,
}

impl Default for McnemarMethod {
    fn default() -> Self {
        McnemarMethod::Auto { exact_below: 25 }
    }
}

/// Two-sided McNemar p-value from the discordant counts.
pub fn mcnemar(n01: u64, n10: u64) -> f64 {
    mcnemar_with(n01, n10, McnemarMethod::default())
}

pub fn mcnemar_with(n01: u64, n10: u64, method: McnemarMethod) -> f64 {
    let n = n01 + n10;
    if n == 0 {
        return 1.0;
    }
    let exact = match method {
        McnemarMethod::Auto { exact_below } => n < exact_below,
        McnemarMethod::Exact => true,
        McnemarMethod::ChiSquare => false,
    };
    if exact {
        let k = n01.min(n10);
        let binom = Binomial::new(0.5, n).expect("valid binomial parameters");
        (2.0 * binom.cdf(k)).min(1.0)
    } else {
        let diff = n01.abs_diff(n10) as f64;
        let stat = (diff - 1.0) * (diff - 1.0) / n as f64;
        // chi-square(1) survival function
        erfc((stat / 2.0).sqrt()).clamp(0.0, 1.0)
    }
}

/// `(#{distorted < noise} + 0.5 #{ties}) / n` over paired
/// `(d_noise, d_distorted)` scores.
pub fn paired_auc(pairs: &[(f64, f64)]) -> Option<f64> {
    if pairs.is_empty() {
        return None;
    }
    let credit: f64 = pairs
        .iter()
        .map(|&(noise, distorted)| {
            if distorted < noise {
                1.0
            } else if distorted == noise {
                0.5
            } else {
                0.0
            }
        })
        .sum();
    Some(credit / pairs.len() as f64)
}
