use serde::{Deserialize, Serialize};

use super::stats::McnemarMethod;
use crate::binning::{BinSpec, Strategy};
use crate::error::{NuvError, Result};

/// Which distortion population the trials draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Random mean and random covariance, rounded templates.
    General,
    /// Centered at the template with isotropic covariance, unrounded.
    Spherical,
}

impl std::str::FromStr for Regime {
    type Err = NuvError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "general" => Ok(Regime::General),
            "spherical" => Ok(Regime::Spherical),
            _ => Err(NuvError::Config(format!("unknown regime '{s}'"))),
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::General => "general",
            Regime::Spherical => "spherical",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub trials: usize,
    pub master_seed: u64,
    pub regime: Regime,
    /// Inclusive template dimension range.
    pub d_range: (usize, usize),
    /// Exponents applied to the normalized template.
    pub gamma_set: Vec<f64>,
    /// Range of the noise standard deviation.
    pub sigma_range: (f64, f64),
    /// Range of the spherical distortion variance.
    pub sigma2_m_range: (f64, f64),
    pub bin_specs: Vec<BinSpec>,
    pub strategies: Vec<Strategy>,
    pub round_digits: Option<u32>,
    pub greedy_restarts: usize,
    pub greedy_max_iterations: usize,
    pub mcnemar: McnemarMethod,
}

impl ExperimentConfig {
    /// Defaults for `regime`: `d` in `[100, 1000]`, gamma in
    /// `{1/3, 1/2, 1, 2, 3}`, sigma and sigma2_m uniform on `[0.1, 2.0]`,
    /// bins `2, 5, sturges, rice, sqrt`, all four strategies, and 3-digit
    /// rounding for the general regime only.
    pub fn new(regime: Regime) -> Self {
        Self {
            trials: 500,
            master_seed: 42,
            regime,
            d_range: (100, 1000),
            gamma_set: vec![1.0 / 3.0, 0.5, 1.0, 2.0, 3.0],
            sigma_range: (0.1, 2.0),
            sigma2_m_range: (0.1, 2.0),
            bin_specs: vec![
                BinSpec::Fixed(2),
                BinSpec::Fixed(5),
                BinSpec::Sturges,
                BinSpec::Rice,
                BinSpec::Sqrt,
            ],
            strategies: Strategy::ALL.to_vec(),
            round_digits: match regime {
                Regime::General => Some(3),
                Regime::Spherical => None,
            },
            greedy_restarts: 1,
            greedy_max_iterations: 1_000_000,
            mcnemar: McnemarMethod::default(),
        }
    }

    pub fn general() -> Self {
        Self::new(Regime::General)
    }

    pub fn spherical() -> Self {
        Self::new(Regime::Spherical)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(NuvError::Config(m.to_string()));
        if self.trials == 0 {
            return fail("trials must be at least 1");
        }
        let (lo, hi) = self.d_range;
        if lo < 2 || hi > 1_000_000 || lo > hi {
            return fail("d_range must lie within [2, 1000000] with min <= max");
        }
        if self.gamma_set.is_empty() || self.gamma_set.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return fail("gamma_set must be nonempty with positive exponents");
        }
        for (name, (a, b)) in [("sigma_range", self.sigma_range), ("sigma2_m_range", self.sigma2_m_range)] {
            if !(a > 0.0 && a <= b && b.is_finite()) {
                return Err(NuvError::Config(format!("{name} must satisfy 0 < min <= max")));
            }
        }
        if self.bin_specs.is_empty() {
            return fail("at least one bin spec is required");
        }
        if self.bin_specs.contains(&BinSpec::Fixed(0)) {
            return fail("fixed bin counts must be positive");
        }
        if self.strategies.is_empty() {
            return fail("at least one strategy is required");
        }
        if self.greedy_restarts == 0 || self.greedy_max_iterations == 0 {
            return fail("greedy restarts and max_iterations must be positive");
        }
        Ok(())
    }
}
