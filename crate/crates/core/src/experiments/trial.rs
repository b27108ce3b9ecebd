//! One simulated test case: template, noise window, distorted template and
//! the per-strategy scores.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Regime};
use crate::binning::{BinSpec, CrossProductMatrix, GreedyConfig, Strategy};
use crate::distortion::{cross_from_model, random_general_model, spherical_model, MvnSampler};
use crate::error::{NuvError, Result};
use crate::measure::{assign_bins, full_rank_decompose, nuv, FullRankDecomposition, Template};
use crate::rng::{trial_rng, TrialRng};
use crate::theory::{predict_distorted, predict_localized, predict_noise, predict_spherical, NoiseModel};

const MAX_TEMPLATE_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateDistribution {
    Normal,
    Uniform,
    /// Each coordinate from `N(0, 1)` or `N(2, 1)` with equal probability.
    Bimodal,
}

impl TemplateDistribution {
    pub fn name(&self) -> &'static str {
        match self {
            TemplateDistribution::Normal => "normal",
            TemplateDistribution::Uniform => "uniform",
            TemplateDistribution::Bimodal => "bimodal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateMeta {
    pub d: usize,
    pub distribution: TemplateDistribution,
    pub gamma: f64,
    /// Draws rejected because they were constant after processing.
    pub resampled: usize,
}

/// Draws a template: dimension uniform over `d_range`, one of three value
/// distributions, min-max normalized to `[0, 1]`, raised to a random exponent
/// from `gamma_set`, then rounded to `round_digits` if set. Templates that
/// end up constant are redrawn.
pub fn sample_template<R: Rng + ?Sized>(rng: &mut R, cfg: &ExperimentConfig) -> Result<(Template, TemplateMeta)> {
    for attempt in 0..MAX_TEMPLATE_ATTEMPTS {
        let d = rng.random_range(cfg.d_range.0..=cfg.d_range.1);
        let distribution = match rng.random_range(0..3) {
            0 => TemplateDistribution::Normal,
            1 => TemplateDistribution::Uniform,
            _ => TemplateDistribution::Bimodal,
        };
        let raw: Vec<f64> = match distribution {
            TemplateDistribution::Normal => (0..d).map(|_| rng.sample(StandardNormal)).collect(),
            TemplateDistribution::Uniform => (0..d).map(|_| rng.random::<f64>()).collect(),
            TemplateDistribution::Bimodal => (0..d)
                .map(|_| {
                    let shift = if rng.random_bool(0.5) { 2.0 } else { 0.0 };
                    shift + rng.sample::<f64, _>(StandardNormal)
                })
                .collect(),
        };
        let gamma = cfg.gamma_set[rng.random_range(0..cfg.gamma_set.len())];

        let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            continue;
        }
        let mut values: Vec<f64> = raw.iter().map(|&v| ((v - lo) / (hi - lo)).powf(gamma)).collect();
        if let Some(k) = cfg.round_digits {
            for v in &mut values {
                *v = crate::measure::round_half_even(*v, k);
            }
        }
        let first = values[0];
        if values.iter().all(|&v| v == first) {
            continue;
        }
        let meta = TemplateMeta { d, distribution, gamma, resampled: attempt };
        return Ok((Template::new(values)?, meta));
    }
    Err(NuvError::Config(format!(
        "no non-constant template after {MAX_TEMPLATE_ATTEMPTS} attempts"
    )))
}

/// Scores of one (strategy, bin spec) cell of a trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub strategy: Strategy,
    pub bin_spec: BinSpec,
    pub requested_b: usize,
    pub effective_b: usize,
    /// `None` when the cell was scored; otherwise why it failed.
    pub failure: Option<String>,
    pub d_noise: Option<f64>,
    pub d_distorted: Option<f64>,
    pub prediction_noise: Option<f64>,
    pub prediction_distorted: Option<f64>,
    /// `d_distorted < d_noise`.
    pub recognized: Option<bool>,
    /// `d_distorted == d_noise`.
    pub tie: Option<bool>,
    /// Final greedy objective, for the greedy strategy.
    pub greedy_objective: Option<f64>,
}

impl CellRecord {
    pub fn is_ok(&self) -> bool {
        self.failure.is_none()
    }

    /// AUC credit: 1 for a recognition, 0.5 for a tie, 0 otherwise.
    pub fn credit(&self) -> Option<f64> {
        match (self.recognized, self.tie) {
            (Some(true), _) => Some(1.0),
            (Some(false), Some(true)) => Some(0.5),
            (Some(false), _) => Some(0.0),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub d: usize,
    pub d_tau: usize,
    pub distribution: TemplateDistribution,
    pub gamma: f64,
    pub sigma2: f64,
    /// Spherical regime distortion variance.
    pub sigma2_m: Option<f64>,
    /// Fingerprint of the sampled general-regime model.
    pub model_hash: Option<String>,
    pub cells: Vec<CellRecord>,
}

/// Everything a trial samples, before any binning is applied.
#[derive(Debug, Clone)]
pub struct TrialSample {
    pub template: Template,
    pub meta: TemplateMeta,
    pub fr: FullRankDecomposition,
    pub sigma2: f64,
    pub noise_window: Vec<f64>,
    pub distorted_window: Vec<f64>,
    pub cross: CrossProductMatrix,
    pub sigma2_m: Option<f64>,
    pub model_hash: Option<String>,
}

fn fnv1a(values: impl Iterator<Item = f64>) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for byte in v.to_bits().to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

/// Draws the template, the two noise vectors, the distortion model and the
/// distorted window. The noise window and the additive noise share one
/// standard deviation drawn from `sigma_range`.
pub fn sample_trial(cfg: &ExperimentConfig, rng: &mut TrialRng) -> Result<TrialSample> {
    let (template, meta) = sample_template(rng, cfg)?;
    let fr = full_rank_decompose(&template, None);
    let d = template.len();

    let sigma = rng.sample(Uniform::new_inclusive(cfg.sigma_range.0, cfg.sigma_range.1).map_err(cfg_err)?);
    let noise = Normal::new(0.0, sigma).map_err(|e| NuvError::Config(e.to_string()))?;
    let noise_window: Vec<f64> = (0..d).map(|_| noise.sample(rng)).collect();
    let additive: Vec<f64> = (0..d).map(|_| noise.sample(rng)).collect();

    let (model, sigma2_m) = match cfg.regime {
        Regime::General => (random_general_model(fr.unique_len(), rng)?, None),
        Regime::Spherical => {
            let s2m = rng.sample(Uniform::new_inclusive(cfg.sigma2_m_range.0, cfg.sigma2_m_range.1).map_err(cfg_err)?);
            (spherical_model(fr.tau(), s2m)?, Some(s2m))
        }
    };
    let model_hash = match cfg.regime {
        Regime::General => Some(fnv1a(model.mu().iter().chain(model.cov().iter()).copied())),
        Regime::Spherical => None,
    };
    let m = MvnSampler::new(&model)?.sample(rng);
    let cross = cross_from_model(&model);
    let distorted_window: Vec<f64> = fr
        .index_map()
        .iter()
        .zip(&additive)
        .map(|(&k, z)| m[k] + z)
        .collect();

    Ok(TrialSample {
        template,
        meta,
        fr,
        sigma2: sigma * sigma,
        noise_window,
        distorted_window,
        cross,
        sigma2_m,
        model_hash,
    })
}

fn cfg_err(e: impl std::fmt::Display) -> NuvError {
    NuvError::Config(e.to_string())
}

struct Scored {
    effective_b: usize,
    d_noise: f64,
    d_distorted: f64,
    prediction_noise: f64,
    prediction_distorted: f64,
    greedy_objective: Option<f64>,
}

fn score_cell(
    cfg: &ExperimentConfig,
    sample: &TrialSample,
    strategy: Strategy,
    b: usize,
    greedy_seed: u64,
) -> Result<Scored> {
    let greedy = GreedyConfig {
        restarts: cfg.greedy_restarts,
        seed: greedy_seed,
        max_iterations: cfg.greedy_max_iterations,
    };
    let fr = &sample.fr;
    let (partition, outcome) = strategy.partition(fr, b, Some(&sample.cross), &greedy)?;
    let assignment = assign_bins(fr, &partition)?;
    let d_noise = nuv(&assignment, &sample.noise_window)?;
    let d_distorted = nuv(&assignment, &sample.distorted_window)?;

    let noise = NoiseModel::new(sample.sigma2)?;
    let effective_b = partition.bins();
    let prediction_noise = predict_noise(fr.len(), effective_b)?.value;
    let prediction_distorted = match sample.sigma2_m {
        None => predict_distorted(&partition, &sample.cross, fr.n_tau(), noise)?.value,
        Some(s2m) if fr.is_unique() => predict_spherical(fr, &partition, s2m, noise)?.value,
        Some(s2m) => {
            let cov = CrossProductMatrix::scaled_identity(fr.unique_len(), s2m)?;
            predict_localized(fr, &partition, &cov, noise)?.value
        }
    };
    Ok(Scored {
        effective_b,
        d_noise,
        d_distorted,
        prediction_noise,
        prediction_distorted,
        greedy_objective: outcome.map(|o| o.objective),
    })
}

/// Runs trial `trial_index` of the experiment. Every (strategy, bin spec)
/// cell scores the same noise window and the same distorted window.
/// Per-cell failures are recorded in the cell; sampling failures abort the
/// trial.
pub fn run_trial(cfg: &ExperimentConfig, trial_index: u64) -> Result<TrialRecord> {
    let mut rng = trial_rng(cfg.master_seed, trial_index);
    let sample = sample_trial(cfg, &mut rng)?;
    let d_tau = sample.fr.unique_len();

    let mut cells = Vec::with_capacity(cfg.strategies.len() * cfg.bin_specs.len());
    for &strategy in &cfg.strategies {
        for &bin_spec in &cfg.bin_specs {
            let requested_b = bin_spec.resolve(d_tau).min(d_tau);
            let greedy_seed: u64 = rng.random();
            let cell = match score_cell(cfg, &sample, strategy, requested_b, greedy_seed) {
                Ok(s) => CellRecord {
                    strategy,
                    bin_spec,
                    requested_b,
                    effective_b: s.effective_b,
                    failure: None,
                    d_noise: Some(s.d_noise),
                    d_distorted: Some(s.d_distorted),
                    prediction_noise: Some(s.prediction_noise),
                    prediction_distorted: Some(s.prediction_distorted),
                    recognized: Some(s.d_distorted < s.d_noise),
                    tie: Some(s.d_distorted == s.d_noise),
                    greedy_objective: s.greedy_objective,
                },
                Err(e) => CellRecord {
                    strategy,
                    bin_spec,
                    requested_b,
                    effective_b: 0,
                    failure: Some(e.to_string()),
                    d_noise: None,
                    d_distorted: None,
                    prediction_noise: None,
                    prediction_distorted: None,
                    recognized: None,
                    tie: None,
                    greedy_objective: None,
                },
            };
            cells.push(cell);
        }
    }

    Ok(TrialRecord {
        trial_index,
        d: sample.meta.d,
        d_tau,
        distribution: sample.meta.distribution,
        gamma: sample.meta.gamma,
        sigma2: sample.sigma2,
        sigma2_m: sample.sigma2_m,
        model_hash: sample.model_hash,
        cells,
    })
}
