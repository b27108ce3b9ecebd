//! First-order predictors of the expected dissimilarity.
//!
//! Every predictor approximates the expectation of a ratio by the ratio of
//! the expectations of its numerator `||A w - w||^2` and denominator
//! `d var(w)`. The bin count `b` is always the number of nonempty bins of
//! the partition, i.e. `tr(A)`.

use serde::{Deserialize, Serialize};

use crate::binning::{frobenius_objective, CrossProductMatrix};
use crate::error::{NuvError, Result};
use crate::measure::{representation_error, total_sum_of_squares, BinPartition, FullRankDecomposition};

/// White noise of variance `sigma2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    sigma2: f64,
}

impl NoiseModel {
    pub fn new(sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(NuvError::InvalidInput(format!("noise variance must be positive, got {sigma2}")));
        }
        Ok(Self { sigma2 })
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
}

/// One named additive term of the numerator or denominator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    pub numerator: f64,
    pub denominator: f64,
}

impl Component {
    fn new(name: &str, numerator: f64, denominator: f64) -> Self {
        Self { name: name.to_string(), numerator, denominator }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub value: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub components: Vec<Component>,
}

impl Prediction {
    fn from_components(components: Vec<Component>) -> Result<Self> {
        let numerator: f64 = components.iter().map(|c| c.numerator).sum();
        let denominator: f64 = components.iter().map(|c| c.denominator).sum();
        if !(denominator > 0.0) || !numerator.is_finite() || !denominator.is_finite() {
            return Err(NuvError::DegenerateModel(format!(
                "expected denominator {denominator} is not positive"
            )));
        }
        Ok(Self { value: numerator / denominator, numerator, denominator, components })
    }
}

fn check_bins(d: usize, b: usize) -> Result<()> {
    if b == 0 {
        return Err(NuvError::BinCount("at least one bin is required".into()));
    }
    if b >= d {
        return Err(NuvError::BinCount(format!("need b < d, got b = {b}, d = {d}")));
    }
    Ok(())
}

/// Expected dissimilarity of a template from white noise,
/// `(d - b) / (d - 1)`, independent of the bin structure.
pub fn predict_noise(d: usize, b: usize) -> Result<Prediction> {
    check_bins(d, b)?;
    let (d, b) = (d as f64, b as f64);
    Prediction::from_components(vec![Component::new("noise", d - b, d - 1.0)])
}

fn check_model(p: &BinPartition, fr_or_n: &[usize], matrix: &CrossProductMatrix) -> Result<()> {
    if matrix.dim() != fr_or_n.len() || p.unique_len() != fr_or_n.len() {
        return Err(NuvError::InvalidInput(format!(
            "dimension mismatch: partition over {}, matrix {}x{}, {} unique values",
            p.unique_len(),
            matrix.dim(),
            matrix.dim(),
            fr_or_n.len()
        )));
    }
    Ok(())
}

/// Expected dissimilarity of a template from a distorted noisy template
/// with cross-product matrix `cross`:
///
/// ```text
/// <n, diag Cross> - <A, S Cross S^T>_F + s2 (d - b)
/// -------------------------------------------------
/// <n, diag Cross> - n^T Cross n / d   + s2 (d - 1)
/// ```
pub fn predict_distorted(
    p: &BinPartition,
    cross: &CrossProductMatrix,
    n_tau: &[usize],
    noise: NoiseModel,
) -> Result<Prediction> {
    check_model(p, n_tau, cross)?;
    let d: usize = n_tau.iter().sum();
    let b = p.bins();
    let (df, bf) = (d as f64, b as f64);
    let energy = cross.weighted_trace(n_tau);
    let alignment = frobenius_objective(p, cross, n_tau)?;
    let mean_energy = cross.quadratic_form(n_tau) / df;
    let s2 = noise.sigma2();
    Prediction::from_components(vec![
        Component::new("distortion_energy", energy, energy),
        Component::new("alignment", -alignment, -mean_energy),
        Component::new("noise", s2 * (df - bf), s2 * (df - 1.0)),
    ])
}

/// Like [`predict_distorted`] for a distortion centered at the template,
/// `E m = tau`, with `cov_mprime` the covariance of `m - tau`:
///
/// ```text
/// ||A t - t||^2 + <n, diag Cov> - <A, S Cov S^T>_F + s2 (d - b)
/// -------------------------------------------------------------
/// d var(t)      + <n, diag Cov> - n^T Cov n / d   + s2 (d - 1)
/// ```
pub fn predict_localized(
    fr: &FullRankDecomposition,
    p: &BinPartition,
    cov_mprime: &CrossProductMatrix,
    noise: NoiseModel,
) -> Result<Prediction> {
    let n_tau = fr.n_tau();
    check_model(p, n_tau, cov_mprime)?;
    let d = fr.len();
    let b = p.bins();
    let (df, bf) = (d as f64, b as f64);
    let energy = cov_mprime.weighted_trace(n_tau);
    let alignment = frobenius_objective(p, cov_mprime, n_tau)?;
    let mean_energy = cov_mprime.quadratic_form(n_tau) / df;
    let s2 = noise.sigma2();
    Prediction::from_components(vec![
        Component::new("template", representation_error(fr, p), total_sum_of_squares(fr)),
        Component::new("distortion_energy", energy, energy),
        Component::new("alignment", -alignment, -mean_energy),
        Component::new("noise", s2 * (df - bf), s2 * (df - 1.0)),
    ])
}

/// Centered spherical distortion on a template with unique values:
///
/// ```text
/// ||A t - t||^2 + s2_m (d - b) + s2 (d - b)
/// -----------------------------------------
/// d var(t)      + s2_m (d - 1) + s2 (d - 1)
/// ```
///
/// The only partition-dependent term is the representation error, so the
/// prediction is minimized by exact k-means binning.
pub fn predict_spherical(
    fr: &FullRankDecomposition,
    p: &BinPartition,
    sigma2_mprime: f64,
    noise: NoiseModel,
) -> Result<Prediction> {
    if !fr.is_unique() {
        return Err(NuvError::InvalidInput(format!(
            "spherical prediction needs unique template values, found {} unique of {}",
            fr.unique_len(),
            fr.len()
        )));
    }
    if p.unique_len() != fr.unique_len() {
        return Err(NuvError::InvalidInput("partition does not match the template".into()));
    }
    if !(sigma2_mprime >= 0.0 && sigma2_mprime.is_finite()) {
        return Err(NuvError::InvalidInput(format!(
            "distortion variance must be nonnegative, got {sigma2_mprime}"
        )));
    }
    let (df, bf) = (fr.len() as f64, p.bins() as f64);
    let s2 = noise.sigma2();
    Prediction::from_components(vec![
        Component::new("template", representation_error(fr, p), total_sum_of_squares(fr)),
        Component::new("distortion", sigma2_mprime * (df - bf), sigma2_mprime * (df - 1.0)),
        Component::new("noise", s2 * (df - bf), s2 * (df - 1.0)),
    ])
}

/// Closed form for a spherical distortion `Cross = sigma2_m I` on a
/// template with unique values:
/// `(s2_m (d - b) + s2 (d - b)) / (s2_m (d - 1) + s2 (d - 1))`.
pub fn predict_corollary(d: usize, b: usize, sigma2_m: f64, noise: NoiseModel) -> Result<Prediction> {
    check_bins(d, b)?;
    if !(sigma2_m >= 0.0 && sigma2_m.is_finite()) {
        return Err(NuvError::InvalidInput(format!(
            "distortion variance must be nonnegative, got {sigma2_m}"
        )));
    }
    let (df, bf) = (d as f64, b as f64);
    let s2 = noise.sigma2();
    Prediction::from_components(vec![
        Component::new("distortion", sigma2_m * (df - bf), sigma2_m * (df - 1.0)),
        Component::new("noise", s2 * (df - bf), s2 * (df - 1.0)),
    ])
}

/// Expected discrimination power: noise prediction minus distorted
/// prediction. Larger is better.
pub fn discrimination_power(noise_pred: &Prediction, distorted_pred: &Prediction) -> f64 {
    noise_pred.value - distorted_pred.value
}
