//! Distortion models over the unique template values.
//!
//! A realization `m` of the random tone mapping evaluated at the unique
//! values is a `d_tau`-dimensional random vector. Models carry its mean and
//! covariance; the cross-product matrix `E[m m^T]` follows from both.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::binning::CrossProductMatrix;
use crate::error::{NuvError, Result};

/// Mean vector and covariance matrix of the distortion.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionModel {
    mu: DVector<f64>,
    cov: DMatrix<f64>,
}

impl DistortionModel {
    /// Checks dimensions, finiteness and symmetry to 1e-9 relative.
    /// Positive semi-definiteness is checked by [`Self::is_numerically_psd`]
    /// and, implicitly, by the factorization in [`MvnSampler::new`].
    pub fn new(mu: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = mu.len();
        if n == 0 {
            return Err(NuvError::InvalidInput("distortion model needs at least one coordinate".into()));
        }
        if cov.nrows() != n || cov.ncols() != n {
            return Err(NuvError::InvalidInput(format!(
                "covariance is {}x{} for a mean of length {n}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if mu.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(NuvError::InvalidInput("distortion model has non-finite entries".into()));
        }
        let scale = cov.amax().max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in (i + 1)..n {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-9 * scale {
                    return Err(NuvError::InvalidInput(format!("covariance is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { mu, cov })
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Smallest eigenvalue at least `-1e-9 trace / d_tau`.
    pub fn is_numerically_psd(&self) -> bool {
        let n = self.dim() as f64;
        let tol = 1e-9 * self.cov.trace().abs() / n;
        let eig = self.cov.clone().symmetric_eigen();
        eig.eigenvalues.iter().all(|&l| l >= -tol)
    }
}

/// `Cross(m) = Cov(m) + mu mu^T`.
pub fn cross_from_model(model: &DistortionModel) -> CrossProductMatrix {
    let mut m = model.cov.clone();
    m.ger(1.0, &model.mu, &model.mu, 1.0);
    // restore exact symmetry after the rank-one update
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    CrossProductMatrix::new(m).expect("covariance plus outer product is a valid cross-product matrix")
}

/// Realizations `m_i = M_i[tau]` of sampled tone-mapping functions.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionFamilySample {
    vectors: Vec<Vec<f64>>,
}

impl FunctionFamilySample {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = vectors.first() else {
            return Err(NuvError::InvalidInput("function family sample is empty".into()));
        };
        let n = first.len();
        if n == 0 {
            return Err(NuvError::InvalidInput("function family vectors are empty".into()));
        }
        if let Some(i) = vectors.iter().position(|v| v.len() != n) {
            return Err(NuvError::InvalidInput(format!(
                "sample {i} has length {}, expected {n}",
                vectors[i].len()
            )));
        }
        if vectors.iter().flatten().any(|v| !v.is_finite()) {
            return Err(NuvError::InvalidInput("function family sample has non-finite entries".into()));
        }
        Ok(Self { vectors })
    }

    /// Applies every function to the unique values.
    pub fn from_functions<F: Fn(f64) -> f64>(tau: &[f64], functions: impl IntoIterator<Item = F>) -> Result<Self> {
        Self::new(
            functions
                .into_iter()
                .map(|f| tau.iter().map(|&x| f(x)).collect())
                .collect(),
        )
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// `Cross(m) ~ sum_i m_i m_i^T / N`.
pub fn estimate_cross(samples: &FunctionFamilySample) -> CrossProductMatrix {
    let n = samples.vectors[0].len();
    let rows = samples.len();
    let data = DMatrix::from_fn(rows, n, |i, j| samples.vectors[i][j]);
    let mut m = data.transpose() * &data;
    m /= rows as f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    CrossProductMatrix::new(m).expect("mean of outer products is a valid cross-product matrix")
}

/// Draws from `N(mu, cov)` using a lower-triangular factor of `cov`.
#[derive(Debug, Clone)]
pub struct MvnSampler {
    mu: DVector<f64>,
    factor: Factor,
}

#[derive(Debug, Clone)]
enum Factor {
    Zero,
    Diagonal(DVector<f64>),
    Lower(DMatrix<f64>),
}

impl MvnSampler {
    /// Factorizes the covariance. A failed factorization is retried with
    /// diagonal jitter `1e-10 trace / d_tau`, escalated tenfold, up to three
    /// times before reporting a degenerate model.
    pub fn new(model: &DistortionModel) -> Result<Self> {
        let cov = &model.cov;
        let n = model.dim();
        let trace = cov.trace();
        let factor = if cov.iter().all(|&v| v == 0.0) {
            Factor::Zero
        } else if (0..n).all(|i| (0..n).all(|j| i == j || cov[(i, j)] == 0.0)) {
            let diag = cov.diagonal();
            if diag.iter().any(|&v| v < 0.0) {
                return Err(NuvError::DegenerateModel("negative variance on the diagonal".into()));
            }
            Factor::Diagonal(diag.map(f64::sqrt))
        } else {
            let base = 1e-10 * trace.abs() / n as f64;
            let mut found = None;
            for attempt in 0..=3 {
                let jitter = if attempt == 0 { 0.0 } else { base * 10f64.powi(attempt - 1) };
                let mut m = cov.clone();
                for i in 0..n {
                    m[(i, i)] += jitter;
                }
                if let Some(ch) = m.cholesky() {
                    found = Some(ch.unpack());
                    break;
                }
            }
            match found {
                Some(l) => Factor::Lower(l),
                None => {
                    return Err(NuvError::DegenerateModel(
                        "covariance factorization failed after jitter".into(),
                    ))
                }
            }
        };
        Ok(Self { mu: model.mu.clone(), factor })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let n = self.mu.len();
        match &self.factor {
            Factor::Zero => self.mu.clone(),
            Factor::Diagonal(sd) => {
                DVector::from_fn(n, |i, _| self.mu[i] + sd[i] * rng.sample::<f64, _>(StandardNormal))
            }
            Factor::Lower(l) => {
                let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                l * z + &self.mu
            }
        }
    }
}

/// One draw `m ~ N(mu, Cov)`.
pub fn sample_distortion<R: Rng + ?Sized>(model: &DistortionModel, rng: &mut R) -> Result<DVector<f64>> {
    Ok(MvnSampler::new(model)?.sample(rng))
}

/// Tries a plain Cholesky factorization without jitter.
pub fn factors_without_jitter(cov: &DMatrix<f64>) -> bool {
    cov.clone().cholesky().is_some()
}

/// Random model for general distortions: `mu` iid standard normal and
/// `cov = G G^T / d_tau` with `G` an iid standard-normal square matrix.
pub fn random_general_model<R: Rng + ?Sized>(d_tau: usize, rng: &mut R) -> Result<DistortionModel> {
    if d_tau == 0 {
        return Err(NuvError::InvalidInput("d_tau must be positive".into()));
    }
    let mu = DVector::from_fn(d_tau, |_, _| rng.sample::<f64, _>(StandardNormal));
    let g = DMatrix::from_fn(d_tau, d_tau, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut cov = &g * g.transpose();
    cov /= d_tau as f64;
    for i in 0..d_tau {
        for j in (i + 1)..d_tau {
            let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    DistortionModel::new(mu, cov)
}

/// Distortion centered at the template, `mu = tau`, `cov = sigma2_m I`.
pub fn spherical_model(tau: &[f64], sigma2_m: f64) -> Result<DistortionModel> {
    if !(sigma2_m >= 0.0 && sigma2_m.is_finite()) {
        return Err(NuvError::InvalidInput(format!("sigma2_m must be nonnegative, got {sigma2_m}")));
    }
    let n = tau.len();
    DistortionModel::new(
        DVector::from_column_slice(tau),
        DMatrix::from_diagonal_element(n, n, sigma2_m),
    )
}
