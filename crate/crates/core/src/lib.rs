//! Piecewise-constant normalized unexplained variance (nUV) for template
//! matching, with binning strategies chosen to maximize its discrimination
//! power.
//!
//! `D(t, w)` is the fraction of the variance of a window `w` that a
//! piecewise-constant function of the template `t` cannot explain. The
//! pieces come from a binning of the template values; this crate provides
//! equal-width, equal-frequency, exact 1-D k-means and a greedy optimizer of
//! the alignment between the binning and the second moments of the expected
//! distortion. Closed-form first-order predictions of the expected
//! dissimilarity and a Monte-Carlo harness that checks them live alongside.
//!
//! ```
//! use nuv_core::{assign_bins, full_rank_decompose, nuv, BinPartition, Template};
//!
//! let t = Template::new(vec![2.0, 0.0, 5.0]).unwrap();
//! let fr = full_rank_decompose(&t, None);
//! // bins {0, 2} | {5} over the sorted unique values
//! let p = BinPartition::new(vec![0, 2, 3], fr.unique_len()).unwrap();
//! let a = assign_bins(&fr, &p).unwrap();
//! let d = nuv(&a, &[8.0, 2.0, 2.0]).unwrap();
//! assert!((d - 0.75).abs() < 1e-12);
//! ```

pub mod binning;
pub mod distortion;
pub mod error;
pub mod experiments;
pub mod measure;
pub mod rng;
pub mod theory;

pub use binning::{
    bin_count_rules, eqf_binning, eqw_binning, frobenius_objective, greedy_binning, kmeans_binning, BinCountRules,
    BinSpec, CrossProductMatrix, GreedyConfig, GreedyOutcome, Strategy,
};
pub use distortion::{
    cross_from_model, estimate_cross, random_general_model, sample_distortion, spherical_model, DistortionModel,
    FunctionFamilySample, MvnSampler,
};
pub use error::{NuvError, Result};
pub use measure::{
    assign_bins, conditional_means, full_rank_decompose, nuv, population_variance, representation_error,
    total_sum_of_squares, BinAssignment, BinPartition, FullRankDecomposition, Template,
};
pub use theory::{
    discrimination_power, predict_corollary, predict_distorted, predict_localized, predict_noise,
    predict_spherical, Component, NoiseModel, Prediction,
};
