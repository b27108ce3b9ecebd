//! Sampling oracles for the predictors and the distortion models.

use nalgebra::{DMatrix, DVector};
use nuv_core::distortion::factors_without_jitter;
use nuv_core::{
    assign_bins, cross_from_model, eqw_binning, estimate_cross, full_rank_decompose, kmeans_binning, nuv,
    population_variance, predict_distorted, predict_localized, predict_noise, predict_spherical, random_general_model,
    spherical_model, BinPartition, CrossProductMatrix, DistortionModel, FullRankDecomposition, FunctionFamilySample,
    MvnSampler, NoiseModel, Template,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn rounded_template(rng: &mut ChaCha8Rng, d: usize) -> FullRankDecomposition {
    let v: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    full_rank_decompose(&Template::new(v).unwrap(), Some(2))
}

/// Mean measured dissimilarity of `n` windows `m[index_map] + zeta`.
fn mean_distorted(
    rng: &mut ChaCha8Rng,
    fr: &FullRankDecomposition,
    p: &BinPartition,
    model: &DistortionModel,
    sigma: f64,
    n: usize,
) -> f64 {
    let a = assign_bins(fr, p).unwrap();
    let sampler = MvnSampler::new(model).unwrap();
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut total = 0.0;
    for _ in 0..n {
        let m = sampler.sample(rng);
        let w: Vec<f64> = fr.index_map().iter().map(|&k| m[k] + noise.sample(rng)).collect();
        total += nuv(&a, &w).unwrap();
    }
    total / n as f64
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn noise_prediction_matches_simulation() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let fr = full_rank_decompose(&Template::new(normals(&mut rng, 500)).unwrap(), None);
    let p = kmeans_binning(&fr, 10).unwrap();
    let a = assign_bins(&fr, &p).unwrap();
    let mean: f64 = (0..2000).map(|_| nuv(&a, &normals(&mut rng, 500)).unwrap()).sum::<f64>() / 2000.0;
    let expected = 490.0 / 499.0;
    assert!(rel(mean, expected) <= 0.005, "{mean} vs {expected}");
    assert_eq!(predict_noise(500, 10).unwrap().value, expected);
}

#[test]
fn variance_of_standard_normals() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let v = population_variance(&normals(&mut rng, 100_000)).unwrap();
    assert!((v - 1.0).abs() < 0.05, "{v}");
}

#[test]
fn distorted_prediction_matches_simulation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..3 {
        let fr = rounded_template(&mut rng, 300);
        let model = random_general_model(fr.unique_len(), &mut rng).unwrap();
        let cross = cross_from_model(&model);
        let p = eqw_binning(&fr, 5).unwrap();
        let sigma = 0.7;
        let predicted = predict_distorted(&p, &cross, fr.n_tau(), NoiseModel::new(sigma * sigma).unwrap())
            .unwrap()
            .value;
        let measured = mean_distorted(&mut rng, &fr, &p, &model, sigma, 2000);
        assert!(rel(measured, predicted) <= 0.01, "{measured} vs {predicted}");
    }
}

#[test]
fn localized_prediction_matches_simulation() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..3 {
        let fr = rounded_template(&mut rng, 300);
        let n = fr.unique_len();
        let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let cov = (&g * g.transpose()) * (0.5 / n as f64);
        let cov = (&cov + cov.transpose()) * 0.5;
        let model = DistortionModel::new(DVector::from_column_slice(fr.tau()), cov.clone()).unwrap();
        let p = kmeans_binning(&fr, 8).unwrap();
        let sigma = 0.4;
        let noise = NoiseModel::new(sigma * sigma).unwrap();
        let predicted = predict_localized(&fr, &p, &CrossProductMatrix::new(cov).unwrap(), noise).unwrap().value;
        let measured = mean_distorted(&mut rng, &fr, &p, &model, sigma, 2000);
        assert!(rel(measured, predicted) <= 0.01, "{measured} vs {predicted}");
    }
}

#[test]
fn spherical_prediction_matches_simulation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..3 {
        let v: Vec<f64> = (0..400).map(|_| rng.random::<f64>().powi(2)).collect();
        let fr = full_rank_decompose(&Template::new(v).unwrap(), None);
        let s2m = rng.random_range(0.1..2.0);
        let sigma: f64 = rng.random_range(0.1..2.0);
        let model = spherical_model(fr.tau(), s2m).unwrap();
        let p = kmeans_binning(&fr, 9).unwrap();
        let predicted = predict_spherical(&fr, &p, s2m, NoiseModel::new(sigma * sigma).unwrap()).unwrap().value;
        let measured = mean_distorted(&mut rng, &fr, &p, &model, sigma, 2000);
        assert!(rel(measured, predicted) <= 0.01, "{measured} vs {predicted}");
    }
}

/// Composite Simpson's rule.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let h = (b - a) / intervals as f64;
    let mut s = f(a) + f(b);
    for i in 1..intervals {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn gamma_family_cross_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let tau: Vec<f64> = {
        let mut v: Vec<f64> = (0..12).map(|_| rng.random_range(0.8..1.0)).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let gammas = Uniform::new(1.0, 10.0).unwrap();
    let funcs: Vec<_> = (0..1000)
        .map(|_| {
            let g: f64 = gammas.sample(&mut rng);
            move |x: f64| x.powf(g)
        })
        .collect();
    let cross = estimate_cross(&FunctionFamilySample::from_functions(&tau, funcs).unwrap());
    let eig = cross.entries().clone().symmetric_eigen();
    assert!(eig.eigenvalues.iter().all(|&e| e > -1e-12));
    for p in 0..tau.len() {
        for q in 0..tau.len() {
            let exact = simpson(|g| (tau[p] * tau[q]).powf(g), 1.0, 10.0, 2000) / 9.0;
            assert!(rel(cross.get(p, q), exact) <= 0.03, "({p},{q}) {} vs {exact}", cross.get(p, q));
        }
    }
}

fn empirical_second_moment(rng: &mut ChaCha8Rng, sampler: &MvnSampler, n: usize) -> DMatrix<f64> {
    let dim = sampler.dim();
    let mut acc = DMatrix::zeros(dim, dim);
    for _ in 0..n {
        let m = sampler.sample(rng);
        acc.ger(1.0, &m, &m, 1.0);
    }
    acc / n as f64
}

#[test]
fn model_cross_matches_sampled_outer_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 100_000;
    let model = random_general_model(6, &mut rng).unwrap();
    let cross = cross_from_model(&model);
    let empirical = empirical_second_moment(&mut rng, &MvnSampler::new(&model).unwrap(), n);
    let mut tight = 0;
    for i in 0..6 {
        for j in 0..6 {
            let c = cross.get(i, j);
            if c.abs() <= 0.1 {
                continue;
            }
            // standard error of the mean of m_i m_j under a Gaussian model
            let var = cross.get(i, i) * cross.get(j, j) + c * c - 2.0 * (model.mu()[i] * model.mu()[j]).powi(2);
            let se = (var / n as f64).sqrt();
            assert!((empirical[(i, j)] - c).abs() <= 4.0 * se, "({i},{j}) off by more than 4 SE");
            // 2% is only resolvable where the sampling error is well below it
            if se <= 0.005 * c.abs() {
                assert!(rel(empirical[(i, j)], c) <= 0.02, "({i},{j})");
                tight += 1;
            }
        }
    }
    assert!(tight >= 6, "{tight}");
}

#[test]
fn sampler_reproduces_identity_covariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let model = DistortionModel::new(DVector::zeros(8), DMatrix::identity(8, 8)).unwrap();
    let emp = empirical_second_moment(&mut rng, &MvnSampler::new(&model).unwrap(), 100_000);
    let err = (emp - DMatrix::<f64>::identity(8, 8)).symmetric_eigen();
    let spectral = err.eigenvalues.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    assert!(spectral <= 0.05, "{spectral}");
}

#[test]
fn spherical_model_samples_have_requested_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let tau = [0.1, 0.4, 0.5, 0.9];
    let s2m = 0.7;
    let sampler = MvnSampler::new(&spherical_model(&tau, s2m).unwrap()).unwrap();
    let n = 100_000;
    let mut sq = [0.0; 4];
    for _ in 0..n {
        let m = sampler.sample(&mut rng);
        for k in 0..4 {
            sq[k] += (m[k] - tau[k]).powi(2);
        }
    }
    for s in sq {
        assert!(rel(s / n as f64, s2m) <= 0.05);
    }
}

#[test]
fn general_model_trace_and_factorization() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let dim = 40;
    let mean_trace: f64 =
        (0..100).map(|_| random_general_model(dim, &mut rng).unwrap().cov().trace()).sum::<f64>() / 100.0;
    assert!(rel(mean_trace, dim as f64) <= 0.10, "{mean_trace}");

    let ok = (0..1000).filter(|_| factors_without_jitter(random_general_model(dim, &mut rng).unwrap().cov())).count();
    assert!(ok >= 990, "{ok}");
}

#[test]
fn sampled_mean_is_within_three_standard_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let model = random_general_model(40, &mut rng).unwrap();
    let sampler = MvnSampler::new(&model).unwrap();
    let n = 20_000;
    let mut sum = DVector::zeros(40);
    for _ in 0..n {
        sum += sampler.sample(&mut rng);
    }
    let mean = sum / n as f64;
    let inside = (0..40)
        .filter(|&k| {
            let se = (model.cov()[(k, k)] / n as f64).sqrt();
            (mean[k] - model.mu()[k]).abs() <= 3.0 * se
        })
        .count();
    assert!(inside as f64 >= 0.95 * 40.0, "{inside}/40");
}

#[test]
fn sampling_is_reproducible() {
    let model = random_general_model(10, &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
    let sampler = MvnSampler::new(&model).unwrap();
    let a = sampler.sample(&mut ChaCha8Rng::seed_from_u64(99));
    let b = sampler.sample(&mut ChaCha8Rng::seed_from_u64(99));
    assert_eq!(a, b);
}

#[test]
fn simulation_gap_shrinks_with_sample_size() {
    let sizes = [10, 100, 1000, 10_000];
    let mut majority = 0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let fr = rounded_template(&mut rng, 200);
        let model = random_general_model(fr.unique_len(), &mut rng).unwrap();
        let cross = cross_from_model(&model);
        let p = eqw_binning(&fr, 5).unwrap();
        let sigma = 1.0;
        let predicted = predict_distorted(&p, &cross, fr.n_tau(), NoiseModel::new(1.0).unwrap()).unwrap().value;
        let gaps: Vec<f64> = sizes
            .iter()
            .map(|&n| (mean_distorted(&mut rng, &fr, &p, &model, sigma, n) - predicted).abs())
            .collect();
        let decreasing = gaps.windows(2).filter(|w| w[1] < w[0]).count();
        majority += usize::from(decreasing >= 2);
    }
    assert!(majority > 10, "{majority}/20 seeds converged");
}
