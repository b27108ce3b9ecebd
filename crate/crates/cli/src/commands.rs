use nalgebra::DVector;
use nuv_core::{
    assign_bins, frobenius_objective, full_rank_decompose, nuv as measure, predict_corollary, predict_distorted,
    predict_localized, predict_noise, predict_spherical, BinPartition, CrossProductMatrix, FullRankDecomposition,
    GreedyConfig, GreedyOutcome, NoiseModel, Prediction, Strategy, Template,
};
use serde::Serialize;

use crate::input::{read_matrix, read_vector};
use crate::{BinArgs, BinningArgs, CliError, NuvArgs, PredictCommand};

/// `x` to 12 significant digits, trailing zeros dropped.
pub fn sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-5..12).contains(&magnitude) {
        return format!("{x:.11e}");
    }
    let decimals = (11 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let s = serde_json::to_string_pretty(value).map_err(|e| CliError::io(e.to_string()))?;
    println!("{s}");
    Ok(())
}

struct Binned {
    strategy: Strategy,
    fr: FullRankDecomposition,
    partition: BinPartition,
    requested_b: usize,
    cross: Option<CrossProductMatrix>,
    greedy: Option<GreedyOutcome>,
}

fn load_template(path: &std::path::Path, round_digits: Option<u32>) -> Result<FullRankDecomposition, CliError> {
    let t = Template::new(read_vector(path)?)?;
    Ok(full_rank_decompose(&t, round_digits))
}

/// Bins `fr`. `default_cross` supplies the matrix greedy optimizes when no
/// `--cross` file is given.
fn bin_template(
    fr: FullRankDecomposition,
    args: &BinningArgs,
    default_cross: Option<CrossProductMatrix>,
) -> Result<Binned, CliError> {
    let cross = match &args.cross {
        Some(path) => Some(CrossProductMatrix::new(read_matrix(path)?)?),
        None => None,
    };
    if cross.is_some() && args.strategy != Strategy::Greedy {
        return Err(CliError::parse("--cross is only used by the greedy strategy"));
    }
    let cross = cross.or(default_cross);
    if args.strategy == Strategy::Greedy && cross.is_none() {
        return Err(CliError::parse("the greedy strategy needs --cross"));
    }
    if let Some(c) = &cross {
        if c.dim() != fr.unique_len() {
            return Err(CliError::parse(format!(
                "cross-product matrix is {0}x{0} but the template has {1} unique values",
                c.dim(),
                fr.unique_len()
            )));
        }
    }
    let requested_b = args.bins.resolve(fr.unique_len());
    let cfg = GreedyConfig { restarts: args.restarts, seed: args.seed, max_iterations: args.max_iterations };
    let (partition, greedy) = args.strategy.partition(&fr, requested_b, cross.as_ref(), &cfg)?;
    Ok(Binned { strategy: args.strategy, fr, partition, requested_b, cross, greedy })
}

#[derive(Serialize)]
struct GreedyReport {
    objective: f64,
    best_restart: usize,
    restart_moves: Vec<usize>,
    trace_length: usize,
}

#[derive(Serialize)]
struct BinReport {
    strategy: Strategy,
    requested_b: usize,
    effective_b: usize,
    d: usize,
    d_tau: usize,
    cuts: Vec<usize>,
    cut_values: Vec<f64>,
    bin_counts: Vec<usize>,
    representation_error: f64,
    frobenius_objective: Option<f64>,
    greedy: Option<GreedyReport>,
}

fn bin_report(binned: &Binned) -> Result<BinReport, CliError> {
    let Binned { strategy, fr, partition, requested_b, cross, greedy } = binned;
    let assignment = assign_bins(fr, partition)?;
    let objective = match cross {
        Some(c) => Some(frobenius_objective(partition, c, fr.n_tau())?),
        None => None,
    };
    Ok(BinReport {
        strategy: *strategy,
        requested_b: *requested_b,
        effective_b: partition.bins(),
        d: fr.len(),
        d_tau: fr.unique_len(),
        cuts: partition.cuts().to_vec(),
        cut_values: partition.cut_values(fr.tau()),
        bin_counts: assignment.bin_counts().to_vec(),
        representation_error: nuv_core::representation_error(fr, partition),
        frobenius_objective: objective,
        greedy: greedy.as_ref().map(|g| GreedyReport {
            objective: g.objective,
            best_restart: g.best_restart,
            restart_moves: g.restart_moves.clone(),
            trace_length: g.trace.len(),
        }),
    })
}

fn print_bin_report(r: &BinReport) {
    println!("strategy: {}", r.strategy);
    println!("bins: {} (requested {})", r.effective_b, r.requested_b);
    println!("coordinates: {}, unique values: {}", r.d, r.d_tau);
    let cuts: Vec<String> = r.cut_values.iter().map(|&v| sig12(v)).collect();
    println!("cut values: [{}]", cuts.join(", "));
    let counts: Vec<String> = r.bin_counts.iter().map(|c| c.to_string()).collect();
    println!("bin counts: [{}]", counts.join(", "));
    println!("representation error: {}", sig12(r.representation_error));
    if let Some(obj) = r.frobenius_objective {
        println!("frobenius objective: {}", sig12(obj));
    }
    if let Some(g) = &r.greedy {
        let moves: Vec<String> = g.restart_moves.iter().map(|m| m.to_string()).collect();
        println!("greedy: best restart {}, moves per restart [{}], trace length {}", g.best_restart, moves.join(", "), g.trace_length);
    }
}

pub fn bin(args: BinArgs) -> Result<(), CliError> {
    let fr = load_template(&args.template, args.binning.round_digits)?;
    let binned = bin_template(fr, &args.binning, None)?;
    let report = bin_report(&binned)?;
    if args.json {
        print_json(&report)
    } else {
        print_bin_report(&report);
        Ok(())
    }
}

#[derive(Serialize)]
struct NuvReport {
    nuv: f64,
    explained: f64,
    effective_b: usize,
}

pub fn nuv(args: NuvArgs) -> Result<(), CliError> {
    let fr = load_template(&args.template, args.binning.round_digits)?;
    let w = read_vector(&args.window)?;
    if w.len() != fr.len() {
        return Err(CliError::parse(format!(
            "template has {} values but the window has {}",
            fr.len(),
            w.len()
        )));
    }
    let binned = bin_template(fr, &args.binning, None)?;
    let d = measure(&assign_bins(&binned.fr, &binned.partition)?, &w)?;
    let report = NuvReport { nuv: d, explained: 1.0 - d, effective_b: binned.partition.bins() };
    if args.json {
        print_json(&report)
    } else {
        println!("nuv: {}", sig12(report.nuv));
        println!("explained (1 - nuv): {}", sig12(report.explained));
        Ok(())
    }
}

#[derive(Serialize)]
struct PredictReport<'a> {
    model: &'a str,
    d: usize,
    b: usize,
    #[serde(flatten)]
    prediction: Prediction,
}

fn print_prediction(model: &str, d: usize, b: usize, p: Prediction, json: bool) -> Result<(), CliError> {
    if json {
        return print_json(&PredictReport { model, d, b, prediction: p });
    }
    println!("{model} prediction (d = {d}, b = {b}): {}", sig12(p.value));
    println!("  numerator:   {}", sig12(p.numerator));
    println!("  denominator: {}", sig12(p.denominator));
    for c in &p.components {
        println!("  {:<18} numerator {:>20}  denominator {:>20}", c.name, sig12(c.numerator), sig12(c.denominator));
    }
    Ok(())
}

pub fn predict(cmd: PredictCommand) -> Result<(), CliError> {
    match cmd {
        PredictCommand::Noise { d, b, json } => print_prediction("noise", d, b, predict_noise(d, b)?, json),
        PredictCommand::Corollary { d, b, sigma2_m, sigma2, json } => {
            let p = predict_corollary(d, b, sigma2_m, NoiseModel::new(sigma2)?)?;
            print_prediction("corollary", d, b, p, json)
        }
        PredictCommand::Distorted { template, binning, sigma2, json } => {
            let fr = load_template(&template, binning.round_digits)?;
            let Some(path) = &binning.cross else {
                return Err(CliError::parse("the distorted prediction needs --cross"));
            };
            let cross = CrossProductMatrix::new(read_matrix(path)?)?;
            let mut args = binning.clone();
            args.cross = None;
            let binned = bin_template(fr, &args, Some(cross.clone()))?;
            let (d, b) = (binned.fr.len(), binned.partition.bins());
            let p = predict_distorted(&binned.partition, &cross, binned.fr.n_tau(), NoiseModel::new(sigma2)?)?;
            print_prediction("distorted", d, b, p, json)
        }
        PredictCommand::Localized { template, binning, cov, sigma2, json } => {
            let fr = load_template(&template, binning.round_digits)?;
            let cov = CrossProductMatrix::new(read_matrix(&cov)?)?;
            if cov.dim() != fr.unique_len() {
                return Err(CliError::parse(format!(
                    "covariance is {0}x{0} but the template has {1} unique values",
                    cov.dim(),
                    fr.unique_len()
                )));
            }
            let tau = DVector::from_column_slice(fr.tau());
            let cross = CrossProductMatrix::new(cov.entries() + &tau * tau.transpose())?;
            let binned = bin_template(fr, &binning, Some(cross))?;
            let (d, b) = (binned.fr.len(), binned.partition.bins());
            let p = predict_localized(&binned.fr, &binned.partition, &cov, NoiseModel::new(sigma2)?)?;
            print_prediction("localized", d, b, p, json)
        }
        PredictCommand::Spherical { template, binning, sigma2_m, sigma2, json } => {
            let fr = load_template(&template, binning.round_digits)?;
            let tau = DVector::from_column_slice(fr.tau());
            let n = fr.unique_len();
            let cross = CrossProductMatrix::new(
                nalgebra::DMatrix::identity(n, n) * sigma2_m.max(0.0) + &tau * tau.transpose(),
            )?;
            let binned = bin_template(fr, &binning, Some(cross))?;
            let (d, b) = (binned.fr.len(), binned.partition.bins());
            let p = predict_spherical(&binned.fr, &binned.partition, sigma2_m, NoiseModel::new(sigma2)?)?;
            print_prediction("spherical", d, b, p, json)
        }
    }
}
