//! Batch commands behind the `metricopt` binary.
//!
//! Each command is an ordinary function returning a [`RunReport`] (or CSV
//! text for the synthetic grid) so it can be driven from tests and examples
//! as well as from the command line.

pub mod io;
mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array2, Axis};

pub use report::{RunReport, Utilities};

use crate::averaging::{AveragingMode, AveragingSpec};
use crate::bisection::{
    bisect_macro, bisect_micro, brute_force_oracle, evaluate_predictions, BisectionConfig,
    Evaluation, DEFAULT_ITERATIONS,
};
use crate::config::{config_hash, MetricConfig};
use crate::confusion::{sample_confusion, LabelMatrix, PredictionMatrix, ProbabilityField};
use crate::decision::{LossTensor, WeightedClassifier};
use crate::error::{Error, Result};
use crate::estimators::{
    fit_lr, performance_grid, split_indices, LrConfig, PerformanceRatio, SyntheticConfig,
};
use crate::metrics::{loss_from_gradient, MetricSpec};

use report::confusion_rows;

/// Environment variable supplying the default seed.
pub const SEED_ENV: &str = "METRICOPT_SEED";

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

/// Evaluates `preds` against `labels` under every averaging mode, skipping
/// modes whose evaluation fails; the selected mode must succeed.
fn all_utilities(
    labels: &LabelMatrix,
    preds: &PredictionMatrix,
    spec: &MetricSpec,
    avg: &AveragingSpec,
) -> Result<(f64, Utilities)> {
    let mut utilities = Utilities::default();
    let mut selected = None;
    for mode in [
        AveragingMode::Micro,
        AveragingMode::Macro,
        AveragingMode::Instance,
    ] {
        let spec_avg = AveragingSpec {
            mode,
            output_weights: avg.output_weights.clone(),
        };
        let result = evaluate_predictions(Evaluation::Labels(labels), preds, spec, &spec_avg);
        if mode == avg.mode {
            let value = result?;
            utilities.set(mode, value);
            selected = Some(value);
        } else if let Ok(value) = result {
            utilities.set(mode, value);
        }
    }
    Ok((selected.expect("selected mode evaluated"), utilities))
}

fn class_count(metric: &MetricConfig, observed: usize) -> usize {
    observed.max(metric.n_classes_hint().unwrap_or(0)).max(2)
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub labels: PathBuf,
    pub preds: PathBuf,
    pub metric: MetricConfig,
    pub averaging: Option<AveragingMode>,
    pub seed: u64,
}

/// Scores a predictions file against a labels file.
pub fn cmd_eval(args: &EvalArgs) -> Result<RunReport> {
    let start = Instant::now();
    let label_rows = io::read_class_rows(&args.labels)?;
    let pred_rows = io::read_class_rows(&args.preds)?;
    let observed = label_rows
        .iter()
        .chain(&pred_rows)
        .flatten()
        .copied()
        .max()
        .unwrap_or(1);
    let k = class_count(&args.metric, observed);
    let labels = LabelMatrix::from_one_based(&label_rows, k)?;
    let preds = PredictionMatrix::from_one_based(&pred_rows, k)?;
    let spec = args.metric.to_spec(k)?;
    let avg = args.metric.averaging(args.averaging);
    let conf = sample_confusion(&labels, &preds)?;
    let (utility, utilities) = all_utilities(&labels, &preds, &spec, &avg)?;

    let command = vec![
        "eval".into(),
        "--labels".into(),
        path_str(&args.labels),
        "--preds".into(),
        path_str(&args.preds),
        "--metric".into(),
        args.metric.to_json(),
        "--averaging".into(),
        avg.mode.to_string(),
    ];
    Ok(RunReport {
        config_hash: config_hash(&command.iter().map(String::as_str).collect::<Vec<_>>()),
        command,
        seed: args.seed,
        metric: args.metric.clone(),
        averaging: avg.mode,
        utility,
        utilities,
        evaluation_utility: None,
        baseline_utility: None,
        confusion: confusion_rows(&conf),
        loss: None,
        bisection: None,
        predictions: None,
        wall_clock_ms: elapsed_ms(start),
    })
}

/// Where the probability estimates for post-processing come from.
#[derive(Debug, Clone)]
pub enum ProbabilitySource {
    /// Precomputed estimates; every row is used for evaluation.
    File(PathBuf),
    /// Fit logistic regression on a seeded half of the rows and evaluate on
    /// the other half.
    Features(PathBuf),
}

#[derive(Debug, Clone)]
pub struct PostprocessArgs {
    pub labels: PathBuf,
    pub source: ProbabilitySource,
    pub metric: MetricConfig,
    pub averaging: Option<AveragingMode>,
    pub iterations: usize,
    /// Run `kappa * N_eval` iterations instead of `iterations`.
    pub kappa: Option<usize>,
    pub seed: u64,
    /// Predictions output path.
    pub out: Option<PathBuf>,
}

impl PostprocessArgs {
    pub fn new(labels: PathBuf, source: ProbabilitySource, metric: MetricConfig) -> Self {
        Self {
            labels,
            source,
            metric,
            averaging: None,
            iterations: DEFAULT_ITERATIONS,
            kappa: None,
            seed: 0,
            out: None,
        }
    }
}

/// Turns probability estimates into metric-optimal predictions.
///
/// Linear metrics use the closed-form loss `1 - grad psi`. Other
/// fractional-linear metrics run the bisection on the evaluation rows,
/// sharing one loss across outputs under micro averaging and fitting one per
/// output under macro averaging. Predictions cover every row.
pub fn cmd_postprocess(args: &PostprocessArgs) -> Result<RunReport> {
    let start = Instant::now();
    let label_rows = io::read_class_rows(&args.labels)?;
    let observed = label_rows.iter().flatten().copied().max().unwrap_or(1);
    let avg = args.metric.averaging(args.averaging);
    if avg.mode == AveragingMode::Instance {
        return Err(Error::BisectionUnsupported(
            "instance averaging (use micro or macro)".into(),
        ));
    }

    let (probs, eval_rows, source_flag) = match &args.source {
        ProbabilitySource::File(path) => {
            let probs = io::read_probabilities(path)?;
            if observed > probs.n_classes() {
                return Err(Error::ClassOutOfRange {
                    index: observed,
                    n_classes: probs.n_classes(),
                });
            }
            let k = class_count(&args.metric, probs.n_classes());
            let probs = probs.pad_classes(k)?;
            let all: Vec<usize> = (0..probs.n_samples()).collect();
            (probs, all, ("--probs", path_str(path)))
        }
        ProbabilitySource::Features(path) => {
            let features = io::read_features(path)?;
            let k = class_count(&args.metric, observed);
            let labels = LabelMatrix::from_one_based(&label_rows, k)?;
            if features.nrows() != labels.n_samples() {
                return Err(Error::DimensionMismatch(format!(
                    "{} feature rows but {} label rows",
                    features.nrows(),
                    labels.n_samples()
                )));
            }
            let (fit_rows, eval_rows) = split_indices(labels.n_samples(), 0.5, args.seed);
            let model = fit_lr(
                &features.select(Axis(0), &fit_rows),
                &labels.select_rows(&fit_rows),
                &LrConfig::default(),
            )?;
            (
                model.predict_proba(&features)?,
                eval_rows,
                ("--features", path_str(path)),
            )
        }
    };
    let k = probs.n_classes();
    let labels = LabelMatrix::from_one_based(&label_rows, k)?;
    if labels.n_samples() != probs.n_samples() || labels.n_outputs() != probs.n_outputs() {
        return Err(Error::DimensionMismatch(format!(
            "labels are {}x{} but probabilities are {}x{}",
            labels.n_samples(),
            labels.n_outputs(),
            probs.n_samples(),
            probs.n_outputs()
        )));
    }
    let spec = args.metric.to_spec(k)?;
    let eval_labels = labels.select_rows(&eval_rows);
    let eval_probs = probs.select_rows(&eval_rows);
    let m = labels.n_outputs();

    let (classifier, traces) = if spec.is_linear() {
        let any = Array2::from_elem((k, k), 1.0 / (k * k) as f64);
        let loss = loss_from_gradient(&spec, any.view())?;
        (WeightedClassifier::new(LossTensor::shared(loss, m)), None)
    } else {
        let flm = spec.to_fractional_linear().map_err(|e| match e {
            Error::NotFractionalLinear(name) => Error::BisectionUnsupported(name),
            other => other,
        })?;
        let iterations = args
            .kappa
            .map_or(args.iterations, |kappa| kappa * eval_labels.n_samples());
        let cfg = BisectionConfig {
            iterations,
            output_weights: avg.output_weights.clone(),
        };
        match avg.mode {
            AveragingMode::Micro => {
                let (clf, trace) = bisect_micro(&eval_labels, &eval_probs, &flm, &cfg)?;
                (clf, Some(vec![trace]))
            }
            _ => {
                let (clf, traces) = bisect_macro(&eval_labels, &eval_probs, &flm, &cfg)?;
                (clf, Some(traces))
            }
        }
    };

    let preds = classifier.predict(&probs)?;
    let (utility, utilities) = all_utilities(&labels, &preds, &spec, &avg)?;
    let eval_preds = preds.select_rows(&eval_rows);
    let evaluation_utility =
        evaluate_predictions(Evaluation::Labels(&eval_labels), &eval_preds, &spec, &avg)?;
    let baseline = WeightedClassifier::argmax(k, m).predict(&eval_probs)?;
    let baseline_utility =
        evaluate_predictions(Evaluation::Labels(&eval_labels), &baseline, &spec, &avg).ok();
    if let Some(out) = &args.out {
        io::write_class_matrix(out, &preds)?;
    }

    let mut command = vec![
        "postprocess".into(),
        "--labels".into(),
        path_str(&args.labels),
        source_flag.0.into(),
        source_flag.1,
        "--metric".into(),
        args.metric.to_json(),
        "--averaging".into(),
        avg.mode.to_string(),
        "--iters".into(),
        args.iterations.to_string(),
        "--seed".into(),
        args.seed.to_string(),
    ];
    if let Some(kappa) = args.kappa {
        command.extend(["--kappa".into(), kappa.to_string()]);
    }
    let hash = config_hash(&command.iter().map(String::as_str).collect::<Vec<_>>());
    if let Some(out) = &args.out {
        command.extend(["--out".into(), path_str(out)]);
    }
    Ok(RunReport {
        command,
        config_hash: hash,
        seed: args.seed,
        metric: args.metric.clone(),
        averaging: avg.mode,
        utility,
        utilities,
        evaluation_utility: Some(evaluation_utility),
        baseline_utility,
        confusion: confusion_rows(&sample_confusion(&labels, &preds)?),
        loss: Some(classifier.loss().to_document()),
        bisection: traces,
        predictions: None,
        wall_clock_ms: elapsed_ms(start),
    })
}

#[derive(Debug, Clone)]
pub struct OracleArgs {
    pub labels: PathBuf,
    /// Score against expected confusions under these probabilities instead
    /// of the labels.
    pub probs: Option<PathBuf>,
    pub metric: MetricConfig,
    pub averaging: Option<AveragingMode>,
    pub seed: u64,
}

/// Exhaustive search for the best deterministic predictions.
pub fn cmd_oracle(args: &OracleArgs) -> Result<RunReport> {
    let start = Instant::now();
    let label_rows = io::read_class_rows(&args.labels)?;
    let observed = label_rows.iter().flatten().copied().max().unwrap_or(1);
    let probs = args
        .probs
        .as_deref()
        .map(io::read_probabilities)
        .transpose()?;
    let k = class_count(
        &args.metric,
        observed.max(probs.as_ref().map_or(0, ProbabilityField::n_classes)),
    );
    let probs = probs.map(|p| p.pad_classes(k)).transpose()?;
    let labels = LabelMatrix::from_one_based(&label_rows, k)?;
    let spec = args.metric.to_spec(k)?;
    let avg = args.metric.averaging(args.averaging);
    let (utility, preds) = brute_force_oracle(&labels, probs.as_ref(), &spec, &avg)?;
    let conf = match &probs {
        Some(p) => crate::confusion::expected_confusion(p, &preds)?,
        None => sample_confusion(&labels, &preds)?,
    };
    let mut utilities = Utilities::default();
    utilities.set(avg.mode, utility);

    let mut command = vec!["oracle".into(), "--labels".into(), path_str(&args.labels)];
    if let Some(p) = &args.probs {
        command.extend(["--probs".into(), path_str(p)]);
    }
    command.extend([
        "--metric".into(),
        args.metric.to_json(),
        "--averaging".into(),
        avg.mode.to_string(),
    ]);
    Ok(RunReport {
        config_hash: config_hash(&command.iter().map(String::as_str).collect::<Vec<_>>()),
        command,
        seed: args.seed,
        metric: args.metric.clone(),
        averaging: avg.mode,
        utility,
        utilities,
        evaluation_utility: None,
        baseline_utility: None,
        confusion: confusion_rows(&conf),
        loss: None,
        bisection: None,
        predictions: Some(preds.to_one_based()),
        wall_clock_ms: elapsed_ms(start),
    })
}

#[derive(Debug, Clone)]
pub struct SynthArgs {
    pub c1s: Vec<f64>,
    pub c2s: Vec<f64>,
    pub n_samples: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub seeds: Vec<u64>,
    pub workers: usize,
    pub out: Option<PathBuf>,
}

impl Default for SynthArgs {
    fn default() -> Self {
        Self {
            c1s: vec![0.05, 0.2, 0.5],
            c2s: vec![0.0, 0.5, 1.0, 1.5],
            n_samples: 20_000,
            n_features: 10,
            n_classes: 10,
            seeds: (0..5).collect(),
            workers: 1,
            out: None,
        }
    }
}

pub const SYNTH_HEADER: &str = "c1,c2,seed,utility_baseline,utility_consistent,pr";

pub fn format_synth_rows(rows: &[PerformanceRatio]) -> String {
    let mut out = String::from(SYNTH_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.c1, r.c2, r.seed, r.utility_baseline, r.utility_consistent, r.pr
        ));
    }
    out
}

/// Performance-ratio grid over `(c1, c2, seed)`; returns the CSV text and
/// writes it to `out` when given. Rows come out in grid order whatever the
/// worker count.
pub fn cmd_synth(args: &SynthArgs) -> Result<String> {
    if args.c1s.is_empty() || args.c2s.is_empty() || args.seeds.is_empty() {
        return Err(Error::InvalidParameter("synthetic grid is empty".into()));
    }
    let base = SyntheticConfig {
        n_samples: args.n_samples,
        n_features: args.n_features,
        n_classes: args.n_classes,
        ..SyntheticConfig::default()
    };
    let rows = performance_grid(
        &base,
        &args.c1s,
        &args.c2s,
        &args.seeds,
        &LrConfig::default(),
        args.workers,
    )?;
    let csv = format_synth_rows(&rows);
    if let Some(out) = &args.out {
        io::write_text(out, &csv)?;
    }
    Ok(csv)
}

#[derive(Debug, Clone)]
pub struct TrainLrArgs {
    pub features: PathBuf,
    pub labels: PathBuf,
    pub lr: LrConfig,
    /// Probabilities for these features instead of the training features.
    pub predict_features: Option<PathBuf>,
    pub out: PathBuf,
}

/// Fits logistic regression and writes a probabilities file.
pub fn cmd_train_lr(args: &TrainLrArgs) -> Result<ProbabilityField> {
    let features = io::read_features(&args.features)?;
    let label_rows = io::read_class_rows(&args.labels)?;
    let observed = label_rows.iter().flatten().copied().max().unwrap_or(1);
    let labels = LabelMatrix::from_one_based(&label_rows, observed.max(2))?;
    let model = fit_lr(&features, &labels, &args.lr)?;
    let target = match &args.predict_features {
        Some(p) => io::read_features(p)?,
        None => features,
    };
    let probs = model.predict_proba(&target)?;
    io::write_probabilities(&args.out, &probs)?;
    Ok(probs)
}
