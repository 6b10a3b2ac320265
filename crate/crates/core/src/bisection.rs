//! Bisection search for the utility-optimal weighted classifier of a
//! fractional-linear metric `<A, C> / <B, C>`.
//!
//! Each iteration takes the midpoint `gamma` of the current bracket, builds
//! the loss `gamma * B - A` (normalized onto `[0, 1]`), predicts with it, and
//! evaluates the resulting confusion. Achieving at least `gamma` raises the
//! lower end of the bracket and accepts the candidate; otherwise the upper
//! end drops to `gamma`. The bracket starts at `[0, 1]`, so metrics must take
//! values in that range.
//!
//! Under micro averaging every output shares one loss matrix. Under macro
//! averaging each output runs its own bisection on its own confusion slice.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::averaging::{
    instance_utility, macro_utility, micro_confusion, micro_utility, AveragingMode, AveragingSpec,
};
use crate::confusion::{
    expected_confusion, per_sample_confusions, per_sample_expected_confusions, sample_confusion,
    ClassMatrix, ConfusionTensor, LabelMatrix, PredictionMatrix, ProbabilityField,
};
use crate::decision::{LossTensor, LossTensorDocument, WeightedClassifier};
use crate::error::{Error, Result};
use crate::metrics::{loss_from_gamma, FractionalLinearMetric, LossMatrix, MetricSpec};

/// Default iteration count; the bracket width reaches `2^-50` by then.
pub const DEFAULT_ITERATIONS: usize = 50;

/// Largest `K^(N*M)` the brute-force oracle will enumerate.
pub const ORACLE_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct BisectionConfig {
    pub iterations: usize,
    /// Output weights for micro averaging; uniform when `None`.
    pub output_weights: Option<Vec<f64>>,
}

impl Default for BisectionConfig {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            output_weights: None,
        }
    }
}

impl BisectionConfig {
    pub fn new(iterations: usize) -> Self {
        Self {
            iterations,
            ..Self::default()
        }
    }

    /// `kappa * n_samples` iterations. Past ~53 iterations the bracket can no
    /// longer shrink in double precision.
    pub fn kappa_schedule(kappa: usize, n_samples: usize) -> Self {
        Self::new(kappa * n_samples)
    }

    fn check(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParameter(
                "bisection needs at least one iteration".into(),
            ));
        }
        Ok(())
    }
}

/// What the candidate classifiers are scored against.
#[derive(Debug, Clone, Copy)]
pub enum Evaluation<'a> {
    /// Sample confusion against observed labels.
    Labels(&'a LabelMatrix),
    /// Expected confusion under known class probabilities.
    Expected(&'a ProbabilityField),
}

impl<'a> Evaluation<'a> {
    pub fn confusion(&self, preds: &PredictionMatrix) -> Result<ConfusionTensor> {
        match self {
            Evaluation::Labels(labels) => sample_confusion(labels, preds),
            Evaluation::Expected(probs) => expected_confusion(probs, preds),
        }
    }

    fn output(&self, m: usize) -> EvaluationOwned {
        match self {
            Evaluation::Labels(labels) => EvaluationOwned::Labels(labels.output(m)),
            Evaluation::Expected(probs) => EvaluationOwned::Expected(probs.output(m)),
        }
    }

    fn n_samples(&self) -> usize {
        match self {
            Evaluation::Labels(l) => l.n_samples(),
            Evaluation::Expected(p) => p.n_samples(),
        }
    }

    fn n_outputs(&self) -> usize {
        match self {
            Evaluation::Labels(l) => l.n_outputs(),
            Evaluation::Expected(p) => p.n_outputs(),
        }
    }

    fn n_classes(&self) -> usize {
        match self {
            Evaluation::Labels(l) => l.n_classes(),
            Evaluation::Expected(p) => p.n_classes(),
        }
    }
}

enum EvaluationOwned {
    Labels(LabelMatrix),
    Expected(ProbabilityField),
}

impl EvaluationOwned {
    fn borrow(&self) -> Evaluation<'_> {
        match self {
            EvaluationOwned::Labels(l) => Evaluation::Labels(l),
            EvaluationOwned::Expected(p) => Evaluation::Expected(p),
        }
    }
}

/// One bisection step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub gamma: f64,
    /// Bracket after the update.
    pub lower: f64,
    pub upper: f64,
    /// Utility of this iteration's candidate.
    pub utility: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionTrace {
    pub iterations: Vec<IterationRecord>,
    /// Utility of the returned classifier on the evaluation data.
    pub final_utility: f64,
    pub final_loss: LossTensorDocument,
}

impl BisectionTrace {
    pub fn gamma_path(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.gamma).collect()
    }

    pub fn final_bracket(&self) -> (f64, f64) {
        self.iterations
            .last()
            .map_or((0.0, 1.0), |r| (r.lower, r.upper))
    }
}

/// Bisection shared by the micro and macro drivers. `score` maps a
/// prediction matrix to its utility on the evaluation data.
fn run_bisection(
    probs: &ProbabilityField,
    flm: &FractionalLinearMetric,
    iterations: usize,
    score: impl Fn(&PredictionMatrix) -> Result<f64>,
) -> Result<(LossMatrix, PredictionMatrix, BisectionTrace)> {
    if flm.n_classes() != probs.n_classes() {
        return Err(Error::DimensionMismatch(format!(
            "metric has {} classes but probabilities have {}",
            flm.n_classes(),
            probs.n_classes()
        )));
    }
    let n_outputs = probs.n_outputs();
    let (mut lower, mut upper) = (0.0f64, 1.0f64);
    let mut accepted: Option<(LossMatrix, PredictionMatrix, f64)> = None;
    let mut records = Vec::with_capacity(iterations.min(4096));

    for t in 1..=iterations {
        let gamma = (lower + upper) / 2.0;
        let loss = loss_from_gamma(flm, gamma);
        let candidate = WeightedClassifier::new(LossTensor::shared(loss.clone(), n_outputs));
        let preds = candidate.predict(probs)?;
        let utility = score(&preds)?;
        let ok = utility >= gamma;
        if ok {
            lower = gamma;
            accepted = Some((loss, preds, utility));
        } else {
            upper = gamma;
        }
        records.push(IterationRecord {
            iteration: t,
            gamma,
            lower,
            upper,
            utility,
            accepted: ok,
        });
    }

    // Nothing accepted: fall back to the initial classifier, the argmax rule.
    let (loss, preds, final_utility) = match accepted {
        Some(found) => found,
        None => {
            let loss = LossMatrix::zero_one(probs.n_classes());
            let preds = WeightedClassifier::new(LossTensor::shared(loss.clone(), n_outputs))
                .predict(probs)?;
            let utility = score(&preds)?;
            (loss, preds, utility)
        }
    };
    let trace = BisectionTrace {
        iterations: records,
        final_utility,
        final_loss: LossTensor::shared(loss.clone(), n_outputs).to_document(),
    };
    Ok((loss, preds, trace))
}

fn check_inputs(eval: &Evaluation<'_>, probs: &ProbabilityField) -> Result<()> {
    if eval.n_samples() != probs.n_samples()
        || eval.n_outputs() != probs.n_outputs()
        || eval.n_classes() != probs.n_classes()
    {
        return Err(Error::DimensionMismatch(format!(
            "evaluation data is {}x{} with {} classes but probabilities are {}x{}x{}",
            eval.n_samples(),
            eval.n_outputs(),
            eval.n_classes(),
            probs.n_samples(),
            probs.n_outputs(),
            probs.n_classes()
        )));
    }
    Ok(())
}

/// Micro-averaged bisection scored on sample confusions against `labels`.
pub fn bisect_micro(
    labels: &LabelMatrix,
    probs_hat: &ProbabilityField,
    flm: &FractionalLinearMetric,
    cfg: &BisectionConfig,
) -> Result<(WeightedClassifier, BisectionTrace)> {
    bisect_micro_on(Evaluation::Labels(labels), probs_hat, flm, cfg)
}

/// Micro-averaged bisection against an arbitrary evaluation target.
pub fn bisect_micro_on(
    eval: Evaluation<'_>,
    probs_hat: &ProbabilityField,
    flm: &FractionalLinearMetric,
    cfg: &BisectionConfig,
) -> Result<(WeightedClassifier, BisectionTrace)> {
    cfg.check()?;
    check_inputs(&eval, probs_hat)?;
    let weights = AveragingSpec::micro()
        .with_weights(
            cfg.output_weights
                .clone()
                .unwrap_or_else(|| vec![1.0 / probs_hat.n_outputs() as f64; probs_hat.n_outputs()]),
        )
        .weights(probs_hat.n_outputs())?;
    let (loss, _, trace) = run_bisection(probs_hat, flm, cfg.iterations, |preds| {
        let conf = eval.confusion(preds)?;
        flm.evaluate(micro_confusion(&conf, &weights)?.view())
    })?;
    let clf = WeightedClassifier::new(LossTensor::shared(loss, probs_hat.n_outputs()));
    Ok((clf, trace))
}

/// Macro-averaged bisection: one independent run per output.
pub fn bisect_macro(
    labels: &LabelMatrix,
    probs_hat: &ProbabilityField,
    flm: &FractionalLinearMetric,
    cfg: &BisectionConfig,
) -> Result<(WeightedClassifier, Vec<BisectionTrace>)> {
    bisect_macro_on(Evaluation::Labels(labels), probs_hat, flm, cfg)
}

pub fn bisect_macro_on(
    eval: Evaluation<'_>,
    probs_hat: &ProbabilityField,
    flm: &FractionalLinearMetric,
    cfg: &BisectionConfig,
) -> Result<(WeightedClassifier, Vec<BisectionTrace>)> {
    cfg.check()?;
    check_inputs(&eval, probs_hat)?;
    let mut slices = Vec::with_capacity(probs_hat.n_outputs());
    let mut traces = Vec::with_capacity(probs_hat.n_outputs());
    for m in 0..probs_hat.n_outputs() {
        let target = eval.output(m);
        let target = target.borrow();
        let probs_m = probs_hat.output(m);
        let (loss, _, trace) = run_bisection(&probs_m, flm, cfg.iterations, |preds| {
            let conf = target.confusion(preds)?;
            flm.evaluate(conf.slice(0))
        })?;
        slices.push(loss);
        traces.push(trace);
    }
    Ok((WeightedClassifier::new(LossTensor::new(slices)?), traces))
}

/// Best weighted classifier over an evenly spaced grid of thresholds in
/// `[0, 1]`, scored by micro utility. Thresholds whose classifier hits a
/// degenerate denominator are skipped. Returns `(utility, gamma)`.
pub fn gamma_grid_oracle(
    eval: Evaluation<'_>,
    probs: &ProbabilityField,
    flm: &FractionalLinearMetric,
    grid_points: usize,
) -> Result<(f64, f64)> {
    check_inputs(&eval, probs)?;
    if grid_points < 2 {
        return Err(Error::InvalidParameter(
            "grid needs at least two points".into(),
        ));
    }
    let weights = vec![1.0 / probs.n_outputs() as f64; probs.n_outputs()];
    let mut best: Option<(f64, f64)> = None;
    for g in 0..grid_points {
        let gamma = g as f64 / (grid_points - 1) as f64;
        let loss = loss_from_gamma(flm, gamma);
        let preds =
            WeightedClassifier::new(LossTensor::shared(loss, probs.n_outputs())).predict(probs)?;
        let conf = eval.confusion(&preds)?;
        match flm.evaluate(micro_confusion(&conf, &weights)?.view()) {
            Ok(u) if best.is_none_or(|(b, _)| u > b) => best = Some((u, gamma)),
            Ok(_) | Err(Error::DegenerateDenominator { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    best.ok_or_else(|| Error::DegenerateDenominator {
        value: 0.0,
        floor: flm.floor(),
    })
}

/// Exhaustive search over every deterministic prediction matrix.
///
/// Utilities use the sample confusion against `labels`, or the expected
/// confusion when `probs` is given. Candidates with a degenerate denominator
/// are skipped. The first maximizer in enumeration order (output-major digits,
/// class 1 first) is returned.
pub fn brute_force_oracle(
    labels: &LabelMatrix,
    probs: Option<&ProbabilityField>,
    spec: &MetricSpec,
    avg: &AveragingSpec,
) -> Result<(f64, PredictionMatrix)> {
    let (n, m) = labels.values().dim();
    let k = labels.n_classes();
    if let Some(p) = probs {
        if p.values().dim() != (n, m, k) {
            return Err(Error::DimensionMismatch(format!(
                "labels are {n}x{m} with {k} classes but probabilities are {:?}",
                p.values().dim()
            )));
        }
    }
    let size = (k as f64).powi((n * m) as i32);
    if size > ORACLE_LIMIT as f64 {
        return Err(Error::InstanceTooLarge {
            size,
            limit: ORACLE_LIMIT,
        });
    }
    let weights = avg.weights(m)?;

    let mut digits = vec![0usize; n * m];
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let preds = ClassMatrix::new(
            Array2::from_shape_vec((n, m), digits.clone()).expect("shape"),
            k,
        )?;
        let utility = match avg.mode {
            AveragingMode::Micro | AveragingMode::Macro => {
                let conf = match probs {
                    Some(p) => expected_confusion(p, &preds)?,
                    None => sample_confusion(labels, &preds)?,
                };
                if avg.mode == AveragingMode::Micro {
                    spec.evaluate(micro_confusion(&conf, &weights)?.view())
                } else {
                    macro_utility(spec, &conf, avg)
                }
            }
            AveragingMode::Instance => {
                let per = match probs {
                    Some(p) => per_sample_expected_confusions(p, &preds)?,
                    None => per_sample_confusions(labels, &preds)?,
                };
                instance_utility(spec, &per, avg)
            }
        };
        match utility {
            Ok(u) if best.as_ref().is_none_or(|(b, _)| u > *b) => best = Some((u, digits.clone())),
            Ok(_) | Err(Error::DegenerateDenominator { .. }) => {}
            Err(e) => return Err(e),
        }
        // odometer increment, last digit fastest
        let mut pos = digits.len();
        loop {
            if pos == 0 {
                let (u, best_digits) = best.ok_or(Error::DegenerateDenominator {
                    value: 0.0,
                    floor: spec.denominator_floor(),
                })?;
                let preds = ClassMatrix::new(
                    Array2::from_shape_vec((n, m), best_digits).expect("shape"),
                    k,
                )?;
                return Ok((u, preds));
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < k {
                break;
            }
            digits[pos] = 0;
        }
    }
}

/// Utility of a prediction matrix on the evaluation data for any averaging mode.
pub fn evaluate_predictions(
    eval: Evaluation<'_>,
    preds: &PredictionMatrix,
    spec: &MetricSpec,
    avg: &AveragingSpec,
) -> Result<f64> {
    match avg.mode {
        AveragingMode::Micro => micro_utility(spec, &eval.confusion(preds)?, avg),
        AveragingMode::Macro => macro_utility(spec, &eval.confusion(preds)?, avg),
        AveragingMode::Instance => {
            let per = match eval {
                Evaluation::Labels(l) => per_sample_confusions(l, preds)?,
                Evaluation::Expected(p) => per_sample_expected_confusions(p, preds)?,
            };
            instance_utility(spec, &per, avg)
        }
    }
}
