//! Micro-, macro-, and instance-averaging of per-output confusions.

use ndarray::{Array2, Array4, Axis};
use serde::{Deserialize, Serialize};

use crate::confusion::ConfusionTensor;
use crate::error::{Error, Result};
use crate::metrics::MetricSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AveragingMode {
    Micro,
    Macro,
    Instance,
}

impl std::str::FromStr for AveragingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "micro" => Ok(AveragingMode::Micro),
            "macro" => Ok(AveragingMode::Macro),
            "instance" => Ok(AveragingMode::Instance),
            other => Err(Error::Config(format!(
                "unknown averaging '{other}' (expected micro, macro or instance)"
            ))),
        }
    }
}

impl std::fmt::Display for AveragingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AveragingMode::Micro => "micro",
            AveragingMode::Macro => "macro",
            AveragingMode::Instance => "instance",
        })
    }
}

/// Averaging mode plus optional per-output weights (uniform `1/M` when absent).
#[derive(Debug, Clone, PartialEq)]
pub struct AveragingSpec {
    pub mode: AveragingMode,
    pub output_weights: Option<Vec<f64>>,
}

impl AveragingSpec {
    pub fn new(mode: AveragingMode) -> Self {
        Self {
            mode,
            output_weights: None,
        }
    }

    pub fn micro() -> Self {
        Self::new(AveragingMode::Micro)
    }

    pub fn macro_() -> Self {
        Self::new(AveragingMode::Macro)
    }

    pub fn instance() -> Self {
        Self::new(AveragingMode::Instance)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.output_weights = Some(weights);
        self
    }

    /// Resolved weight vector for `n_outputs` outputs.
    pub fn weights(&self, n_outputs: usize) -> Result<Vec<f64>> {
        match &self.output_weights {
            None => Ok(vec![1.0 / n_outputs as f64; n_outputs]),
            Some(w) => {
                check_weights(w, n_outputs)?;
                Ok(w.clone())
            }
        }
    }
}

fn check_weights(weights: &[f64], n_outputs: usize) -> Result<()> {
    if weights.len() != n_outputs {
        return Err(Error::DimensionMismatch(format!(
            "{} output weights for {n_outputs} outputs",
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "output weights must be nonnegative, got {w}"
        )));
    }
    Ok(())
}

/// `sum_m weights[m] * C[m]`.
pub fn micro_confusion(conf: &ConfusionTensor, weights: &[f64]) -> Result<Array2<f64>> {
    check_weights(weights, conf.n_outputs())?;
    let k = conf.n_classes();
    let mut out = Array2::zeros((k, k));
    for (m, &w) in weights.iter().enumerate() {
        out.scaled_add(w, &conf.slice(m));
    }
    Ok(out)
}

/// `psi(sum_m alpha_m C[m])`.
pub fn micro_utility(
    spec: &MetricSpec,
    conf: &ConfusionTensor,
    avg: &AveragingSpec,
) -> Result<f64> {
    let weights = avg.weights(conf.n_outputs())?;
    spec.evaluate(micro_confusion(conf, &weights)?.view())
}

/// `sum_m alpha_m psi(C[m])`, summed left to right.
pub fn macro_utility(
    spec: &MetricSpec,
    conf: &ConfusionTensor,
    avg: &AveragingSpec,
) -> Result<f64> {
    let weights = avg.weights(conf.n_outputs())?;
    let mut total = 0.0;
    for (m, &w) in weights.iter().enumerate() {
        total += w * spec.evaluate(conf.slice(m))?;
    }
    Ok(total)
}

/// `(1/N) sum_n psi(sum_m alpha_m C^(n)[m])` over per-instance confusions of
/// shape `N x M x K x K`.
pub fn instance_utility(
    spec: &MetricSpec,
    per_sample: &Array4<f64>,
    avg: &AveragingSpec,
) -> Result<f64> {
    let (n, m, k, k2) = per_sample.dim();
    if k != k2 {
        return Err(Error::InvalidConfusion(
            "per-instance slices must be square".into(),
        ));
    }
    if n == 0 {
        return Err(Error::DimensionMismatch("no instances".into()));
    }
    let weights = avg.weights(m)?;
    let mut total = 0.0;
    for instance in per_sample.outer_iter() {
        let mut averaged = Array2::zeros((k, k));
        for (j, &w) in weights.iter().enumerate() {
            averaged.scaled_add(w, &instance.index_axis(Axis(0), j));
        }
        total += spec.evaluate(averaged.view())?;
    }
    Ok(total / n as f64)
}

/// Utility of a population-style confusion under micro or macro averaging.
/// Instance averaging needs per-instance confusions; see [`instance_utility`].
pub fn utility(spec: &MetricSpec, conf: &ConfusionTensor, avg: &AveragingSpec) -> Result<f64> {
    match avg.mode {
        AveragingMode::Micro => micro_utility(spec, conf, avg),
        AveragingMode::Macro => macro_utility(spec, conf, avg),
        AveragingMode::Instance => Err(Error::Config(
            "instance averaging requires per-instance confusions".into(),
        )),
    }
}
