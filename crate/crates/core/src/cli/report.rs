use serde::{Deserialize, Serialize};

use crate::averaging::AveragingMode;
use crate::bisection::BisectionTrace;
use crate::config::MetricConfig;
use crate::confusion::ConfusionTensor;
use crate::decision::LossTensorDocument;
use crate::error::Result;

/// Utility under each averaging mode that could be evaluated.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Utilities {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub micro: Option<f64>,
    #[serde(rename = "macro", default, skip_serializing_if = "Option::is_none")]
    pub macro_: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<f64>,
}

impl Utilities {
    pub fn get(&self, mode: AveragingMode) -> Option<f64> {
        match mode {
            AveragingMode::Micro => self.micro,
            AveragingMode::Macro => self.macro_,
            AveragingMode::Instance => self.instance,
        }
    }

    pub fn set(&mut self, mode: AveragingMode, value: f64) {
        match mode {
            AveragingMode::Micro => self.micro = Some(value),
            AveragingMode::Macro => self.macro_ = Some(value),
            AveragingMode::Instance => self.instance = Some(value),
        }
    }
}

/// Result document of every command. Field order is the serialization order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: Vec<String>,
    pub config_hash: String,
    pub seed: u64,
    pub metric: MetricConfig,
    pub averaging: AveragingMode,
    /// Utility of the reported predictions under the selected averaging.
    pub utility: f64,
    pub utilities: Utilities,
    /// Utility on the held-out evaluation split, when it differs from the full set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation_utility: Option<f64>,
    /// Argmax-rule utility on the same evaluation data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_utility: Option<f64>,
    /// `M x K x K`, rows = true class, columns = predicted class.
    pub confusion: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossTensorDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bisection: Option<Vec<BisectionTrace>>,
    /// 1-based predicted classes, when the command produces predictions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictions: Option<Vec<Vec<usize>>>,
    pub wall_clock_ms: f64,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub(crate) fn confusion_rows(conf: &ConfusionTensor) -> Vec<Vec<Vec<f64>>> {
    conf.values()
        .outer_iter()
        .map(|slice| slice.rows().into_iter().map(|r| r.to_vec()).collect())
        .collect()
}
