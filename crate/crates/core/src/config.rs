//! Metric configuration documents.
//!
//! ```json
//! {"kind": "weighted_exp", "params": {"gamma": 0.5}, "averaging": "macro"}
//! {"kind": "micro_f1", "params": {"negative_class": 1}}
//! {"kind": "fractional_linear", "A": [[0, 0], [0, 2]], "B": [[0, 1], [1, 2]]}
//! {"kind": "loss_based", "L": [[0, 1], [1, 0]]}
//! ```
//!
//! Matrices are row-major with rows indexing the true class and columns the
//! predicted class; class numbers (such as `negative_class`) are 1-based.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::averaging::{AveragingMode, AveragingSpec};
use crate::error::{Error, Result};
use crate::metrics::{MetricKind, MetricSpec};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative_class: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "is_default_params")]
    pub params: MetricParams,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Vec<f64>>>,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub l: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub averaging: Option<AveragingMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub denominator_floor: Option<f64>,
}

fn is_default_params(p: &MetricParams) -> bool {
    *p == MetricParams::default()
}

impl MetricConfig {
    pub fn named(kind: &str) -> Self {
        Self {
            kind: kind.to_string(),
            params: MetricParams::default(),
            a: None,
            b: None,
            l: None,
            averaging: None,
            weights: None,
            denominator_floor: None,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.params.gamma = Some(gamma);
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("metric config: {e}")))
    }

    /// Accepts inline JSON, a path to a JSON file, or a shorthand such as
    /// `ordinal`, `micro_f1` or `weighted_exp:0.5`.
    pub fn parse_arg(arg: &str) -> Result<Self> {
        let trimmed = arg.trim();
        if trimmed.starts_with('{') {
            return Self::from_json(trimmed);
        }
        let path = Path::new(trimmed);
        if path.is_file() {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })?;
            return Self::from_json(&text);
        }
        let (name, gamma) = match trimmed.split_once(':') {
            Some((name, g)) => {
                let g: f64 = g
                    .parse()
                    .map_err(|_| Error::Config(format!("bad gamma in metric '{trimmed}'")))?;
                (name, Some(g))
            }
            None => (trimmed, None),
        };
        let mut cfg = Self::named(name);
        cfg.params.gamma = gamma;
        // validate the kind now so typos surface before any file is read
        cfg.kind_for(cfg.n_classes_hint().unwrap_or(2).max(2))?;
        Ok(cfg)
    }

    /// Class count implied by explicit matrices, if any.
    pub fn n_classes_hint(&self) -> Option<usize> {
        self.a
            .as_ref()
            .or(self.l.as_ref())
            .or(self.b.as_ref())
            .map(Vec::len)
    }

    fn kind_for(&self, n_classes: usize) -> Result<MetricKind> {
        let gamma = || {
            self.params
                .gamma
                .ok_or_else(|| Error::Config(format!("metric '{}' needs params.gamma", self.kind)))
        };
        let matrix = |m: &Option<Vec<Vec<f64>>>, name: &str| -> Result<Array2<f64>> {
            let rows = m.as_ref().ok_or_else(|| {
                Error::Config(format!("metric '{}' needs matrix {name}", self.kind))
            })?;
            to_matrix(rows, n_classes, name)
        };
        Ok(match self.kind.as_str() {
            "ordinal" => MetricKind::Ordinal,
            "micro_f1" => {
                let neg = self.params.negative_class.unwrap_or(1);
                if neg == 0 || neg > n_classes {
                    return Err(Error::ClassOutOfRange {
                        index: neg,
                        n_classes,
                    });
                }
                MetricKind::MicroF1 {
                    negative_class: neg - 1,
                }
            }
            "macro_f1" => MetricKind::MacroF1,
            "weighted_exp" | "weighted" => MetricKind::WeightedExp { gamma: gamma()? },
            "min_max" => MetricKind::MinMax,
            "polynomial" => MetricKind::Polynomial { gamma: gamma()? },
            "fractional_linear" => MetricKind::FractionalLinear {
                a: matrix(&self.a, "A")?,
                b: matrix(&self.b, "B")?,
            },
            "loss_based" => MetricKind::LossBased {
                loss: matrix(&self.l, "L")?,
            },
            other => return Err(Error::Config(format!("unknown metric kind '{other}'"))),
        })
    }

    pub fn to_spec(&self, n_classes: usize) -> Result<MetricSpec> {
        let spec = MetricSpec::new(self.kind_for(n_classes)?, n_classes)?;
        match self.denominator_floor {
            Some(floor) => spec.with_denominator_floor(floor),
            None => Ok(spec),
        }
    }

    /// Averaging from the document, overridden by `mode` when given.
    pub fn averaging(&self, mode: Option<AveragingMode>) -> AveragingSpec {
        AveragingSpec {
            mode: mode.or(self.averaging).unwrap_or(AveragingMode::Micro),
            output_weights: self.weights.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("metric config serializes")
    }
}

fn to_matrix(rows: &[Vec<f64>], n_classes: usize, name: &str) -> Result<Array2<f64>> {
    if rows.len() != n_classes || rows.iter().any(|r| r.len() != n_classes) {
        return Err(Error::Config(format!(
            "matrix {name} must be {n_classes}x{n_classes}"
        )));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Array2::from_shape_vec((n_classes, n_classes), flat).expect("checked shape"))
}

/// Hex SHA-256 of the given parts, joined by newlines.
pub fn config_hash(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part.as_bytes());
        hasher.update(b"\n");
    }
    hex::encode(hasher.finalize())
}
