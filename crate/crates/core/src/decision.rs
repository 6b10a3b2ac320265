//! Weighted Bayes decision rules and two-component mixtures.
//!
//! A loss slice `L` shares the confusion orientation: `L[i, j]` is the cost
//! of predicting `j` when the truth is `i`. Predicting class `k` for a
//! probability row `eta` therefore costs `sum_i L[i, k] eta[i]`, and the
//! weighted rule picks the cheapest column. With this orientation the
//! expected weighted loss `<L, C>` is exactly what the rule minimizes.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::confusion::{ClassMatrix, ConfusionTensor, PredictionMatrix, ProbabilityField};
use crate::error::{Error, Result};
use crate::metrics::LossMatrix;

/// One loss matrix per output.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTensor {
    slices: Vec<LossMatrix>,
}

impl LossTensor {
    pub fn new(slices: Vec<LossMatrix>) -> Result<Self> {
        let Some(first) = slices.first() else {
            return Err(Error::InvalidParameter(
                "loss tensor needs at least one slice".into(),
            ));
        };
        let k = first.n_classes();
        if slices.iter().any(|s| s.n_classes() != k) {
            return Err(Error::DimensionMismatch(
                "loss slices differ in size".into(),
            ));
        }
        Ok(Self { slices })
    }

    /// The same slice repeated for every output.
    pub fn shared(slice: LossMatrix, n_outputs: usize) -> Self {
        Self {
            slices: vec![slice; n_outputs.max(1)],
        }
    }

    pub fn slices(&self) -> &[LossMatrix] {
        &self.slices
    }

    pub fn slice(&self, output: usize) -> &LossMatrix {
        &self.slices[output]
    }

    pub fn n_outputs(&self) -> usize {
        self.slices.len()
    }

    pub fn n_classes(&self) -> usize {
        self.slices[0].n_classes()
    }

    /// All slices bit-identical.
    pub fn is_shared(&self) -> bool {
        self.slices.windows(2).all(|w| {
            w[0].values()
                .iter()
                .zip(w[1].values().iter())
                .all(|(a, b)| a.to_bits() == b.to_bits())
        })
    }

    pub fn to_document(&self) -> LossTensorDocument {
        LossTensorDocument {
            m: self.n_outputs(),
            k: self.n_classes(),
            slices: self
                .slices
                .iter()
                .map(|s| s.values().rows().into_iter().map(|r| r.to_vec()).collect())
                .collect(),
        }
    }

    pub fn from_document(doc: &LossTensorDocument) -> Result<Self> {
        if doc.slices.len() != doc.m {
            return Err(Error::Config(format!(
                "loss tensor declares M={} but has {} slices",
                doc.m,
                doc.slices.len()
            )));
        }
        let slices = doc
            .slices
            .iter()
            .map(|rows| {
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                if rows.len() != doc.k || rows.iter().any(|r| r.len() != doc.k) {
                    return Err(Error::Config(format!(
                        "loss slice is not {}x{}",
                        doc.k, doc.k
                    )));
                }
                LossMatrix::new(
                    Array2::from_shape_vec((doc.k, doc.k), flat).expect("checked shape"),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(slices)
    }
}

/// Serialized form of a [`LossTensor`]: `{"M": .., "K": .., "slices": [[[..]]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossTensorDocument {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub slices: Vec<Vec<Vec<f64>>>,
}

/// Cheapest class for one probability row; ties go to the lowest index.
pub fn weighted_decision(loss: ArrayView2<'_, f64>, eta: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    let mut best_score = f64::INFINITY;
    for (k, column) in loss.columns().into_iter().enumerate() {
        let score: f64 = column.iter().zip(eta.iter()).map(|(l, p)| l * p).sum();
        if score < best_score {
            best = k;
            best_score = score;
        }
    }
    best
}

/// Applies one arbitrary real loss matrix per output. No range check on
/// the losses; the rule is invariant under positive affine maps of each slice.
pub fn predict_with_losses(
    losses: &[ArrayView2<'_, f64>],
    probs: &ProbabilityField,
) -> Result<PredictionMatrix> {
    let (n, m, k) = probs.values().dim();
    if losses.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "{} loss slices for {m} outputs",
            losses.len()
        )));
    }
    if let Some(bad) = losses.iter().find(|l| l.dim() != (k, k)) {
        return Err(Error::DimensionMismatch(format!(
            "loss slice is {:?} but probabilities have {k} classes",
            bad.dim()
        )));
    }
    let values = Array2::from_shape_fn((n, m), |(i, j)| {
        weighted_decision(losses[j], probs.row(i, j))
    });
    ClassMatrix::new(values, k)
}

/// `h_m(x) = argmin_k sum_i L[m][i, k] eta_m(x)_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedClassifier {
    loss: LossTensor,
}

impl WeightedClassifier {
    pub fn new(loss: LossTensor) -> Self {
        Self { loss }
    }

    /// Predicts the most probable class (the 0-1 loss rule).
    pub fn argmax(n_classes: usize, n_outputs: usize) -> Self {
        Self::new(LossTensor::shared(
            LossMatrix::zero_one(n_classes),
            n_outputs,
        ))
    }

    pub fn loss(&self) -> &LossTensor {
        &self.loss
    }

    pub fn predict(&self, probs: &ProbabilityField) -> Result<PredictionMatrix> {
        let views: Vec<_> = self.loss.slices.iter().map(|s| s.values().view()).collect();
        predict_with_losses(&views, probs)
    }
}

/// Per-entry randomized choice between two weighted classifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureClassifier {
    first: WeightedClassifier,
    second: WeightedClassifier,
    alpha: f64,
}

impl MixtureClassifier {
    pub fn new(first: WeightedClassifier, second: WeightedClassifier, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!(
                "mixture weight {alpha} outside [0, 1]"
            )));
        }
        Ok(Self {
            first,
            second,
            alpha,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Entry `(n, m)` follows `first` with probability `alpha`. The uniform
    /// draw for each entry comes from a fixed position of a seeded ChaCha
    /// stream, so results do not depend on evaluation order.
    pub fn predict(&self, probs: &ProbabilityField, seed: u64) -> Result<PredictionMatrix> {
        let a = self.first.predict(probs)?;
        let b = self.second.predict(probs)?;
        let (n, m) = a.values().dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = Array2::from_shape_fn((n, m), |(i, j)| {
            let counter = (i * m + j) as u128;
            rng.set_word_pos(2 * counter);
            let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            if u < self.alpha {
                a.get(i, j)
            } else {
                b.get(i, j)
            }
        });
        ClassMatrix::new(values, probs.n_classes())
    }
}

/// `<L, C>` summed over every output slice.
pub fn expected_weighted_loss(loss: &LossTensor, conf: &ConfusionTensor) -> Result<f64> {
    if loss.n_outputs() != conf.n_outputs() || loss.n_classes() != conf.n_classes() {
        return Err(Error::DimensionMismatch(format!(
            "loss is {}x{}x{} but confusion is {}x{}x{}",
            loss.n_outputs(),
            loss.n_classes(),
            loss.n_classes(),
            conf.n_outputs(),
            conf.n_classes(),
            conf.n_classes()
        )));
    }
    Ok(loss
        .slices
        .iter()
        .enumerate()
        .map(|(m, l)| crate::metrics::inner(l.values().view(), conf.slice(m)))
        .sum())
}
