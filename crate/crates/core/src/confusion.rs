//! Sample, expected, and masked confusion tensors.
//!
//! Every confusion produced here uses the same orientation: entry `(i, j)`
//! of an output slice is the mass of samples whose true class is `i` and
//! whose predicted class is `j`. Class indices are 0-based in memory; file
//! formats in [`crate::cli::io`] convert to and from 1-based labels.

use std::collections::BTreeSet;

use ndarray::{s, Array2, Array3, Array4, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Tolerance for "sums to one" checks on probability rows and confusion mass.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// An `N x M` matrix of class indices, one per (sample, output).
///
/// Used both for true labels and for predictions. Entries are 0-based and
/// strictly below `n_classes`. When outputs originally had different class
/// counts, `n_classes` is the maximum and the extra classes simply never
/// occur in the smaller outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMatrix {
    values: Array2<usize>,
    n_classes: usize,
}

/// True labels `y`.
pub type LabelMatrix = ClassMatrix;
/// Predicted labels `h(x)`.
pub type PredictionMatrix = ClassMatrix;

impl ClassMatrix {
    pub fn new(values: Array2<usize>, n_classes: usize) -> Result<Self> {
        if n_classes == 0 {
            return Err(Error::InvalidParameter("n_classes must be positive".into()));
        }
        if let Some(&bad) = values.iter().find(|&&v| v >= n_classes) {
            return Err(Error::ClassOutOfRange {
                index: bad + 1,
                n_classes,
            });
        }
        Ok(Self { values, n_classes })
    }

    /// Builds from rows of 1-based class labels.
    pub fn from_one_based(rows: &[Vec<usize>], n_classes: usize) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let mut values = Array2::zeros((n, m));
        for (r, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "row {} has {} outputs, expected {}",
                    r + 1,
                    row.len(),
                    m
                )));
            }
            for (c, &v) in row.iter().enumerate() {
                if v == 0 || v > n_classes {
                    return Err(Error::ClassOutOfRange {
                        index: v,
                        n_classes,
                    });
                }
                values[[r, c]] = v - 1;
            }
        }
        Self::new(values, n_classes)
    }

    /// Single-output convenience constructor from 0-based classes.
    pub fn from_column(classes: &[usize], n_classes: usize) -> Result<Self> {
        let values =
            Array2::from_shape_vec((classes.len(), 1), classes.to_vec()).expect("column shape");
        Self::new(values, n_classes)
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_outputs(&self) -> usize {
        self.values.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn get(&self, sample: usize, output: usize) -> usize {
        self.values[[sample, output]]
    }

    pub fn values(&self) -> &Array2<usize> {
        &self.values
    }

    /// Rows as 1-based labels, as written to files.
    pub fn to_one_based(&self) -> Vec<Vec<usize>> {
        self.values
            .rows()
            .into_iter()
            .map(|row| row.iter().map(|&v| v + 1).collect())
            .collect()
    }

    /// Same values interpreted with a larger class count.
    pub fn with_classes(&self, n_classes: usize) -> Result<Self> {
        Self::new(self.values.clone(), n_classes)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            values: self.values.select(Axis(0), rows),
            n_classes: self.n_classes,
        }
    }

    /// Single output `m` as an `N x 1` matrix.
    pub fn output(&self, m: usize) -> Self {
        Self {
            values: self.values.slice(s![.., m..m + 1]).to_owned(),
            n_classes: self.n_classes,
        }
    }

    fn check_same_shape(&self, other: &ClassMatrix) -> Result<()> {
        if self.values.dim() != other.values.dim() {
            return Err(Error::DimensionMismatch(format!(
                "labels are {:?} but predictions are {:?}",
                self.values.dim(),
                other.values.dim()
            )));
        }
        if self.n_classes != other.n_classes {
            return Err(Error::DimensionMismatch(format!(
                "labels use {} classes but predictions use {}",
                self.n_classes, other.n_classes
            )));
        }
        Ok(())
    }
}

/// Per-sample conditional class probabilities, shape `N x M x K`.
///
/// Every `(n, m)` row lies on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityField {
    values: Array3<f64>,
}

impl ProbabilityField {
    pub fn new(values: Array3<f64>) -> Result<Self> {
        let (n, m, _) = values.dim();
        for i in 0..n {
            for j in 0..m {
                let row = values.slice(s![i, j, ..]);
                if row.iter().any(|p| !p.is_finite()) {
                    return Err(Error::NonFinite(format!(
                        "probability at sample {}, output {}",
                        i + 1,
                        j + 1
                    )));
                }
                let sum: f64 = row.sum();
                if row.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > MASS_TOLERANCE {
                    return Err(Error::SimplexViolation {
                        sample: i + 1,
                        output: j + 1,
                        sum,
                    });
                }
            }
        }
        Ok(Self { values })
    }

    /// Degenerate field putting all mass on the given labels.
    pub fn one_hot(labels: &LabelMatrix) -> Self {
        let (n, m) = labels.values.dim();
        let mut values = Array3::zeros((n, m, labels.n_classes));
        for ((i, j), &c) in labels.values.indexed_iter() {
            values[[i, j, c]] = 1.0;
        }
        Self { values }
    }

    pub fn n_samples(&self) -> usize {
        self.values.dim().0
    }

    pub fn n_outputs(&self) -> usize {
        self.values.dim().1
    }

    pub fn n_classes(&self) -> usize {
        self.values.dim().2
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn row(&self, sample: usize, output: usize) -> ndarray::ArrayView1<'_, f64> {
        self.values.slice(s![sample, output, ..])
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            values: self.values.select(Axis(0), rows),
        }
    }

    pub fn output(&self, m: usize) -> Self {
        Self {
            values: self.values.slice(s![.., m..m + 1, ..]).to_owned(),
        }
    }

    /// Zero-pads the class axis up to `n_classes`.
    pub fn pad_classes(&self, n_classes: usize) -> Result<Self> {
        let (n, m, k) = self.values.dim();
        if n_classes < k {
            return Err(Error::DimensionMismatch(format!(
                "cannot pad {k} classes down to {n_classes}"
            )));
        }
        let mut values = Array3::zeros((n, m, n_classes));
        values.slice_mut(s![.., .., ..k]).assign(&self.values);
        Ok(Self { values })
    }

    fn check_predictions(&self, preds: &PredictionMatrix) -> Result<()> {
        let (n, m, k) = self.values.dim();
        if preds.values.dim() != (n, m) || preds.n_classes != k {
            return Err(Error::DimensionMismatch(format!(
                "probabilities are {n}x{m}x{k} but predictions are {:?} with {} classes",
                preds.values.dim(),
                preds.n_classes
            )));
        }
        Ok(())
    }
}

/// Confusion tensor of shape `M x K x K`, rows = true class, columns = predicted.
///
/// Each output slice carries total mass one.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionTensor {
    values: Array3<f64>,
}

impl ConfusionTensor {
    pub fn new(values: Array3<f64>) -> Result<Self> {
        let (_, k1, k2) = values.dim();
        if k1 != k2 {
            return Err(Error::InvalidConfusion(format!(
                "slices must be square, got {k1}x{k2}"
            )));
        }
        for (m, slice) in values.outer_iter().enumerate() {
            if let Some(v) = slice.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidConfusion(format!(
                    "output {} has entry {v} outside [0, 1]",
                    m + 1
                )));
            }
            let mass = slice.sum();
            if (mass - 1.0).abs() > MASS_TOLERANCE {
                return Err(Error::InvalidConfusion(format!(
                    "output {} has mass {mass}",
                    m + 1
                )));
            }
        }
        Ok(Self { values })
    }

    /// Convex combination `alpha * a + (1 - alpha) * b`.
    pub fn mix(a: &ConfusionTensor, b: &ConfusionTensor, alpha: f64) -> Result<Self> {
        if a.values.dim() != b.values.dim() {
            return Err(Error::DimensionMismatch("confusion shapes differ".into()));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!("mixture weight {alpha}")));
        }
        Self::new(&a.values * alpha + &b.values * (1.0 - alpha))
    }

    pub fn n_outputs(&self) -> usize {
        self.values.dim().0
    }

    pub fn n_classes(&self) -> usize {
        self.values.dim().1
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn slice(&self, output: usize) -> ArrayView2<'_, f64> {
        self.values.index_axis(Axis(0), output)
    }
}

/// Set of observed `(sample, output)` pairs, both 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationMask {
    entries: BTreeSet<(usize, usize)>,
}

impl ObservationMask {
    pub fn new(
        entries: impl IntoIterator<Item = (usize, usize)>,
        n_samples: usize,
        n_outputs: usize,
    ) -> Result<Self> {
        let entries: BTreeSet<_> = entries.into_iter().collect();
        if entries.is_empty() {
            return Err(Error::EmptyMask);
        }
        if let Some(&(n, m)) = entries
            .iter()
            .find(|&&(n, m)| n >= n_samples || m >= n_outputs)
        {
            return Err(Error::DimensionMismatch(format!(
                "observed entry ({n}, {m}) outside {n_samples}x{n_outputs}"
            )));
        }
        Ok(Self { entries })
    }

    /// Every pair observed.
    pub fn full(n_samples: usize, n_outputs: usize) -> Result<Self> {
        Self::new(
            (0..n_samples).flat_map(|n| (0..n_outputs).map(move |m| (n, m))),
            n_samples,
            n_outputs,
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(usize, usize)> {
        self.entries.iter()
    }
}

/// Empirical confusion: `C[m, i, j] = #{n : y[n, m] = i, h[n, m] = j} / N`.
pub fn sample_confusion(labels: &LabelMatrix, preds: &PredictionMatrix) -> Result<ConfusionTensor> {
    labels.check_same_shape(preds)?;
    let (n, m) = labels.values.dim();
    if n == 0 {
        return Err(Error::DimensionMismatch("no samples".into()));
    }
    let k = labels.n_classes;
    let mut values = Array3::zeros((m, k, k));
    let unit = 1.0 / n as f64;
    for ((i, j), &y) in labels.values.indexed_iter() {
        values[[j, y, preds.values[[i, j]]]] += unit;
    }
    Ok(ConfusionTensor { values })
}

/// Expected confusion under per-sample class probabilities:
/// `C[m, i, j] = (1/N) sum_n eta[n, m, i] * 1{h[n, m] = j}`.
pub fn expected_confusion(
    probs: &ProbabilityField,
    preds: &PredictionMatrix,
) -> Result<ConfusionTensor> {
    probs.check_predictions(preds)?;
    let (n, m, k) = probs.values.dim();
    if n == 0 {
        return Err(Error::DimensionMismatch("no samples".into()));
    }
    let mut values = Array3::zeros((m, k, k));
    let unit = 1.0 / n as f64;
    for i in 0..n {
        for j in 0..m {
            let h = preds.values[[i, j]];
            for c in 0..k {
                values[[j, c, h]] += unit * probs.values[[i, j, c]];
            }
        }
    }
    Ok(ConfusionTensor { values })
}

/// Micro-averaged confusion over the observed entries only:
/// `C[i, j] = (1/|Omega|) sum_{(n, m) in Omega} 1{y[n, m] = i, h[n, m] = j}`.
pub fn masked_confusion(
    labels: &LabelMatrix,
    preds: &PredictionMatrix,
    mask: &ObservationMask,
) -> Result<Array2<f64>> {
    labels.check_same_shape(preds)?;
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let (n, m) = labels.values.dim();
    let k = labels.n_classes;
    let mut out = Array2::zeros((k, k));
    let unit = 1.0 / mask.len() as f64;
    for &(i, j) in mask.iter() {
        if i >= n || j >= m {
            return Err(Error::DimensionMismatch(format!(
                "observed entry ({i}, {j}) outside {n}x{m}"
            )));
        }
        out[[labels.values[[i, j]], preds.values[[i, j]]]] += unit;
    }
    Ok(out)
}

/// Per-instance confusions `C^(n)`, shape `N x M x K x K`, each a one-hot
/// indicator of the (true, predicted) pair.
pub fn per_sample_confusions(
    labels: &LabelMatrix,
    preds: &PredictionMatrix,
) -> Result<Array4<f64>> {
    labels.check_same_shape(preds)?;
    let (n, m) = labels.values.dim();
    let k = labels.n_classes;
    let mut out = Array4::zeros((n, m, k, k));
    for ((i, j), &y) in labels.values.indexed_iter() {
        out[[i, j, y, preds.values[[i, j]]]] = 1.0;
    }
    Ok(out)
}

/// Per-instance expected confusions: column `h[n, m]` of slice `(n, m)`
/// holds `eta[n, m, .]`.
pub fn per_sample_expected_confusions(
    probs: &ProbabilityField,
    preds: &PredictionMatrix,
) -> Result<Array4<f64>> {
    probs.check_predictions(preds)?;
    let (n, m, k) = probs.values.dim();
    let mut out = Array4::zeros((n, m, k, k));
    for i in 0..n {
        for j in 0..m {
            let h = preds.values[[i, j]];
            for c in 0..k {
                out[[i, j, c, h]] = probs.values[[i, j, c]];
            }
        }
    }
    Ok(out)
}
