//! Multiclass performance metrics on a single `K x K` confusion matrix.
//!
//! [`MetricSpec::evaluate`] computes each metric directly from its closed
//! form. Metrics that are ratios of linear functions also expose an
//! explicit `(A, B)` pair through [`MetricSpec::to_fractional_linear`]; the
//! two routes are kept independent so each can check the other.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Default lower bound on `<B, C>` for fractional-linear evaluation.
pub const DEFAULT_DENOMINATOR_FLOOR: f64 = 1e-8;

/// The metric family. Class indices inside parameters are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricKind {
    /// `sum_ij (1 - |i - j| / (K - 1)) C_ij`.
    Ordinal,
    /// F1 over the non-negative classes, with `negative_class` excluded
    /// from the numerator.
    MicroF1 { negative_class: usize },
    /// Mean of per-class F1 over classes with nonzero support.
    MacroF1,
    /// `sum_i exp(-gamma * i) C_ii` with 1-based `i`.
    WeightedExp { gamma: f64 },
    /// Smallest per-class recall. Evaluation only.
    MinMax,
    /// `sum_i (1 - C_ii)^gamma`. Evaluation only.
    Polynomial { gamma: f64 },
    /// `<A, C> / <B, C>`.
    FractionalLinear { a: Array2<f64>, b: Array2<f64> },
    /// `1 - <L, C>`.
    LossBased { loss: Array2<f64> },
}

impl MetricKind {
    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Ordinal => "ordinal",
            MetricKind::MicroF1 { .. } => "micro_f1",
            MetricKind::MacroF1 => "macro_f1",
            MetricKind::WeightedExp { .. } => "weighted_exp",
            MetricKind::MinMax => "min_max",
            MetricKind::Polynomial { .. } => "polynomial",
            MetricKind::FractionalLinear { .. } => "fractional_linear",
            MetricKind::LossBased { .. } => "loss_based",
        }
    }
}

/// A metric bound to a class count.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    kind: MetricKind,
    n_classes: usize,
    denominator_floor: f64,
}

impl MetricSpec {
    pub fn new(kind: MetricKind, n_classes: usize) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 classes, got {n_classes}"
            )));
        }
        let square = |m: &Array2<f64>, what: &str| -> Result<()> {
            if m.dim() != (n_classes, n_classes) {
                return Err(Error::InvalidParameter(format!(
                    "{what} is {:?}, expected {n_classes}x{n_classes}",
                    m.dim()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("{what} matrix")));
            }
            Ok(())
        };
        match &kind {
            MetricKind::MicroF1 { negative_class } if *negative_class >= n_classes => {
                return Err(Error::ClassOutOfRange {
                    index: negative_class + 1,
                    n_classes,
                })
            }
            MetricKind::WeightedExp { gamma } | MetricKind::Polynomial { gamma }
                if !gamma.is_finite() =>
            {
                return Err(Error::InvalidParameter(format!("gamma = {gamma}")))
            }
            MetricKind::FractionalLinear { a, b } => {
                square(a, "A")?;
                square(b, "B")?;
            }
            MetricKind::LossBased { loss } => square(loss, "L")?,
            _ => {}
        }
        Ok(Self {
            kind,
            n_classes,
            denominator_floor: DEFAULT_DENOMINATOR_FLOOR,
        })
    }

    pub fn with_denominator_floor(mut self, floor: f64) -> Result<Self> {
        if !(floor > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "denominator floor {floor}"
            )));
        }
        self.denominator_floor = floor;
        Ok(self)
    }

    pub fn ordinal(n_classes: usize) -> Result<Self> {
        Self::new(MetricKind::Ordinal, n_classes)
    }

    /// Micro-F1 with class 1 as the negative class.
    pub fn micro_f1(n_classes: usize) -> Result<Self> {
        Self::new(MetricKind::MicroF1 { negative_class: 0 }, n_classes)
    }

    pub fn macro_f1(n_classes: usize) -> Result<Self> {
        Self::new(MetricKind::MacroF1, n_classes)
    }

    pub fn weighted_exp(gamma: f64, n_classes: usize) -> Result<Self> {
        Self::new(MetricKind::WeightedExp { gamma }, n_classes)
    }

    pub fn kind(&self) -> &MetricKind {
        &self.kind
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn denominator_floor(&self) -> f64 {
        self.denominator_floor
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    /// Linear in the confusion (constant gradient).
    pub fn is_linear(&self) -> bool {
        matches!(
            self.kind,
            MetricKind::Ordinal | MetricKind::WeightedExp { .. } | MetricKind::LossBased { .. }
        )
    }

    fn check_conf(&self, conf: &ArrayView2<'_, f64>) -> Result<()> {
        let k = self.n_classes;
        if conf.dim() != (k, k) {
            return Err(Error::DimensionMismatch(format!(
                "confusion is {:?}, metric expects {k}x{k}",
                conf.dim()
            )));
        }
        if conf.iter().any(|v| v.is_nan()) {
            return Err(Error::NonFinite("NaN in confusion matrix".into()));
        }
        if conf.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("infinite confusion entry".into()));
        }
        if conf.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidConfusion("negative entry".into()));
        }
        Ok(())
    }

    fn checked_denominator(&self, value: f64) -> Result<f64> {
        if value < self.denominator_floor {
            Err(Error::DegenerateDenominator {
                value,
                floor: self.denominator_floor,
            })
        } else {
            Ok(value)
        }
    }

    /// `psi(C)` for a `K x K` confusion with rows = true class.
    pub fn evaluate(&self, conf: ArrayView2<'_, f64>) -> Result<f64> {
        self.check_conf(&conf)?;
        let k = self.n_classes;
        let value = match &self.kind {
            MetricKind::Ordinal => {
                let mut total = 0.0;
                for ((i, j), &c) in conf.indexed_iter() {
                    total += ordinal_weight(i, j, k) * c;
                }
                total
            }
            MetricKind::MicroF1 { negative_class } => {
                let neg = *negative_class;
                let numerator: f64 = 2.0
                    * (0..k)
                        .filter(|&i| i != neg)
                        .map(|i| conf[[i, i]])
                        .sum::<f64>();
                let denominator = 2.0 - conf.row(neg).sum() - conf.column(neg).sum();
                numerator / self.checked_denominator(denominator)?
            }
            MetricKind::MacroF1 => {
                let mut total = 0.0;
                let mut supported = 0usize;
                for i in 0..k {
                    let support = conf.row(i).sum() + conf.column(i).sum();
                    if support > 0.0 {
                        total += 2.0 * conf[[i, i]] / support;
                        supported += 1;
                    }
                }
                if supported == 0 {
                    return Err(Error::DegenerateDenominator {
                        value: 0.0,
                        floor: self.denominator_floor,
                    });
                }
                total / supported as f64
            }
            MetricKind::WeightedExp { gamma } => (0..k)
                .map(|i| (-gamma * (i + 1) as f64).exp() * conf[[i, i]])
                .sum(),
            MetricKind::MinMax => {
                let mut worst = f64::INFINITY;
                for i in 0..k {
                    let mass = conf.row(i).sum();
                    if mass > 0.0 {
                        worst = worst.min(conf[[i, i]] / mass);
                    }
                }
                if worst.is_infinite() {
                    return Err(Error::DegenerateDenominator {
                        value: 0.0,
                        floor: self.denominator_floor,
                    });
                }
                worst
            }
            MetricKind::Polynomial { gamma } => {
                (0..k).map(|i| (1.0 - conf[[i, i]]).powf(*gamma)).sum()
            }
            MetricKind::FractionalLinear { a, b } => {
                let numerator = inner(a.view(), conf);
                numerator / self.checked_denominator(inner(b.view(), conf))?
            }
            MetricKind::LossBased { loss } => 1.0 - inner(loss.view(), conf),
        };
        Ok(value)
    }

    /// Analytic gradient of [`MetricSpec::evaluate`] with respect to each
    /// confusion entry.
    pub fn gradient(&self, conf: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_conf(&conf)?;
        let k = self.n_classes;
        let grad = match &self.kind {
            MetricKind::Ordinal => ordinal_matrix(k),
            MetricKind::WeightedExp { gamma } => weighted_diag(*gamma, k),
            MetricKind::LossBased { loss } => -loss,
            MetricKind::MicroF1 { negative_class } => {
                let neg = *negative_class;
                let numerator: f64 = 2.0
                    * (0..k)
                        .filter(|&i| i != neg)
                        .map(|i| conf[[i, i]])
                        .sum::<f64>();
                let denominator =
                    self.checked_denominator(2.0 - conf.row(neg).sum() - conf.column(neg).sum())?;
                Array2::from_shape_fn((k, k), |(i, j)| {
                    let d_num = if i == j && i != neg { 2.0 } else { 0.0 };
                    let d_den = -((i == neg) as u8 as f64) - ((j == neg) as u8 as f64);
                    (d_num * denominator - numerator * d_den) / (denominator * denominator)
                })
            }
            MetricKind::MacroF1 => {
                let supports: Vec<f64> = (0..k)
                    .map(|i| conf.row(i).sum() + conf.column(i).sum())
                    .collect();
                let supported = supports.iter().filter(|&&s| s > 0.0).count();
                if supported == 0 {
                    return Err(Error::DegenerateDenominator {
                        value: 0.0,
                        floor: self.denominator_floor,
                    });
                }
                let mut grad = Array2::zeros((k, k));
                for (c, &d) in supports.iter().enumerate() {
                    if d <= 0.0 {
                        continue;
                    }
                    let diag = conf[[c, c]];
                    // d F1_c / d C_ij = 2 1{i=j=c} / d - 2 C_cc (1{i=c} + 1{j=c}) / d^2
                    for j in 0..k {
                        grad[[c, j]] -= 2.0 * diag / (d * d);
                        grad[[j, c]] -= 2.0 * diag / (d * d);
                    }
                    grad[[c, c]] += 2.0 / d;
                }
                grad / supported as f64
            }
            MetricKind::Polynomial { gamma } => {
                let mut grad = Array2::zeros((k, k));
                for i in 0..k {
                    grad[[i, i]] = -gamma * (1.0 - conf[[i, i]]).powf(gamma - 1.0);
                }
                grad
            }
            MetricKind::FractionalLinear { a, b } => {
                let numerator = inner(a.view(), conf);
                let denominator = self.checked_denominator(inner(b.view(), conf))?;
                (a * denominator - b * numerator) / (denominator * denominator)
            }
            MetricKind::MinMax => return Err(Error::GradientUnavailable(self.name().into())),
        };
        Ok(grad)
    }

    /// Explicit `(A, B)` with `psi(C) = <A, C> / <B, C>` on unit-mass confusions.
    pub fn to_fractional_linear(&self) -> Result<FractionalLinearMetric> {
        let k = self.n_classes;
        let ones = Array2::ones((k, k));
        let (a, b) = match &self.kind {
            MetricKind::Ordinal => (ordinal_matrix(k), ones),
            MetricKind::WeightedExp { gamma } => (weighted_diag(*gamma, k), ones),
            MetricKind::LossBased { loss } => (ones.clone() - loss, ones),
            MetricKind::MicroF1 { negative_class } => {
                let neg = *negative_class;
                let a = Array2::from_shape_fn(
                    (k, k),
                    |(i, j)| {
                        if i == j && i != neg {
                            2.0
                        } else {
                            0.0
                        }
                    },
                );
                let b = Array2::from_shape_fn((k, k), |(i, j)| {
                    2.0 - (i == neg) as u8 as f64 - (j == neg) as u8 as f64
                });
                (a, b)
            }
            MetricKind::FractionalLinear { a, b } => (a.clone(), b.clone()),
            _ => return Err(Error::NotFractionalLinear(self.name().into())),
        };
        FractionalLinearMetric::new(a, b, self.denominator_floor)
    }
}

/// `psi(C) = <A, C> / <B, C>` with a hard floor on the denominator.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalLinearMetric {
    numerator: Array2<f64>,
    denominator: Array2<f64>,
    floor: f64,
}

impl FractionalLinearMetric {
    pub fn new(numerator: Array2<f64>, denominator: Array2<f64>, floor: f64) -> Result<Self> {
        let (k1, k2) = numerator.dim();
        if k1 != k2 || numerator.dim() != denominator.dim() {
            return Err(Error::InvalidParameter(format!(
                "A is {:?} and B is {:?}; both must be the same square shape",
                numerator.dim(),
                denominator.dim()
            )));
        }
        if numerator
            .iter()
            .chain(denominator.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("fractional-linear coefficients".into()));
        }
        if !(floor > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "denominator floor {floor}"
            )));
        }
        Ok(Self {
            numerator,
            denominator,
            floor,
        })
    }

    pub fn numerator(&self) -> &Array2<f64> {
        &self.numerator
    }

    pub fn denominator(&self) -> &Array2<f64> {
        &self.denominator
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn n_classes(&self) -> usize {
        self.numerator.nrows()
    }

    pub fn evaluate(&self, conf: ArrayView2<'_, f64>) -> Result<f64> {
        if conf.dim() != self.numerator.dim() {
            return Err(Error::DimensionMismatch(format!(
                "confusion is {:?}, metric expects {:?}",
                conf.dim(),
                self.numerator.dim()
            )));
        }
        if conf.iter().any(|v| v.is_nan()) {
            return Err(Error::NonFinite("NaN in confusion matrix".into()));
        }
        let denominator = inner(self.denominator.view(), conf);
        if denominator < self.floor {
            return Err(Error::DegenerateDenominator {
                value: denominator,
                floor: self.floor,
            });
        }
        Ok(inner(self.numerator.view(), conf) / denominator)
    }
}

/// Loss matrix in the confusion orientation (row = true, column = predicted),
/// entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossMatrix {
    values: Array2<f64>,
}

impl LossMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::InvalidParameter(format!(
                "loss matrix must be square, got {:?}",
                values.dim()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!(
                "loss entry {v} outside [0, 1]"
            )));
        }
        Ok(Self { values })
    }

    /// Scales and shifts `raw` onto `[0, 1]`: `(raw - min) / (max - min)`.
    /// A constant matrix maps to all zeros.
    pub fn normalized(raw: &Array2<f64>) -> Self {
        let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let values = if raw.iter().any(|v| v.is_nan()) {
            raw.mapv(|_| f64::NAN)
        } else if max == min {
            Array2::zeros(raw.dim())
        } else {
            raw.mapv(|v| (v - min) / (max - min))
        };
        Self { values }
    }

    /// The 0-1 loss `1 - I`.
    pub fn zero_one(n_classes: usize) -> Self {
        Self {
            values: Array2::from_shape_fn(
                (n_classes, n_classes),
                |(i, j)| {
                    if i == j {
                        0.0
                    } else {
                        1.0
                    }
                },
            ),
        }
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn n_classes(&self) -> usize {
        self.values.nrows()
    }
}

/// Bisection loss at threshold `gamma`: `gamma * B - A`, scaled and shifted to `[0, 1]`.
pub fn loss_from_gamma(flm: &FractionalLinearMetric, gamma: f64) -> LossMatrix {
    LossMatrix::normalized(&(&flm.denominator * gamma - &flm.numerator))
}

/// Supporting loss `1 - grad psi(C)`, scaled and shifted to `[0, 1]`.
pub fn loss_from_gradient(spec: &MetricSpec, conf: ArrayView2<'_, f64>) -> Result<LossMatrix> {
    let grad = spec.gradient(conf)?;
    Ok(LossMatrix::normalized(&grad.mapv(|g| 1.0 - g)))
}

/// Frobenius inner product.
pub fn inner(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn ordinal_weight(i: usize, j: usize, k: usize) -> f64 {
    1.0 - (i as f64 - j as f64).abs() / (k - 1) as f64
}

fn ordinal_matrix(k: usize) -> Array2<f64> {
    Array2::from_shape_fn((k, k), |(i, j)| ordinal_weight(i, j, k))
}

fn weighted_diag(gamma: f64, k: usize) -> Array2<f64> {
    let mut a = Array2::zeros((k, k));
    for i in 0..k {
        a[[i, i]] = (-gamma * (i + 1) as f64).exp();
    }
    a
}
