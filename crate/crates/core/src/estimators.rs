//! Multinomial logistic regression as a probability estimator, and the
//! synthetic softmax data generator used to measure how much post-processing
//! helps over the argmax rule.
//!
//! Both follow the negative-logit convention `eta_k(x) ∝ exp(-(w_k . x + b_k))`.

use ndarray::{s, Array1, Array2, Array3, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::confusion::{sample_confusion, ClassMatrix, LabelMatrix, ProbabilityField};
use crate::decision::{LossTensor, WeightedClassifier};
use crate::error::{Error, Result};
use crate::metrics::{loss_from_gradient, MetricSpec};

/// Full-batch gradient descent settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrConfig {
    pub step: f64,
    pub iterations: usize,
    pub l2: f64,
}

impl Default for LrConfig {
    fn default() -> Self {
        Self {
            step: 0.1,
            iterations: 500,
            l2: 1e-4,
        }
    }
}

/// One softmax model per output: `weights[m]` is `K x D`, `bias[m]` is `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultinomialLr {
    weights: Vec<Array2<f64>>,
    bias: Vec<Array1<f64>>,
    l2: f64,
    trained: bool,
}

impl MultinomialLr {
    /// An untrained placeholder; [`MultinomialLr::predict_proba`] refuses it.
    pub fn untrained() -> Self {
        Self {
            weights: Vec::new(),
            bias: Vec::new(),
            l2: 0.0,
            trained: false,
        }
    }

    /// A fixed model with the given per-output weights and zero bias.
    pub fn from_weights(weights: Vec<Array2<f64>>) -> Result<Self> {
        let Some(first) = weights.first() else {
            return Err(Error::InvalidParameter("need at least one output".into()));
        };
        let dim = first.dim();
        if weights.iter().any(|w| w.dim() != dim) {
            return Err(Error::DimensionMismatch(
                "per-output weights differ in shape".into(),
            ));
        }
        if weights
            .iter()
            .flat_map(|w| w.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("model weights".into()));
        }
        let bias = vec![Array1::zeros(dim.0); weights.len()];
        Ok(Self {
            weights,
            bias,
            l2: 0.0,
            trained: true,
        })
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn bias(&self) -> &[Array1<f64>] {
        &self.bias
    }

    pub fn l2(&self) -> f64 {
        self.l2
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn n_classes(&self) -> usize {
        self.weights.first().map_or(0, |w| w.nrows())
    }

    /// Class probabilities for each row of `features`, shape `N x M x K`.
    pub fn predict_proba(&self, features: &Array2<f64>) -> Result<ProbabilityField> {
        if !self.trained {
            return Err(Error::Untrained);
        }
        check_finite(features)?;
        let d = self.weights[0].ncols();
        if features.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "model expects {d} features, got {}",
                features.ncols()
            )));
        }
        let n = features.nrows();
        let k = self.n_classes();
        let mut values = Array3::zeros((n, self.weights.len(), k));
        for (m, (w, b)) in self.weights.iter().zip(&self.bias).enumerate() {
            let probs = softmax_rows(&neg_logits(features.view(), w, b));
            values.slice_mut(s![.., m, ..]).assign(&probs);
        }
        ProbabilityField::new(values)
    }
}

fn check_finite(features: &Array2<f64>) -> Result<()> {
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("feature matrix".into()));
    }
    Ok(())
}

/// `-(X W^T + b)`, shape `N x K`.
fn neg_logits(features: ArrayView2<'_, f64>, w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    let mut z = features.dot(&w.t());
    z += b;
    z.mapv_inplace(|v| -v);
    z
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    out
}

/// Mean cross-entropy plus `l2/2 * ||W||^2` for one output, and its gradient
/// with respect to `(W, b)`. The bias is not penalized.
pub fn lr_objective(
    features: ArrayView2<'_, f64>,
    classes: &[usize],
    w: &Array2<f64>,
    b: &Array1<f64>,
    l2: f64,
) -> (f64, Array2<f64>, Array1<f64>) {
    let n = features.nrows() as f64;
    let probs = softmax_rows(&neg_logits(features, w, b));
    let mut loss = 0.0;
    // d loss / d z_k = p_k - 1{y = k}, with z = -(Wx + b)
    let mut residual = probs;
    for (row, &y) in classes.iter().enumerate() {
        loss -= residual[[row, y]].max(f64::MIN_POSITIVE).ln();
        residual[[row, y]] -= 1.0;
    }
    loss /= n;
    loss += 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();
    let grad_w = -(residual.t().dot(&features)) / n + w * l2;
    let grad_b = -(residual.sum_axis(Axis(0))) / n;
    (loss, grad_w, grad_b)
}

/// Fits one L2-regularized softmax model per output by deterministic
/// full-batch gradient descent from zero. An output whose labels are all
/// one class gets a constant model that predicts that class.
pub fn fit_lr(
    features: &Array2<f64>,
    labels: &LabelMatrix,
    cfg: &LrConfig,
) -> Result<MultinomialLr> {
    check_finite(features)?;
    if features.nrows() != labels.n_samples() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows but {} label rows",
            features.nrows(),
            labels.n_samples()
        )));
    }
    if labels.n_samples() == 0 {
        return Err(Error::DimensionMismatch("no training samples".into()));
    }
    if !(cfg.l2 >= 0.0) || !(cfg.step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step {} and l2 {} must be positive and nonnegative",
            cfg.step, cfg.l2
        )));
    }
    let k = labels.n_classes();
    let d = features.ncols();
    let mut weights = Vec::with_capacity(labels.n_outputs());
    let mut bias = Vec::with_capacity(labels.n_outputs());
    for m in 0..labels.n_outputs() {
        let classes: Vec<usize> = labels.values().column(m).to_vec();
        let mut w = Array2::zeros((k, d));
        let mut b = Array1::zeros(k);
        if classes.iter().all(|&c| c == classes[0]) {
            // exp(-20) keeps the other classes far below 1e-6 each
            b.fill(20.0);
            b[classes[0]] = 0.0;
        } else {
            for _ in 0..cfg.iterations {
                let (_, gw, gb) = lr_objective(features.view(), &classes, &w, &b, cfg.l2);
                w.scaled_add(-cfg.step, &gw);
                b.scaled_add(-cfg.step, &gb);
            }
        }
        weights.push(w);
        bias.push(b);
    }
    Ok(MultinomialLr {
        weights,
        bias,
        l2: cfg.l2,
        trained: true,
    })
}

/// Settings for the synthetic softmax data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_samples: usize,
    pub n_features: usize,
    pub n_classes: usize,
    /// Scale of the class weights `w_kd = c1 |k - d|`; small values give
    /// near-uniform conditionals.
    pub c1: f64,
    /// Skew of the evaluation weights `A_ii = exp(-c2 i)`.
    pub c2: f64,
    /// Outputs beyond the first rotate the class index (not part of the
    /// single-output construction; used for multioutput fixtures).
    pub n_outputs: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_samples: 20_000,
            n_features: 10,
            n_classes: 10,
            c1: 0.05,
            c2: 1.0,
            n_outputs: 1,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    fn check(&self) -> Result<()> {
        if self.n_samples < 2 || self.n_features < 1 || self.n_classes < 2 || self.n_outputs < 1 {
            return Err(Error::InvalidParameter(format!(
                "synthetic config needs N >= 2, D >= 1, K >= 2, M >= 1; got N={}, D={}, K={}, M={}",
                self.n_samples, self.n_features, self.n_classes, self.n_outputs
            )));
        }
        if !self.c1.is_finite() || !self.c2.is_finite() {
            return Err(Error::InvalidParameter("c1 and c2 must be finite".into()));
        }
        Ok(())
    }

    /// Generating weights for output `m`: `w_kd = c1 |k' - min(d, K)|` with
    /// 1-based `k, d` and `k' = ((k - 1 + m) mod K) + 1`.
    pub fn true_weights(&self, output: usize) -> Array2<f64> {
        let k = self.n_classes;
        Array2::from_shape_fn((k, self.n_features), |(class, feature)| {
            let kk = ((class + output) % k + 1) as f64;
            let dd = (feature + 1).min(k) as f64;
            self.c1 * (kk - dd).abs()
        })
    }

    /// Diagonal evaluation weights `A_ii = exp(-c2 i)`.
    pub fn metric(&self) -> Result<MetricSpec> {
        MetricSpec::weighted_exp(self.c2, self.n_classes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub features: Array2<f64>,
    pub labels: LabelMatrix,
    pub eta: ProbabilityField,
}

/// Standard normal features, softmax conditionals, labels drawn from them.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    cfg.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (n, d, k, m) = (cfg.n_samples, cfg.n_features, cfg.n_classes, cfg.n_outputs);
    let features = Array2::from_shape_simple_fn((n, d), || rng.sample::<f64, _>(StandardNormal));
    let model = MultinomialLr::from_weights((0..m).map(|o| cfg.true_weights(o)).collect())?;
    let eta = model.predict_proba(&features)?;
    let mut classes = Array2::zeros((n, m));
    for i in 0..n {
        for j in 0..m {
            let u: f64 = rng.random();
            let row = eta.row(i, j);
            let mut acc = 0.0;
            let mut chosen = k - 1;
            for (c, &p) in row.iter().enumerate() {
                acc += p;
                if u < acc {
                    chosen = c;
                    break;
                }
            }
            classes[[i, j]] = chosen;
        }
    }
    Ok(SyntheticData {
        features,
        labels: ClassMatrix::new(classes, k)?,
        eta,
    })
}

/// Train/test split indices from a seeded shuffle: `train_fraction` of the
/// rows (rounded up) train, the rest test.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((n as f64) * train_fraction).ceil() as usize;
    let test = idx.split_off(n_train.min(n));
    (idx, test)
}

/// Test-set utilities of the argmax rule and of the metric-weighted rule on
/// the same estimated probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRatio {
    pub c1: f64,
    pub c2: f64,
    pub seed: u64,
    pub utility_baseline: f64,
    pub utility_consistent: f64,
    pub pr: f64,
}

/// Fits logistic regression once on an 80/20 split of the synthetic data
/// for `(cfg.c1, seed)` and scores both decision rules for each value in `c2s`.
pub fn performance_ratios(
    cfg: &SyntheticConfig,
    seed: u64,
    c2s: &[f64],
    lr: &LrConfig,
) -> Result<Vec<PerformanceRatio>> {
    let data = generate_synthetic(&SyntheticConfig {
        seed,
        ..cfg.clone()
    })?;
    let (train, test) = split_indices(cfg.n_samples, 0.8, seed.wrapping_add(1));
    let train_x = data.features.select(Axis(0), &train);
    let test_x = data.features.select(Axis(0), &test);
    let model = fit_lr(&train_x, &data.labels.select_rows(&train), lr)?;
    let probs = model.predict_proba(&test_x)?;
    let test_y = data.labels.select_rows(&test);
    let m = cfg.n_outputs;

    let baseline = WeightedClassifier::argmax(cfg.n_classes, m).predict(&probs)?;
    let baseline_conf = sample_confusion(&test_y, &baseline)?;

    c2s.iter()
        .map(|&c2| {
            let metric = MetricSpec::weighted_exp(c2, cfg.n_classes)?;
            // the metric is linear, so its gradient is the same everywhere
            let any = Array2::from_elem((cfg.n_classes, cfg.n_classes), 1.0);
            let loss = loss_from_gradient(&metric, any.view())?;
            let consistent =
                WeightedClassifier::new(LossTensor::shared(loss, m)).predict(&probs)?;
            let conf = sample_confusion(&test_y, &consistent)?;
            let avg = crate::averaging::AveragingSpec::micro();
            let utility_baseline = crate::averaging::micro_utility(&metric, &baseline_conf, &avg)?;
            let utility_consistent = crate::averaging::micro_utility(&metric, &conf, &avg)?;
            if utility_baseline <= 0.0 {
                return Err(Error::DegenerateRatio(utility_baseline));
            }
            Ok(PerformanceRatio {
                c1: cfg.c1,
                c2,
                seed,
                utility_baseline,
                utility_consistent,
                pr: utility_consistent / utility_baseline,
            })
        })
        .collect()
}

/// Performance ratio for a single `(c1, c2, seed)` cell.
pub fn performance_ratio(cfg: &SyntheticConfig, seed: u64) -> Result<PerformanceRatio> {
    Ok(performance_ratios(cfg, seed, &[cfg.c2], &LrConfig::default())?.remove(0))
}

/// Every `(c1, c2, seed)` cell of a grid, in grid order (c1, then c2, then seed).
/// Fits run on a pool of `workers` threads.
pub fn performance_grid(
    base: &SyntheticConfig,
    c1s: &[f64],
    c2s: &[f64],
    seeds: &[u64],
    lr: &LrConfig,
    workers: usize,
) -> Result<Vec<PerformanceRatio>> {
    let jobs: Vec<(f64, u64)> = c1s
        .iter()
        .flat_map(|&c1| seeds.iter().map(move |&s| (c1, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    let fitted: Vec<Result<Vec<PerformanceRatio>>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c1, seed)| {
                performance_ratios(&SyntheticConfig { c1, ..base.clone() }, seed, c2s, lr)
            })
            .collect()
    });
    let fitted = fitted.into_iter().collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(c1s.len() * c2s.len() * seeds.len());
    for (ci, _) in c1s.iter().enumerate() {
        for (c2i, _) in c2s.iter().enumerate() {
            for (si, _) in seeds.iter().enumerate() {
                rows.push(fitted[ci * seeds.len() + si][c2i]);
            }
        }
    }
    Ok(rows)
}
