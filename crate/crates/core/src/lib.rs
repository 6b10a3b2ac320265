//! Evaluation and optimization of non-decomposable multioutput
//! classification metrics.
//!
//! The crate works on confusion tensors (`M` outputs, `K` classes each) and
//! covers:
//!
//! - [`confusion`]: sample, expected and masked confusions
//! - [`metrics`]: ordinal, F1, weighted-accuracy and related metrics, their
//!   gradients and fractional-linear `(A, B)` forms
//! - [`averaging`]: micro, macro and instance averaging across outputs
//! - [`decision`]: weighted Bayes decision rules `argmin_k <L_k, eta>`
//! - [`bisection`]: the threshold bisection that turns probability estimates
//!   into a metric-optimal weighted classifier, plus exhaustive oracles
//! - [`estimators`]: multinomial logistic regression and synthetic data
//! - [`cli`]: file formats and the batch commands behind the binary
//!
//! ```
//! use metricopt::prelude::*;
//! use ndarray::array;
//!
//! let spec = MetricSpec::micro_f1(2).unwrap();
//! let conf = array![[0.5, 0.0], [0.0, 0.5]];
//! assert_eq!(spec.evaluate(conf.view()).unwrap(), 1.0);
//! ```

pub mod averaging;
pub mod bisection;
pub mod cli;
pub mod config;
pub mod confusion;
pub mod decision;
pub mod error;
pub mod estimators;
pub mod metrics;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::averaging::{
        instance_utility, macro_utility, micro_confusion, micro_utility, AveragingMode,
        AveragingSpec,
    };
    pub use crate::bisection::{
        bisect_macro, bisect_micro, brute_force_oracle, gamma_grid_oracle, BisectionConfig,
        BisectionTrace, Evaluation,
    };
    pub use crate::config::MetricConfig;
    pub use crate::confusion::{
        expected_confusion, masked_confusion, sample_confusion, ClassMatrix, ConfusionTensor,
        LabelMatrix, ObservationMask, PredictionMatrix, ProbabilityField,
    };
    pub use crate::decision::{
        expected_weighted_loss, LossTensor, MixtureClassifier, WeightedClassifier,
    };
    pub use crate::estimators::{
        fit_lr, generate_synthetic, performance_ratio, LrConfig, MultinomialLr, SyntheticConfig,
    };
    pub use crate::metrics::{
        loss_from_gamma, loss_from_gradient, FractionalLinearMetric, LossMatrix, MetricKind,
        MetricSpec,
    };
    pub use crate::{Error, Result};
}
