// The weighted decision rule under a few loss matrices, and a randomized
// mixture of two weighted classifiers.

use metricopt::prelude::*;
use ndarray::{array, Array3};

fn run() -> Result<()> {
    let eta = array![
        [0.5, 0.3, 0.2],
        [0.2, 0.3, 0.5],
        [0.34, 0.33, 0.33],
        [0.1, 0.45, 0.45]
    ];
    let n = eta.nrows();
    let probs = ProbabilityField::new(Array3::from_shape_fn((n, 1, 3), |(i, _, k)| eta[[i, k]]))?;

    let argmax = WeightedClassifier::argmax(3, 1);
    let ordinal = loss_from_gradient(&MetricSpec::ordinal(3)?, ndarray::Array2::eye(3).view())?;
    let cautious = WeightedClassifier::new(LossTensor::shared(ordinal, 1));
    println!("argmax  {:?}", argmax.predict(&probs)?.to_one_based());
    println!("ordinal {:?}", cautious.predict(&probs)?.to_one_based());

    let mix = MixtureClassifier::new(argmax, cautious, 0.5)?;
    println!("mixture {:?}", mix.predict(&probs, 7)?.to_one_based());

    let conf = expected_confusion(&probs, &WeightedClassifier::argmax(3, 1).predict(&probs)?)?;
    let loss = LossTensor::shared(LossMatrix::zero_one(3), 1);
    println!(
        "expected 0-1 loss of argmax: {:.4}",
        expected_weighted_loss(&loss, &conf)?
    );
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
