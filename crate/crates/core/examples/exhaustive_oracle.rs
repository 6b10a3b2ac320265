// Exhaustive search for the best deterministic predictions on a tiny
// two-output problem, against bisection under macro averaging.

use metricopt::bisection::{bisect_macro_on, evaluate_predictions};
use metricopt::prelude::*;
use ndarray::Array3;

fn run() -> Result<()> {
    let p = [0.15, 0.4, 0.55, 0.8, 0.95];
    let q = [0.7, 0.2, 0.3, 0.1, 0.9];
    let probs = ProbabilityField::new(Array3::from_shape_fn((5, 2, 2), |(i, m, k)| {
        let pos = if m == 0 { p[i] } else { q[i] };
        if k == 1 {
            pos
        } else {
            1.0 - pos
        }
    }))?;
    let labels = ClassMatrix::from_one_based(
        &[vec![1, 2], vec![1, 1], vec![2, 1], vec![2, 1], vec![2, 2]],
        2,
    )?;
    let spec = MetricSpec::micro_f1(2)?;
    let avg = AveragingSpec::macro_();

    let (best, preds) = brute_force_oracle(&labels, Some(&probs), &spec, &avg)?;
    println!("oracle {best:.6} with {:?}", preds.to_one_based());

    let eval = Evaluation::Expected(&probs);
    let flm = spec.to_fractional_linear()?;
    let (clf, _) = bisect_macro_on(eval, &probs, &flm, &BisectionConfig::new(40))?;
    let u = evaluate_predictions(eval, &clf.predict(&probs)?, &spec, &avg)?;
    println!(
        "bisection {u:.6} with {:?}",
        clf.predict(&probs)?.to_one_based()
    );
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
