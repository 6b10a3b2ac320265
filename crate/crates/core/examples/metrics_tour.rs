// Evaluates every metric family on one confusion matrix, then turns each
// fractional-linear metric into a loss matrix.

use metricopt::prelude::*;
use ndarray::array;

fn run() -> Result<()> {
    // rows = true class, columns = predicted class, entries sum to 1
    let conf = array![[0.30, 0.05, 0.00], [0.05, 0.25, 0.05], [0.00, 0.10, 0.20]];
    let k = 3;
    let specs = [
        MetricSpec::ordinal(k)?,
        MetricSpec::micro_f1(k)?,
        MetricSpec::macro_f1(k)?,
        MetricSpec::weighted_exp(0.5, k)?,
        MetricSpec::new(MetricKind::MinMax, k)?,
        MetricSpec::new(MetricKind::Polynomial { gamma: 2.0 }, k)?,
    ];
    for spec in &specs {
        println!("{:<14} {:.6}", spec.name(), spec.evaluate(conf.view())?);
    }

    let f1 = MetricSpec::micro_f1(k)?.to_fractional_linear()?;
    println!("micro-F1 numerator:\n{}", f1.numerator());
    println!("micro-F1 denominator:\n{}", f1.denominator());
    println!(
        "loss at gamma = 0.5:\n{:.4}",
        loss_from_gamma(&f1, 0.5).values()
    );

    let ordinal = MetricSpec::ordinal(k)?;
    println!(
        "ordinal loss:\n{:.4}",
        loss_from_gradient(&ordinal, conf.view())?.values()
    );
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
