// Bisection search for the micro-F1 optimal threshold on a small binary
// problem, compared with a dense grid over gamma.

use metricopt::prelude::*;
use ndarray::Array3;

fn run() -> Result<()> {
    let positive = [0.1, 0.2, 0.35, 0.6, 0.7, 0.8, 0.9, 0.55];
    let labels = ClassMatrix::from_one_based(
        &[1, 1, 1, 2, 2, 2, 2, 1]
            .iter()
            .map(|&c| vec![c])
            .collect::<Vec<_>>(),
        2,
    )?;
    let probs = ProbabilityField::new(Array3::from_shape_fn((8, 1, 2), |(i, _, k)| {
        if k == 1 {
            positive[i]
        } else {
            1.0 - positive[i]
        }
    }))?;
    let flm = MetricSpec::micro_f1(2)?.to_fractional_linear()?;

    let (clf, trace) = bisect_micro(&labels, &probs, &flm, &BisectionConfig::new(30))?;
    for rec in trace.iterations.iter().take(8) {
        println!(
            "t={:>2} gamma={:.5} utility={:.5} {}",
            rec.iteration,
            rec.gamma,
            rec.utility,
            if rec.accepted { "accept" } else { "reject" }
        );
    }
    println!("final utility {:.6}", trace.final_utility);
    println!("loss:\n{:.4}", clf.loss().slice(0).values());
    println!("predictions {:?}", clf.predict(&probs)?.to_one_based());

    let (grid, gamma) = gamma_grid_oracle(Evaluation::Labels(&labels), &probs, &flm, 10_001)?;
    println!("grid best {grid:.6} at gamma {gamma:.4}");
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
