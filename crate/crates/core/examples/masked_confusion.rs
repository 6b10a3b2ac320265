// Confusion over a partially observed label matrix, as in rating data
// where each user rates only some items.

use metricopt::prelude::*;

fn run() -> Result<()> {
    // 4 users x 3 items, ratings 1..=5; unobserved cells hold any valid class
    let labels = ClassMatrix::from_one_based(
        &[vec![5, 1, 3], vec![4, 1, 2], vec![1, 5, 5], vec![3, 3, 1]],
        5,
    )?;
    let preds = ClassMatrix::from_one_based(
        &[vec![4, 1, 1], vec![4, 2, 2], vec![1, 4, 1], vec![3, 2, 1]],
        5,
    )?;
    let observed = [(0, 0), (0, 2), (1, 0), (1, 1), (2, 1), (2, 2), (3, 0)];
    let mask = ObservationMask::new(observed, 4, 3)?;
    let conf = masked_confusion(&labels, &preds, &mask)?;
    println!("observed entries: {}", mask.len());
    println!("confusion:\n{conf:.3}");
    println!(
        "ordinal utility {:.4}",
        MetricSpec::ordinal(5)?.evaluate(conf.view())?
    );
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
