// Micro, macro and instance averaging of one multioutput prediction.

use metricopt::confusion::per_sample_confusions;
use metricopt::prelude::*;

fn run() -> Result<()> {
    let labels = ClassMatrix::from_one_based(
        &[
            vec![1, 2],
            vec![2, 2],
            vec![2, 1],
            vec![1, 1],
            vec![2, 2],
            vec![1, 2],
        ],
        2,
    )?;
    let preds = ClassMatrix::from_one_based(
        &[
            vec![1, 2],
            vec![2, 1],
            vec![2, 1],
            vec![1, 2],
            vec![1, 2],
            vec![1, 2],
        ],
        2,
    )?;
    let conf = sample_confusion(&labels, &preds)?;
    let per_sample = per_sample_confusions(&labels, &preds)?;

    for spec in [MetricSpec::ordinal(2)?, MetricSpec::micro_f1(2)?] {
        let micro = micro_utility(&spec, &conf, &AveragingSpec::micro())?;
        let macro_ = macro_utility(&spec, &conf, &AveragingSpec::macro_())?;
        let instance = instance_utility(&spec, &per_sample, &AveragingSpec::instance())?;
        println!(
            "{:<10} micro {micro:.4}  macro {macro_:.4}  instance {instance:.4}",
            spec.name()
        );
    }

    // weights put three times as much mass on the first output
    let weighted = AveragingSpec::micro().with_weights(vec![0.75, 0.25]);
    let pooled = micro_confusion(&conf, &weighted.weights(2)?)?;
    println!("weighted pooled confusion:\n{pooled:.4}");
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
