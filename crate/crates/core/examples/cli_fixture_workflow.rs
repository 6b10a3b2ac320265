// The command-line workflow through the library: write data files, train
// logistic regression, post-process for micro-F1, then score the output.

use metricopt::cli::io::{write_class_matrix, write_features};
use metricopt::cli::{
    cmd_eval, cmd_postprocess, cmd_train_lr, EvalArgs, PostprocessArgs, ProbabilitySource,
    TrainLrArgs,
};
use metricopt::prelude::*;

fn run() -> std::result::Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("metricopt-workflow-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let data = generate_synthetic(&SyntheticConfig {
        n_samples: 600,
        n_features: 4,
        n_classes: 4,
        c1: 0.5,
        seed: 3,
        ..SyntheticConfig::default()
    })?;
    let features = dir.join("features.csv");
    let labels = dir.join("labels.csv");
    let probs = dir.join("probs.csv");
    let preds = dir.join("preds.csv");
    write_features(&features, &data.features)?;
    write_class_matrix(&labels, &data.labels)?;

    cmd_train_lr(&TrainLrArgs {
        features: features.clone(),
        labels: labels.clone(),
        lr: LrConfig::default(),
        predict_features: None,
        out: probs.clone(),
    })?;

    let metric = MetricConfig::named("micro_f1");
    let mut args = PostprocessArgs::new(
        labels.clone(),
        ProbabilitySource::File(probs),
        metric.clone(),
    );
    args.out = Some(preds.clone());
    let report = cmd_postprocess(&args)?;
    println!("post-processed utility {:.4}", report.utility);
    println!(
        "argmax baseline        {:.4}",
        report.baseline_utility.unwrap_or(f64::NAN)
    );

    let scored = cmd_eval(&EvalArgs {
        labels,
        preds,
        metric,
        averaging: None,
        seed: 0,
    })?;
    println!("re-scored from file    {:.4}", scored.utility);
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
