use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use metricopt::averaging::AveragingMode;
use metricopt::cli::{
    cmd_eval, cmd_oracle, cmd_postprocess, cmd_synth, cmd_train_lr, EvalArgs, OracleArgs,
    PostprocessArgs, ProbabilitySource, SynthArgs, TrainLrArgs, SEED_ENV,
};
use metricopt::config::MetricConfig;
use metricopt::estimators::LrConfig;
use metricopt::{Error, Result};

#[derive(Parser)]
#[command(
    name = "metricopt",
    version,
    about = "Metric-optimal post-processing of class probabilities"
)]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, env = SEED_ENV, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score predictions against labels.
    Eval {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        preds: PathBuf,
        /// JSON document, path to one, or a shorthand like `weighted_exp:0.5`.
        #[arg(long)]
        metric: String,
        #[arg(long)]
        averaging: Option<AveragingMode>,
    },
    /// Turn probability estimates into metric-optimal predictions.
    Postprocess {
        #[arg(long)]
        labels: PathBuf,
        #[arg(
            long,
            conflicts_with = "features",
            required_unless_present = "features"
        )]
        probs: Option<PathBuf>,
        /// Fit logistic regression on half the rows instead of reading --probs.
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        metric: String,
        #[arg(long)]
        averaging: Option<AveragingMode>,
        #[arg(long, default_value_t = 50)]
        iters: usize,
        /// Use kappa * N iterations instead of --iters.
        #[arg(long)]
        kappa: Option<usize>,
        /// Where to write the predictions CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Performance-ratio grid on synthetic data (CSV).
    Synth {
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.2,0.5")]
        c1: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,1.5")]
        c2: Vec<f64>,
        #[arg(long, default_value_t = 20_000)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        features: usize,
        #[arg(long, default_value_t = 10)]
        classes: usize,
        /// Comma-separated seeds; defaults to five seeds starting at --seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive search for the best predictions on a small instance.
    Oracle {
        #[arg(long)]
        labels: PathBuf,
        /// Score expected confusions under these probabilities.
        #[arg(long)]
        probs: Option<PathBuf>,
        #[arg(long)]
        metric: String,
        #[arg(long)]
        averaging: Option<AveragingMode>,
    },
    /// Fit multinomial logistic regression and write probabilities.
    TrainLr {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Predict for these features instead of the training features.
        #[arg(long)]
        predict: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-4)]
        l2: f64,
        #[arg(long, default_value_t = 500)]
        iterations: usize,
        #[arg(long, default_value_t = 0.1)]
        step: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Eval {
            labels,
            preds,
            metric,
            averaging,
        } => {
            let report = cmd_eval(&EvalArgs {
                labels,
                preds,
                metric: MetricConfig::parse_arg(&metric)?,
                averaging,
                seed,
            })?;
            emit(&format!("{}\n", report.to_json()?));
        }
        Command::Postprocess {
            labels,
            probs,
            features,
            metric,
            averaging,
            iters,
            kappa,
            out,
        } => {
            let source = match (probs, features) {
                (Some(p), _) => ProbabilitySource::File(p),
                (None, Some(f)) => ProbabilitySource::Features(f),
                (None, None) => return Err(Error::Config("need --probs or --features".into())),
            };
            let mut args = PostprocessArgs::new(labels, source, MetricConfig::parse_arg(&metric)?);
            args.averaging = averaging;
            args.iterations = iters;
            args.kappa = kappa;
            args.seed = seed;
            args.out = out;
            emit(&format!("{}\n", cmd_postprocess(&args)?.to_json()?));
        }
        Command::Synth {
            c1,
            c2,
            n,
            features,
            classes,
            seeds,
            workers,
            out,
        } => {
            let seeds = if seeds.is_empty() {
                (seed..seed + 5).collect()
            } else {
                seeds
            };
            let csv = cmd_synth(&SynthArgs {
                c1s: c1,
                c2s: c2,
                n_samples: n,
                n_features: features,
                n_classes: classes,
                seeds,
                workers,
                out: out.clone(),
            })?;
            if out.is_none() {
                emit(&csv);
            }
        }
        Command::Oracle {
            labels,
            probs,
            metric,
            averaging,
        } => {
            let report = cmd_oracle(&OracleArgs {
                labels,
                probs,
                metric: MetricConfig::parse_arg(&metric)?,
                averaging,
                seed,
            })?;
            emit(&format!("{}\n", report.to_json()?));
        }
        Command::TrainLr {
            features,
            labels,
            predict,
            l2,
            iterations,
            step,
            out,
        } => {
            cmd_train_lr(&TrainLrArgs {
                features,
                labels,
                lr: LrConfig {
                    step,
                    iterations,
                    l2,
                },
                predict_features: predict,
                out,
            })?;
        }
    }
    Ok(())
}

/// Writes to stdout, treating a closed pipe as a normal end of output.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    if let Err(e) = out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            eprintln!("error: {e}");
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
