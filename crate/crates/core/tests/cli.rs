use std::path::{Path, PathBuf};
use std::process::Command;

use metricopt::averaging::{micro_utility, AveragingMode, AveragingSpec};
use metricopt::bisection::{bisect_micro, BisectionConfig};
use metricopt::cli::io::{read_class_matrix, read_probabilities};
use metricopt::cli::{
    cmd_eval, cmd_oracle, cmd_postprocess, cmd_synth, EvalArgs, OracleArgs, PostprocessArgs,
    ProbabilitySource, RunReport, SynthArgs,
};
use metricopt::config::MetricConfig;
use metricopt::confusion::sample_confusion;
use metricopt::metrics::MetricSpec;
use metricopt::Error;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn eval_args(labels: &str, preds: &Path, metric: &str) -> EvalArgs {
    EvalArgs {
        labels: fixture(labels),
        preds: preds.to_path_buf(),
        metric: MetricConfig::parse_arg(metric).unwrap(),
        averaging: None,
        seed: 0,
    }
}

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_metricopt"));
    cmd.env_remove("METRICOPT_SEED");
    cmd
}

#[test]
fn eval_perfect_predictions_scores_one() {
    let report = cmd_eval(&eval_args(
        "perfect_labels.csv",
        &fixture("perfect_preds.csv"),
        "ordinal",
    ))
    .unwrap();
    assert_eq!(report.utility, 1.0);
    assert_eq!(report.utilities.micro, Some(1.0));
}

#[test]
fn eval_all_negative_predictions_score_zero_micro_f1() {
    let report = cmd_eval(&eval_args(
        "half_labels.csv",
        &fixture("half_preds.csv"),
        "micro_f1",
    ))
    .unwrap();
    assert_eq!(report.utility, 0.0);
    assert_eq!(report.confusion, vec![vec![vec![0.5, 0.0], vec![0.5, 0.0]]]);
}

#[test]
fn missing_file_is_an_input_error_naming_the_path() {
    let err = cmd_eval(&eval_args(
        "perfect_labels.csv",
        Path::new("/no/such/preds.csv"),
        "ordinal",
    ))
    .unwrap_err();
    assert_eq!(err.exit_code(), 2);

    let out = bin()
        .args([
            "eval",
            "--labels",
            "/no/such/labels.csv",
            "--preds",
            "/no/such/preds.csv",
            "--metric",
            "ordinal",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/labels.csv"));
}

#[test]
fn malformed_rows_report_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("preds.csv");
    std::fs::write(&bad, "y1\n1\n2\nthree\n").unwrap();
    match cmd_eval(&eval_args("perfect_labels.csv", &bad, "ordinal")).unwrap_err() {
        Error::Parse { line, .. } => assert_eq!(line, 4),
        other => panic!("unexpected {other}"),
    }
}

fn postprocess(metric: &str, averaging: Option<AveragingMode>, out: Option<PathBuf>) -> RunReport {
    let mut args = PostprocessArgs::new(
        fixture("toy_labels.csv"),
        ProbabilitySource::File(fixture("toy_probs.csv")),
        MetricConfig::parse_arg(metric).unwrap(),
    );
    args.averaging = averaging;
    args.out = out;
    cmd_postprocess(&args).unwrap()
}

#[test]
fn linear_metrics_skip_bisection() {
    let report = postprocess("weighted_exp:0.5", None, None);
    assert!(report.bisection.is_none());
    let loss = report.loss.unwrap();
    // 1 - diag(exp(-0.5 i)) scaled to [0, 1]: off-diagonal entries are the maximum
    for slice in &loss.slices {
        for (i, row) in slice.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if i != j {
                    assert_eq!(v, 1.0);
                }
            }
        }
        assert_eq!(slice[0][0], 0.0);
        assert!(slice[1][1] > slice[0][0] && slice[2][2] > slice[1][1]);
    }
}

#[test]
fn postprocess_matches_the_library_bit_for_bit() {
    let report = postprocess("micro_f1", None, None);
    let probs = read_probabilities(&fixture("toy_probs.csv")).unwrap();
    let labels = read_class_matrix(&fixture("toy_labels.csv"), probs.n_classes()).unwrap();
    let spec = MetricSpec::micro_f1(3).unwrap();
    let flm = spec.to_fractional_linear().unwrap();
    let (clf, trace) = bisect_micro(&labels, &probs, &flm, &BisectionConfig::new(50)).unwrap();
    let conf = sample_confusion(&labels, &clf.predict(&probs).unwrap()).unwrap();
    let utility = micro_utility(&spec, &conf, &AveragingSpec::micro()).unwrap();
    assert_eq!(report.utility.to_bits(), utility.to_bits());
    assert_eq!(report.bisection.unwrap(), vec![trace]);
}

#[test]
fn fifty_iterations_leave_a_two_to_the_minus_fifty_bracket() {
    let report = postprocess("micro_f1", None, None);
    let traces = report.bisection.unwrap();
    assert_eq!(traces[0].iterations.len(), 50);
    let (lo, hi) = traces[0].final_bracket();
    assert_eq!(hi - lo, 2f64.powi(-50));
    let shared = &report.loss.unwrap().slices;
    assert_eq!(shared[0], shared[1]);
}

#[test]
fn macro_postprocess_runs_one_bisection_per_output() {
    let report = postprocess("micro_f1", Some(AveragingMode::Macro), None);
    assert_eq!(report.bisection.unwrap().len(), 2);
    assert!(report.utilities.macro_.is_some());
}

#[test]
fn written_predictions_reproduce_the_reported_utility() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("preds.csv");
    for (metric, avg) in [
        ("micro_f1", AveragingMode::Micro),
        ("micro_f1", AveragingMode::Macro),
        ("ordinal", AveragingMode::Micro),
    ] {
        let report = postprocess(metric, Some(avg), Some(out.clone()));
        let mut args = eval_args("toy_labels.csv", &out, metric);
        args.averaging = Some(avg);
        let eval = cmd_eval(&args).unwrap();
        assert_eq!(
            eval.utility.to_bits(),
            report.utility.to_bits(),
            "{metric} {avg}"
        );
    }
}

#[test]
fn instance_averaging_and_min_max_are_rejected_for_postprocess() {
    let mut args = PostprocessArgs::new(
        fixture("toy_labels.csv"),
        ProbabilitySource::File(fixture("toy_probs.csv")),
        MetricConfig::named("min_max"),
    );
    let err = cmd_postprocess(&args).unwrap_err();
    assert!(err.to_string().contains("bisection unsupported"), "{err}");
    args.metric = MetricConfig::named("micro_f1");
    args.averaging = Some(AveragingMode::Instance);
    assert!(matches!(
        cmd_postprocess(&args),
        Err(Error::BisectionUnsupported(_))
    ));
}

#[test]
fn feature_source_splits_and_reports_a_baseline() {
    let mut args = PostprocessArgs::new(
        fixture("features_labels.csv"),
        ProbabilitySource::Features(fixture("features.csv")),
        MetricConfig::named("micro_f1"),
    );
    args.seed = 3;
    let a = cmd_postprocess(&args).unwrap();
    let b = cmd_postprocess(&args).unwrap();
    assert_eq!(a.utility, b.utility);
    assert_eq!(a.seed, 3);
    assert!(a.evaluation_utility.is_some() && a.baseline_utility.is_some());
}

#[test]
fn synth_zero_cell_has_unit_ratio() {
    let csv = cmd_synth(&SynthArgs {
        c1s: vec![0.0],
        c2s: vec![0.0],
        n_samples: 500,
        seeds: vec![4],
        ..SynthArgs::default()
    })
    .unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[5], "1");
}

#[test]
fn synth_grid_has_one_row_per_cell_and_is_reproducible() {
    let args = SynthArgs {
        c1s: vec![0.05, 0.2, 0.5],
        c2s: vec![0.0, 0.5, 1.0],
        n_samples: 400,
        seeds: (0..5).collect(),
        ..SynthArgs::default()
    };
    let first = cmd_synth(&args).unwrap();
    assert_eq!(first.lines().count(), 46);
    assert_eq!(first, cmd_synth(&args).unwrap());
    let parallel = cmd_synth(&SynthArgs { workers: 3, ..args }).unwrap();
    assert_eq!(first, parallel);
}

#[test]
fn synth_binary_writes_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let status = bin()
            .args([
                "synth", "--c1", "0.05,0.5", "--c2", "0,1.5", "--n", "300", "--seeds", "1,2",
                "--out",
            ])
            .arg(&path)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(path).unwrap()
    };
    assert_eq!(run("a.csv"), run("b.csv"));
}

fn oracle(labels: &str, metric: &str) -> metricopt::Result<RunReport> {
    cmd_oracle(&OracleArgs {
        labels: fixture(labels),
        probs: None,
        metric: MetricConfig::parse_arg(metric).unwrap(),
        averaging: None,
        seed: 0,
    })
}

#[test]
fn oracle_fixtures() {
    let single = oracle("single_labels.csv", "ordinal").unwrap();
    assert_eq!(single.utility, 1.0);
    assert_eq!(single.predictions.unwrap(), vec![vec![2]]);

    let three = oracle("three_labels.csv", "micro_f1").unwrap();
    assert!((three.utility - 1.0).abs() < 1e-12);
    assert_eq!(three.predictions.unwrap(), vec![vec![1], vec![2], vec![2]]);

    let err = oracle("oversized_labels.csv", "ordinal").unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("43046721"), "{err}");
}

#[test]
fn oracle_binary_guard_exits_with_three() {
    let out = bin()
        .args(["oracle", "--metric", "ordinal", "--labels"])
        .arg(fixture("oversized_labels.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn reports_round_trip_through_json() {
    let report = postprocess("micro_f1", None, None);
    let text = report.to_json().unwrap();
    assert_eq!(RunReport::from_json(&text).unwrap(), report);
    // key order is stable
    let keys: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("  \""))
        .map(|l| l.trim().split('"').nth(1).unwrap())
        .collect();
    assert_eq!(
        &keys[..6],
        [
            "command",
            "config_hash",
            "seed",
            "metric",
            "averaging",
            "utility"
        ]
    );
}

#[test]
fn seed_defaults_from_the_environment() {
    let out = bin()
        .env("METRICOPT_SEED", "41")
        .args(["eval", "--metric", "ordinal", "--labels"])
        .arg(fixture("perfect_labels.csv"))
        .arg("--preds")
        .arg(fixture("perfect_preds.csv"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let report = RunReport::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(report.seed, 41);
}

#[test]
fn train_lr_feeds_postprocess_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let probs = dir.path().join("probs.csv");
    let status = bin()
        .arg("train-lr")
        .arg("--features")
        .arg(fixture("features.csv"))
        .arg("--labels")
        .arg(fixture("features_labels.csv"))
        .arg("--out")
        .arg(&probs)
        .status()
        .unwrap();
    assert!(status.success());
    let preds = dir.path().join("preds.csv");
    let out = bin()
        .args([
            "postprocess",
            "--metric",
            "micro_f1",
            "--iters",
            "20",
            "--labels",
        ])
        .arg(fixture("features_labels.csv"))
        .arg("--probs")
        .arg(&probs)
        .arg("--out")
        .arg(&preds)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = RunReport::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(report.bisection.unwrap()[0].iterations.len(), 20);
    assert_eq!(std::fs::read_to_string(preds).unwrap().lines().count(), 81);
}
