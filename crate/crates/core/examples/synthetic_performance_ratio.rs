// Performance ratio of the metric-weighted rule over argmax on synthetic
// data, for a small grid of class skew and metric skew.

use metricopt::estimators::performance_grid;
use metricopt::prelude::*;

fn run() -> Result<()> {
    let base = SyntheticConfig {
        n_samples: 4_000,
        ..SyntheticConfig::default()
    };
    let c1s = [0.05, 0.5];
    let c2s = [0.0, 0.5, 1.5];
    let rows = performance_grid(&base, &c1s, &c2s, &[0, 1], &LrConfig::default(), 2)?;
    println!(
        "{:>5} {:>5} {:>4} {:>9} {:>9} {:>6}",
        "c1", "c2", "seed", "argmax", "weighted", "pr"
    );
    for r in &rows {
        println!(
            "{:>5} {:>5} {:>4} {:>9.4} {:>9.4} {:>6.3}",
            r.c1, r.c2, r.seed, r.utility_baseline, r.utility_consistent, r.pr
        );
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
