//! Offline driver for the full design: every covariance structure and
//! sample size, 200 replications each, K chosen by cross-validation. Takes
//! hours; writes one metrics/coverage CSV pair per cell plus a combined
//! summary in the reporting schema.
//!
//! cargo run --release --example full_reproduction -- out_dir [reps]

use std::path::PathBuf;

use sttv::reporting::{build_summary, coverage_rows, metrics_rows, write_rows};
use sttv::simulation::{replicate, CovarianceStructure, Scenario, StudyConfig};

fn main() -> sttv::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "full_reproduction".into()));
    let reps = args.next().map(|s| s.parse().expect("reps")).unwrap_or(200);
    std::fs::create_dir_all(&out)?;
    let mut metric_files = Vec::new();
    for covariance in [CovarianceStructure::Ind, CovarianceStructure::Ar1, CovarianceStructure::Cs] {
        for n in [300, 500, 1000] {
            let study = StudyConfig {
                scenario: Scenario { covariance, n, ..Scenario::default() },
                reps,
                ..StudyConfig::default()
            };
            let started = std::time::Instant::now();
            let result = replicate(&study, 0, false)?;
            let stem = format!("{}_n{n}", covariance.name());
            let metrics = out.join(format!("{stem}_metrics.csv"));
            write_rows(&metrics_rows(&result), std::fs::File::create(&metrics)?)?;
            write_rows(&coverage_rows(&result), std::fs::File::create(out.join(format!("{stem}_coverage.csv")))?)?;
            println!("{stem}: {:.0} s", started.elapsed().as_secs_f64());
            metric_files.push(metrics);
        }
    }
    let summary = build_summary(&metric_files)?;
    std::fs::write(out.join("summary.md"), summary.to_markdown())?;
    std::fs::write(out.join("summary.csv"), summary.to_csv()?)?;
    print!("{}", summary.to_markdown());
    Ok(())
}
