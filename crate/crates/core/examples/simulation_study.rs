//! A small simulation study comparing the sparse and unthresholded
//! estimators, summarized in the same tables the CLI writes.
//!
//! cargo run --release --example simulation_study -- 20

use sttv::reporting::{metrics_rows, summary_from_rows};
use sttv::simulation::{replicate, KSelection, StudyConfig};

fn main() -> sttv::Result<()> {
    let reps = std::env::args().nth(1).map(|s| s.parse().expect("reps")).unwrap_or(10);
    let study = StudyConfig {
        reps,
        k_selection: KSelection::Fixed { k: 3 },
        ..StudyConfig::default()
    };
    let result = replicate(&study, 0, false)?;
    println!("mean censoring rate {:.3}\n", result.mean_censoring_rate);
    print!("{}", summary_from_rows(&metrics_rows(&result))?.to_markdown());
    Ok(())
}
