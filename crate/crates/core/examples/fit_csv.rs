//! Writes a synthetic six-covariate cohort to CSV, reads it back and fits
//! both the sparse and the unthresholded time-varying model.
//!
//! cargo run --release --example fit_csv

use sttv::simulation::synthetic_cohort;
use sttv::{fit, FitConfig, SurvivalDataset, Variant};

fn main() -> sttv::Result<()> {
    let dir = std::env::temp_dir().join("sttv_fit_csv");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("cohort.csv");
    synthetic_cohort(600, 11)?.write_csv(std::fs::File::create(&path)?)?;
    println!("wrote {}", path.display());

    let names: Vec<String> = ["age", "stage", "treatment", "biomarker", "smoker", "noise"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let ds = SurvivalDataset::load_csv(&path, "time", "event", &names, Some(5.0))?;
    println!("n = {}, events = {}", ds.n(), ds.event_count());

    let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.5).collect();
    for variant in [Variant::Sttv, Variant::Regtv] {
        let cfg = FitConfig { k: 5, variant, ..FitConfig::default() };
        let model = fit(&ds, &cfg)?;
        println!(
            "\n{}: {} iterations, converged = {}, log-lik = {:.3}",
            variant.name(),
            model.iterations,
            model.converged,
            model.objective()
        );
        let curves = model.estimate_curves(&grid)?;
        print!("{:>10}", "t");
        for t in &grid {
            print!("{t:>7.1}");
        }
        println!();
        for (j, name) in names.iter().enumerate() {
            print!("{name:>10}");
            for k in 0..grid.len() {
                print!("{:>7.3}", curves.beta_hat[(j, k)]);
            }
            println!();
        }
    }
    Ok(())
}
