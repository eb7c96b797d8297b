//! Scans the baseline hazard and reports the censoring rate of the default
//! simulation design, bisecting towards a target rate.
//!
//! cargo run --release --example calibrate_baseline -- 0.12

use sttv::simulation::{censoring_rate, generate, CovarianceStructure, Scenario};

fn rate(lambda0: f64, covariance: CovarianceStructure, n: usize) -> f64 {
    let sc = Scenario {
        baseline_hazard: lambda0,
        covariance,
        n,
        seed: 99,
        ..Scenario::default()
    };
    censoring_rate(&generate(&sc).expect("valid scenario"))
}

fn main() {
    let target: f64 = std::env::args().nth(1).map(|s| s.parse().expect("target rate")).unwrap_or(0.12);
    let n = 50_000;
    for lambda0 in [0.25, 0.5, 0.99, 1.5, 2.0, 3.0] {
        println!("lambda0 = {lambda0:<5} censoring = {:.4}", rate(lambda0, CovarianceStructure::Ind, n));
    }
    let (mut lo, mut hi) = (0.01_f64, 10.0_f64);
    for _ in 0..30 {
        let mid = (lo * hi).sqrt();
        if rate(mid, CovarianceStructure::Ind, n) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda0 = 0.5 * (lo + hi);
    println!("calibrated lambda0 = {lambda0:.3} for target {target}");
    for cov in [CovarianceStructure::Ind, CovarianceStructure::Ar1, CovarianceStructure::Cs] {
        println!("  {:<3} censoring = {:.4}", cov.name(), rate(lambda0, cov, n));
    }
}
