//! Pointwise sparse confidence intervals along fitted curves, next to the
//! limiting law that motivates them.
//!
//! cargo run --release --example sparse_intervals

use sttv::inference::limiting_cdf;
use sttv::simulation::{generate, Scenario};
use sttv::{curves_with_intervals, fit, sparse_ci, wald_ci, FitConfig};

fn main() -> sttv::Result<()> {
    let (alpha, sigma) = (1.0, 0.25);
    println!("single estimates, alpha = {alpha}, sigma = {sigma}");
    for theta_hat in [0.2, 0.9, 1.2, 1.8, 3.0] {
        let s = sparse_ci(theta_hat, alpha, sigma, 0.05)?;
        let w = wald_ci(theta_hat, sigma, 0.05)?;
        println!(
            "  theta_hat = {theta_hat:.1}: sparse [{:.3}, {:.3}] ({:?}), wald [{:.3}, {:.3}], P(zeta <= 0) = {:.3}",
            s.lower,
            s.upper,
            s.case,
            w.lower,
            w.upper,
            limiting_cdf(0.0, theta_hat, alpha, sigma)
        );
    }

    let ds = generate(&Scenario { seed: 5, ..Scenario::default() })?;
    let model = fit(&ds, &FitConfig::default())?;
    let grid: Vec<f64> = (0..7).map(|i| 0.25 + i as f64 * 0.4).collect();
    let curves = curves_with_intervals(&model, &grid, 0.95)?;
    let iv = curves.intervals.as_ref().expect("intervals requested");
    for j in 0..curves.p() {
        println!("\nbeta_{} (alpha = {:.3})", j + 1, model.alphas[j]);
        for (k, t) in grid.iter().enumerate() {
            println!(
                "  t = {t:.2}: beta_hat = {:>7.3}  [{:>7.3}, {:>7.3}]",
                curves.beta_hat[(j, k)],
                iv.lower[(j, k)],
                iv.upper[(j, k)]
            );
        }
    }
    Ok(())
}
