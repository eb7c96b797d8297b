//! The soft-thresholding operator, its arctan surrogate and derivatives.
//!
//! cargo run --example threshold_operator

use sttv::threshold::{smooth_threshold_d1, smooth_threshold_d2};
use sttv::{smooth_threshold, soft_threshold, ThresholdParams};

fn main() -> sttv::Result<()> {
    let alpha = 0.5;
    println!("{:>6} {:>9} {:>9} {:>9} {:>9}", "theta", "zeta", "h(eta)", "h'", "h''");
    for eta in [1e-1, 1e-3] {
        let p = ThresholdParams::new(alpha, eta)?;
        println!("eta = {eta}");
        for i in -8..=8 {
            let theta = i as f64 * 0.125;
            println!(
                "{theta:>6.3} {:>9.5} {:>9.5} {:>9.4} {:>9.3}",
                soft_threshold(theta, alpha)?,
                smooth_threshold(theta, &p),
                smooth_threshold_d1(theta, &p)?,
                smooth_threshold_d2(theta, &p)?,
            );
        }
    }
    Ok(())
}
