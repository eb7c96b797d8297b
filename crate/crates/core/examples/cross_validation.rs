//! Chooses the number of interior knots by ten-fold cross-validation.
//!
//! cargo run --release --example cross_validation

use sttv::simulation::{generate, Scenario};
use sttv::{cross_validate, FitConfig};

fn main() -> sttv::Result<()> {
    let ds = generate(&Scenario { seed: 3, ..Scenario::default() })?;
    let cv = cross_validate(&ds, &FitConfig::default(), &[3, 5, 9], 10, 1)?;
    for (k, e) in cv.candidates.iter().zip(&cv.cv_error) {
        match e {
            Some(v) => println!("K = {k:>2}: held-out -log PL = {v:.4}"),
            None => println!("K = {k:>2}: failed"),
        }
    }
    println!("chosen K = {}", cv.chosen_k);
    Ok(())
}
