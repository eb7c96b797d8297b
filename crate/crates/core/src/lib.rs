//! Cox regression with sparse time-varying coefficients.
//!
//! Each effect is `beta_j(t) = zeta(B(t)' gamma_j, alpha_j)`: a cubic
//! B-spline passed through soft thresholding, so that an effect can be
//! exactly zero over whole stretches of follow-up. Estimation maximizes a
//! ridge-penalized partial likelihood in which `zeta` is replaced by a smooth
//! arctan surrogate. Pointwise sandwich standard errors feed sparse
//! confidence intervals that can collapse onto zero.
//!
//! ```no_run
//! use sttv::{fit, FitConfig, SurvivalDataset};
//!
//! let ds = SurvivalDataset::load_csv("cohort.csv", "time", "status", &[], None)?;
//! let model = fit(&ds, &FitConfig::default())?;
//! let curves = sttv::curves_with_intervals(&model, &[0.5, 1.0, 1.5], 0.95)?;
//! println!("{}", curves.beta_hat);
//! # Ok::<(), sttv::Error>(())
//! ```

pub mod cli;
pub mod coxph;
pub mod dataset;
pub mod error;
pub mod inference;
pub mod likelihood;
mod linalg;
pub mod model_selection;
pub mod optimizer;
pub mod reporting;
pub mod rng;
pub mod simulation;
pub mod splines;
pub mod threshold;

pub use coxph::{fit_coxph, CoxFit};
pub use dataset::{Observation, SurvivalDataset};
pub use error::{Error, Result};
pub use inference::{curves_with_intervals, sparse_ci, wald_ci, CurveEstimate};

pub use model_selection::{cross_validate, CvResult};
pub use optimizer::{fit, FitConfig, FittedModel, Variant};
pub use splines::SplineBasis;
pub use threshold::{smooth_threshold, soft_threshold, ThresholdParams};
