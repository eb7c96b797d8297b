mod common;

use sttv::simulation::{generate, Scenario};
use sttv::{fit, FitConfig, Observation, SurvivalDataset, Variant};

/// Largest absolute difference between the fitted curves and the oracle
/// curves on a 61-point grid over `[0, tau]`.
fn max_curve_gap(ds: &SurvivalDataset, cfg: &FitConfig) -> f64 {
    let model = fit(ds, cfg).unwrap();
    let (_, gamma) = common::oracle_spline_cox(ds, cfg.k, cfg.degree, model.rho());
    let basis = &model.basis;
    let mut worst = 0.0_f64;
    for g in 0..=60 {
        let t = ds.tau() * g as f64 / 60.0;
        let b = basis.eval(t).unwrap();
        let ours = model.beta_at(t).unwrap();
        for j in 0..ds.p() {
            let theirs: f64 = (0..b.len()).map(|r| b[r] * gamma[(j, r)]).sum();
            worst = worst.max((ours[j] - theirs).abs());
        }
    }
    worst
}

#[test]
fn unthresholded_fit_matches_oracle() {
    for seed in 0..3 {
        let ds = common::random_dataset(seed, 40, 2);
        let cfg = FitConfig { k: 2, variant: Variant::Regtv, rho: Some(0.01), ..FitConfig::default() };
        let gap = max_curve_gap(&ds, &cfg);
        assert!(gap < 1e-6, "seed {seed}: gap {gap:e}");
    }
}

#[test]
fn negligible_threshold_matches_oracle() {
    let ds = generate(&Scenario { n: 200, seed: 9, ..Scenario::default() }).unwrap();
    let cfg = FitConfig {
        k: 3,
        eta: 1e-8,
        alpha_override: Some(vec![1e-8; 3]),
        ..FitConfig::default()
    };
    let gap = max_curve_gap(&ds, &cfg);
    assert!(gap < 1e-3, "gap {gap:e}");
}

#[test]
fn input_order_does_not_matter() {
    let ds = common::random_dataset(5, 30, 2);
    let mut obs: Vec<Observation> = ds.observations().to_vec();
    obs.reverse();
    obs.rotate_left(7);
    let shuffled = SurvivalDataset::new(obs, Some(ds.tau())).unwrap();
    let cfg = FitConfig { k: 2, ..FitConfig::default() };
    let (a, b) = (fit(&ds, &cfg).unwrap(), fit(&shuffled, &cfg).unwrap());
    assert!((a.objective() - b.objective()).abs() < 1e-9 * a.objective().abs().max(1.0));
    for t in [0.1, 1.0, 2.5] {
        let (x, y) = (a.beta_at(t).unwrap(), b.beta_at(t).unwrap());
        for j in 0..2 {
            assert!((x[j] - y[j]).abs() < 1e-6, "t = {t}: {} vs {}", x[j], y[j]);
        }
    }
}
