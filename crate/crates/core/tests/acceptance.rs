//! Acceptance criteria 1-10. Each test writes one `PASS`/`FAIL` line to
//! stderr (uncaptured) and then asserts. Criteria 6 and 7 share one
//! 50-replication study with cross-validated K.

mod common;

use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use sttv::inference::{limiting_cdf, sparse_ci};
use sttv::optimizer::Variant;
use sttv::reporting::{build_summary, coverage_rows, metrics_rows, write_rows};
use sttv::rng::CounterRng;
use sttv::simulation::{
    generate, metric_grid, replicate, score, CovarianceStructure, KSelection, MeanSd, Scenario, StudyConfig,
    StudyResult, TruthCurves, VariantSummary,
};
use sttv::{fit, smooth_threshold, soft_threshold, FitConfig, ThresholdParams};

fn report(id: u32, name: &str, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "acceptance {id:>2} {verdict} {name}: {detail}");
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

#[test]
fn c01_threshold_operator_invariants() {
    let started = Instant::now();
    let mut rng = CounterRng::new(1, 1);
    let mut worst_gap = [0.0_f64; 3];
    let mut violations = 0usize;
    for _ in 0..10_000 {
        let alpha = rng.uniform_range(1e-4, 5.0);
        let (a, b) = (rng.uniform_range(-20.0, 20.0), rng.uniform_range(-20.0, 20.0));
        let (za, zb) = (soft_threshold(a, alpha).unwrap(), soft_threshold(b, alpha).unwrap());
        violations += ((za - zb).abs() > (a - b).abs() + 1e-12) as usize;
        violations += ((za == 0.0) != (a.abs() <= alpha)) as usize;
        violations += (soft_threshold(-a, alpha).unwrap() != -za) as usize;
        for (e, eta) in [1e-2, 1e-3, 1e-4].into_iter().enumerate() {
            let p = ThresholdParams::new(alpha, eta).unwrap();
            worst_gap[e] = worst_gap[e].max((smooth_threshold(a, &p) - za).abs() / eta);
        }
    }
    let secs = started.elapsed().as_secs_f64();
    let pass = violations == 0 && worst_gap.iter().all(|g| *g <= 1.1) && secs < 5.0;
    report(
        1,
        "threshold operator",
        pass,
        format!("{violations} violations, max |h-zeta|/eta = {:.4}/{:.4}/{:.4}, {secs:.2} s", worst_gap[0], worst_gap[1], worst_gap[2]),
    );
}

#[test]
fn c02_derivatives_match_finite_differences() {
    let started = Instant::now();
    let (g, h) = common::derivative_errors(20);
    let secs = started.elapsed().as_secs_f64();
    report(
        2,
        "derivatives",
        g < 1e-5 && h < 1e-4 && secs < 60.0,
        format!("gradient rel err {g:.2e} (< 1e-5), Hessian rel err {h:.2e} (< 1e-4), {secs:.1} s"),
    );
}

#[test]
fn c03_negligible_threshold_matches_oracle() {
    let started = Instant::now();
    let mut worst = 0.0_f64;
    for seed in 0..5 {
        let ds = generate(&Scenario { n: 200, seed: 100 + seed, ..Scenario::default() }).unwrap();
        let cfg = FitConfig { eta: 1e-8, alpha_override: Some(vec![1e-8; 3]), ..FitConfig::default() };
        let model = fit(&ds, &cfg).unwrap();
        let (_, gamma) = common::oracle_spline_cox(&ds, cfg.k, cfg.degree, model.rho());
        for t in metric_grid() {
            let b = model.basis.eval(t).unwrap();
            let ours = model.beta_at(t).unwrap();
            for j in 0..3 {
                let theirs: f64 = b.iter().enumerate().map(|(r, v)| v * gamma[(j, r)]).sum();
                worst = worst.max((ours[j] - theirs).abs());
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    report(3, "oracle equivalence", worst < 1e-3 && secs < 120.0, format!("max curve gap {worst:.2e} (< 1e-3), {secs:.1} s"));
}

#[test]
fn c04_limiting_distribution() {
    let started = Instant::now();
    let draws = 1_000_000;
    let mut worst = 0.0_f64;
    for (s, (tt, alpha, sigma)) in [(0.3, 1.0, 0.5), (1.5, 1.0, 0.4), (-0.8, 0.5, 1.0)].into_iter().enumerate() {
        let mut rng = CounterRng::new(4, s as u64);
        let mut sample: Vec<f64> = (0..draws)
            .map(|_| soft_threshold(tt + sigma * rng.standard_normal(), alpha).unwrap())
            .collect();
        sample.sort_by(f64::total_cmp);
        let ecdf = |x: f64| sample.partition_point(|v| *v <= x) as f64 / draws as f64;
        let below_zero = sample.partition_point(|v| *v < 0.0) as f64 / draws as f64;
        for q in [0.05, 0.35, 0.65, 0.95] {
            let x = sample[(q * draws as f64) as usize];
            worst = worst.max((ecdf(x) - limiting_cdf(x, tt, alpha, sigma)).abs());
        }
        worst = worst.max((ecdf(0.0) - limiting_cdf(0.0, tt, alpha, sigma)).abs());
        worst = worst.max((below_zero - limiting_cdf(-1e-300, tt, alpha, sigma)).abs());
    }
    let secs = started.elapsed().as_secs_f64();
    report(4, "limiting distribution", worst < 0.005 && secs < 30.0, format!("max CDF error {worst:.4} (< 0.005), {secs:.1} s"));
}

#[test]
fn c05_sparse_interval_coverage() {
    let started = Instant::now();
    let draws = 100_000;
    let alpha = 1.0;
    let mut cells = Vec::new();
    let mut pass = true;
    for sigma in [0.1, 0.25] {
        for tt in [0.0, 0.5 * alpha, 2.0 * alpha, 4.0 * alpha] {
            let beta = soft_threshold(tt, alpha).unwrap();
            let mut rng = CounterRng::new(5, (sigma * 1e3) as u64 * 100 + (tt * 10.0) as u64);
            let covered = (0..draws)
                .filter(|_| sparse_ci(tt + sigma * rng.standard_normal(), alpha, sigma, 0.05).unwrap().contains(beta))
                .count();
            let cov = covered as f64 / draws as f64;
            let deep = tt.abs() < alpha;
            let ok = (cov - 0.95).abs() <= 0.01 || (deep && cov > 0.95);
            pass &= ok;
            cells.push(format!("s={sigma} t={tt}: {cov:.4}{}", if deep { "*" } else { "" }));
        }
    }
    let secs = started.elapsed().as_secs_f64();
    report(5, "sparse CI coverage", pass && secs < 60.0, format!("{} (* inside the dead zone), {secs:.1} s", cells.join(", ")));
}

fn reference_study() -> &'static StudyResult {
    static STUDY: OnceLock<StudyResult> = OnceLock::new();
    STUDY.get_or_init(|| {
        let study = StudyConfig {
            scenario: Scenario { covariance: CovarianceStructure::Ind, n: 500, ..Scenario::default() },
            reps: 50,
            ..StudyConfig::default()
        };
        replicate(&study, 0, false).expect("study runs")
    })
}

fn summary(result: &StudyResult, v: Variant) -> &VariantSummary {
    result.summaries.iter().find(|s| s.variant == v).expect("variant ran")
}

fn fmt_ms(m: &Option<MeanSd>) -> String {
    m.as_ref().map(|m| format!("{:.3} ({:.3})", m.mean, m.sd)).unwrap_or_else(|| "n/a".into())
}

#[test]
fn c06_scaled_integrated_error() {
    let started = Instant::now();
    let result = reference_study();
    let (s, r) = (summary(result, Variant::Sttv), summary(result, Variant::Regtv));
    let (sa, ra) = (s.aise_x100.as_ref().unwrap(), r.aise_x100.as_ref().unwrap());
    let pass = (29.0..=117.0).contains(&sa.mean) && sa.mean <= 1.15 * ra.mean && s.failures == 0;
    report(
        6,
        "scaled integrated error",
        pass,
        format!(
            "STTV AISEx100 {:.1} (sd {:.1}) in [29, 117], RegTV {:.1} (sd {:.1}), ratio {:.3} (<= 1.15), failures {}/{}, censoring {:.3}, {:.0} s",
            sa.mean, sa.sd, ra.mean, ra.sd, sa.mean / ra.mean, s.failures, r.failures, result.mean_censoring_rate,
            started.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn c07_scaled_zero_region_detection() {
    let result = reference_study();
    let s = summary(result, Variant::Sttv);
    let mean = |m: &Option<MeanSd>| m.as_ref().map(|m| m.mean).unwrap_or(f64::NAN);
    let (etpr, etnr, itnr) = (mean(&s.etpr[0]), mean(&s.etnr[0]), mean(&s.itnr[0]));
    let pass = (0.80..=1.0).contains(&etpr) && (0.15..=0.75).contains(&etnr) && (0.80..=1.0).contains(&itnr);
    report(
        7,
        "scaled zero-region detection",
        pass,
        format!(
            "beta1 ETPR {} in [0.80, 1], ETNR {} in [0.15, 0.75], ITNR {} in [0.80, 1]",
            fmt_ms(&s.etpr[0]),
            fmt_ms(&s.etnr[0]),
            fmt_ms(&s.itnr[0])
        ),
    );
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

#[test]
fn c08_consistency_trend() {
    let started = Instant::now();
    let cfg = FitConfig { k: 5, ..FitConfig::default() };
    let ise = |n: usize, seed: u64| -> f64 {
        let ds = generate(&Scenario { n, seed, ..Scenario::default() }).unwrap();
        let model = fit(&ds, &cfg).unwrap();
        score(&model.estimate_curves(&metric_grid()).unwrap(), &TruthCurves::Benchmark).unwrap().ise[0]
    };
    let small: Vec<f64> = (0..20).map(|s| ise(500, 800 + s)).collect();
    let large: Vec<f64> = (0..20).map(|s| ise(2000, 800 + s)).collect();
    let (ms, ml) = (median(small), median(large));
    report(
        8,
        "consistency trend",
        ml < ms,
        format!("median ISE(beta1)x100 n=500 {:.1}, n=2000 {:.1}, {:.0} s", 100.0 * ms, 100.0 * ml, started.elapsed().as_secs_f64()),
    );
}

#[test]
fn c09_simulation_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_sttv"))
            .args(["simulate", "--output", out.to_str().unwrap(), "--reps", "3", "--n", "200", "--K", "3", "--seed", "99", "--jobs", "2"])
            .status()
            .unwrap();
        assert!(status.success());
        (std::fs::read(out.join("metrics.csv")).unwrap(), std::fs::read(out.join("coverage.csv")).unwrap())
    };
    let (a, b) = (run("a"), run("b"));
    report(
        9,
        "determinism",
        a == b && !a.0.is_empty(),
        format!("metrics.csv {} bytes, coverage.csv {} bytes, identical = {}", a.0.len(), a.1.len(), a == b),
    );
}

#[test]
fn c10_full_design_driver_schema() {
    let driver = include_str!("../examples/full_reproduction.rs");
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for covariance in [CovarianceStructure::Ind, CovarianceStructure::Ar1, CovarianceStructure::Cs] {
        let study = StudyConfig {
            scenario: Scenario { covariance, n: 150, ..Scenario::default() },
            reps: 1,
            k_selection: KSelection::Fixed { k: 3 },
            ..StudyConfig::default()
        };
        let result = replicate(&study, 1, false).unwrap();
        let path = dir.path().join(format!("{}_metrics.csv", covariance.name()));
        write_rows(&metrics_rows(&result), std::fs::File::create(&path).unwrap()).unwrap();
        write_rows(&coverage_rows(&result), std::io::sink()).unwrap();
        files.push(path);
    }
    let summary = build_summary(&files).unwrap();
    let pass = summary.cells.len() == 6 && driver.contains("build_summary") && driver.contains("reps = args");
    report(10, "full design driver", pass, format!("{} summary cells from 3 covariance structures; driver is an offline example", summary.cells.len()));
}
