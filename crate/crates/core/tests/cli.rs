use std::path::Path;
use std::process::{Command, Output};

use sttv::simulation::synthetic_cohort;

fn sttv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sttv")).args(args).output().expect("binary runs")
}

fn cohort_csv(dir: &Path) -> String {
    let path = dir.join("cohort.csv");
    synthetic_cohort(250, 4).unwrap().write_csv(std::fs::File::create(&path).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn records(path: &Path) -> (csv::StringRecord, Vec<csv::StringRecord>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let h = rdr.headers().unwrap().clone();
    (h, rdr.records().map(|r| r.unwrap()).collect())
}

#[test]
fn fit_writes_curves_on_default_grid() {
    let dir = tempfile::tempdir().unwrap();
    let input = cohort_csv(dir.path());
    let out = dir.path().join("fit");
    let o = sttv(&["fit", "--input", &input, "--event-col", "event", "--output", out.to_str().unwrap(), "--K", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("manifest.json").exists() && out.join("model.json").exists());
    let (h, rows) = records(&out.join("curves.csv"));
    assert_eq!(
        h.iter().collect::<Vec<_>>(),
        ["covariate", "t", "theta_hat", "beta_hat", "sigma_hat", "ci_lower", "ci_upper", "is_zero"]
    );
    assert_eq!(rows.len(), 6 * 200);
    let model: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("model.json")).unwrap()).unwrap();
    assert_eq!(model["variant"], "sttv");
    assert_eq!(model["K"], 3);
}

#[test]
fn unthresholded_variant_never_flags_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let input = cohort_csv(dir.path());
    let out = dir.path().join("fit");
    let o = sttv(&[
        "fit", "--input", &input, "--event-col", "event", "--output", out.to_str().unwrap(),
        "--variant", "regtv", "--K", "3", "--grid-points", "50",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = records(&out.join("curves.csv"));
    assert_eq!(rows.len(), 6 * 50);
    assert!(rows.iter().all(|r| &r[7] == "false"));
}

#[test]
fn standardized_constant_fit_matches_raw() {
    let dir = tempfile::tempdir().unwrap();
    let input = cohort_csv(dir.path());
    let run = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec!["fit", "--input", &input, "--event-col", "event", "--output", out.to_str().unwrap(), "--variant", "coxph", "--grid-points", "3"];
        args.extend(extra);
        assert!(sttv(&args).status.success());
        records(&out.join("curves.csv")).1
    };
    let (raw, std) = (run("raw", &[]), run("std", &["--standardize"]));
    for (a, b) in raw.iter().zip(&std) {
        let (x, y): (f64, f64) = (a[3].parse().unwrap(), b[3].parse().unwrap());
        assert!((x - y).abs() < 1e-6 * x.abs().max(1.0), "{x} vs {y}");
    }
}

#[test]
fn cv_is_deterministic_and_rejects_empty_candidates() {
    let dir = tempfile::tempdir().unwrap();
    let input = cohort_csv(dir.path());
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = sttv(&[
            "cv", "--input", &input, "--event-col", "event", "--output", out.to_str().unwrap(),
            "--candidates", "3,5", "--folds", "3", "--seed", "8", "--variant", "regtv",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out.join("cv.json")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
    let out = dir.path().join("c");
    let o = sttv(&["cv", "--input", &input, "--event-col", "event", "--output", out.to_str().unwrap(), "--candidates", ""]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "argument");
}

#[test]
fn missing_column_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = cohort_csv(dir.path());
    let out = dir.path().join("x");
    let o = sttv(&["fit", "--input", &input, "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("status"));
}

#[test]
fn simulate_then_score_reproduces_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let o = sttv(&["simulate", "--output", out.to_str().unwrap(), "--reps", "1", "--n", "200", "--K", "3", "--seed", "5", "--dump-curves"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = records(&out.join("metrics.csv"));
    let aise_col = h.iter().position(|c| c == "aise").unwrap();
    let row = rows.iter().find(|r| &r[4] == "sttv").unwrap();
    let sc = dir.path().join("score");
    let o = sttv(&["score", "--input", out.join("curves/rep0000_sttv.csv").to_str().unwrap(), "--output", sc.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(sc.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(report["aise"].as_f64().unwrap(), row[aise_col].parse::<f64>().unwrap());
}

#[test]
fn scoring_the_truth_gives_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("truth.csv");
    let mut w = csv::Writer::from_path(&path).unwrap();
    w.write_record(["covariate", "t", "beta_hat", "ci_lower", "ci_upper"]).unwrap();
    for j in 0..3 {
        for t in sttv::simulation::metric_grid() {
            let b = sttv::simulation::true_beta(j, t);
            w.write_record([format!("Z{}", j + 1), t.to_string(), b.to_string(), b.to_string(), b.to_string()]).unwrap();
        }
    }
    w.flush().unwrap();
    let out = dir.path().join("score");
    let o = sttv(&["score", "--input", path.to_str().unwrap(), "--output", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(report["aise"].as_f64().unwrap(), 0.0);
    assert_eq!(report["etpr"][0].as_f64().unwrap(), 1.0);
    assert_eq!(report["etnr"][0].as_f64().unwrap(), 1.0);
}

#[test]
fn score_names_the_missing_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "covariate,t,beta_hat\nZ1,0,1\n").unwrap();
    let out = dir.path().join("score");
    let o = sttv(&["score", "--input", path.to_str().unwrap(), "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ci_lower"));
}
