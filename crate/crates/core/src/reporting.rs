//! Study tables from raw replication files.
//!
//! Two raw schemas are produced by `simulate` and read back here:
//!
//! * metrics CSV, one row per replication and variant: `rep, seed,
//!   covariance, n, variant, K, grid_points, censoring_rate, ise_1..ise_3,
//!   aise, etpr_1..3, etnr_1..3, itpr_1..3, itnr_1..3` (empty cells for
//!   undefined ratios);
//! * coverage CSV, long format: `rep, covariance, n, variant, coefficient,
//!   grid_index, t, covered`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulation::{MeanSd, RepOutcome, StudyResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub rep: usize,
    pub seed: u64,
    pub covariance: String,
    pub n: usize,
    pub variant: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub grid_points: usize,
    pub censoring_rate: f64,
    pub ise_1: f64,
    pub ise_2: f64,
    pub ise_3: f64,
    pub aise: f64,
    pub etpr_1: Option<f64>,
    pub etpr_2: Option<f64>,
    pub etpr_3: Option<f64>,
    pub etnr_1: Option<f64>,
    pub etnr_2: Option<f64>,
    pub etnr_3: Option<f64>,
    pub itpr_1: Option<f64>,
    pub itpr_2: Option<f64>,
    pub itpr_3: Option<f64>,
    pub itnr_1: Option<f64>,
    pub itnr_2: Option<f64>,
    pub itnr_3: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub rep: usize,
    pub covariance: String,
    pub n: usize,
    pub variant: String,
    pub coefficient: usize,
    pub grid_index: usize,
    pub t: f64,
    pub covered: u8,
}

fn metrics_row(o: &RepOutcome, covariance: &str, n: usize) -> Option<MetricsRow> {
    let r = o.report.as_ref()?;
    Some(MetricsRow {
        rep: o.rep,
        seed: o.seed,
        covariance: covariance.to_string(),
        n,
        variant: o.variant.name().to_string(),
        k: o.k?,
        grid_points: r.grid.len(),
        censoring_rate: o.censoring_rate,
        ise_1: r.ise[0],
        ise_2: r.ise[1],
        ise_3: r.ise[2],
        aise: r.aise,
        etpr_1: r.etpr[0],
        etpr_2: r.etpr[1],
        etpr_3: r.etpr[2],
        etnr_1: r.etnr[0],
        etnr_2: r.etnr[1],
        etnr_3: r.etnr[2],
        itpr_1: r.itpr[0],
        itpr_2: r.itpr[1],
        itpr_3: r.itpr[2],
        itnr_1: r.itnr[0],
        itnr_2: r.itnr[1],
        itnr_3: r.itnr[2],
    })
}

/// Metrics rows of the successful replications, in replication order.
pub fn metrics_rows(study: &StudyResult) -> Vec<MetricsRow> {
    let cov = study.config.scenario.covariance.name();
    let n = study.config.scenario.n;
    study.outcomes.iter().filter_map(|o| metrics_row(o, cov, n)).collect()
}

pub fn coverage_rows(study: &StudyResult) -> Vec<CoverageRow> {
    let cov = study.config.scenario.covariance.name();
    let n = study.config.scenario.n;
    let mut rows = Vec::new();
    for o in &study.outcomes {
        let Some(c) = o.report.as_ref().and_then(|r| r.coverage.as_ref()) else {
            continue;
        };
        for (j, row) in c.iter().enumerate() {
            for (g, &covered) in row.iter().enumerate() {
                rows.push(CoverageRow {
                    rep: o.rep,
                    covariance: cov.to_string(),
                    n,
                    variant: o.variant.name().to_string(),
                    coefficient: j + 1,
                    grid_index: g,
                    t: study.grid[g],
                    covered: covered as u8,
                });
            }
        }
    }
    rows
}

pub fn write_rows<T: Serialize, W: std::io::Write>(rows: &[T], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize().enumerate() {
        rows.push(rec.map_err(|e| Error::validation(Some(i + 1), format!("{}: {e}", path.display())))?);
    }
    Ok(rows)
}

/// Aggregates for one `(covariance, n, variant)` cell. ISE and AISE are
/// multiplied by 100; ratios are raw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub covariance: String,
    pub n: usize,
    pub variant: String,
    pub reps: usize,
    pub ise_x100: [Option<MeanSd>; 3],
    pub aise_x100: Option<MeanSd>,
    pub etpr: [Option<MeanSd>; 3],
    pub etnr: [Option<MeanSd>; 3],
    pub itpr: [Option<MeanSd>; 3],
    pub itnr: [Option<MeanSd>; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub grid_points: usize,
    pub cells: Vec<SummaryCell>,
}

type CellKey = (String, usize, String);

fn summarize_rows(rows: &[MetricsRow]) -> Result<StudySummary> {
    let Some(first) = rows.first() else {
        return Err(Error::validation(None, "no metrics rows to summarize"));
    };
    if let Some(r) = rows.iter().find(|r| r.grid_points != first.grid_points) {
        return Err(Error::validation(
            None,
            format!("mixed metric grids: {} and {} points", first.grid_points, r.grid_points),
        ));
    }
    let mut groups: BTreeMap<CellKey, Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.covariance.clone(), r.n, r.variant.clone()))
            .or_default()
            .push(r);
    }
    let cells = groups
        .into_iter()
        .map(|((covariance, n, variant), mut rs)| {
            rs.sort_by_key(|r| r.rep);
            let stat = |f: &dyn Fn(&MetricsRow) -> Option<f64>| {
                MeanSd::of(&rs.iter().filter_map(|r| f(r)).collect::<Vec<_>>())
            };
            let x100 = |f: &dyn Fn(&MetricsRow) -> f64| MeanSd::of(&rs.iter().map(|r| f(r)).collect::<Vec<_>>()).map(|m| m.scaled(100.0));
            SummaryCell {
                covariance,
                n,
                variant,
                reps: rs.len(),
                ise_x100: [x100(&|r| r.ise_1), x100(&|r| r.ise_2), x100(&|r| r.ise_3)],
                aise_x100: x100(&|r| r.aise),
                etpr: [stat(&|r| r.etpr_1), stat(&|r| r.etpr_2), stat(&|r| r.etpr_3)],
                etnr: [stat(&|r| r.etnr_1), stat(&|r| r.etnr_2), stat(&|r| r.etnr_3)],
                itpr: [stat(&|r| r.itpr_1), stat(&|r| r.itpr_2), stat(&|r| r.itpr_3)],
                itnr: [stat(&|r| r.itnr_1), stat(&|r| r.itnr_2), stat(&|r| r.itnr_3)],
            }
        })
        .collect();
    Ok(StudySummary {
        grid_points: first.grid_points,
        cells,
    })
}

/// Grouped means and standard deviations over one or more metrics CSVs.
pub fn build_summary<P: AsRef<Path>>(paths: &[P]) -> Result<StudySummary> {
    let mut rows = Vec::new();
    for p in paths {
        rows.extend(read_rows::<MetricsRow>(p.as_ref())?);
    }
    summarize_rows(&rows)
}

pub fn summary_from_rows(rows: &[MetricsRow]) -> Result<StudySummary> {
    summarize_rows(rows)
}

fn cell(m: &Option<MeanSd>, digits: usize, single: &mut bool) -> String {
    match m {
        Some(m) => {
            *single |= m.count == 1;
            let mark = if m.count == 1 { "*" } else { "" };
            format!("{:.digits$} ({:.digits$}{mark})", m.mean, m.sd)
        }
        None => "-".into(),
    }
}

impl StudySummary {
    /// Two markdown tables: estimation errors (x100) and zero-region ratios.
    pub fn to_markdown(&self) -> String {
        let mut single = false;
        let mut out = String::new();
        out.push_str("| Covariance | n | Model | reps | ISE(b1) | ISE(b2) | ISE(b3) | AISE |\n");
        out.push_str("|---|---|---|---|---|---|---|---|\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} | {} | {} |",
                c.covariance,
                c.n,
                c.variant.to_uppercase(),
                c.reps,
                cell(&c.ise_x100[0], 1, &mut single),
                cell(&c.ise_x100[1], 1, &mut single),
                cell(&c.ise_x100[2], 1, &mut single),
                cell(&c.aise_x100, 1, &mut single),
            );
        }
        out.push_str("\nISE and AISE are multiplied by 100; mean (sd).\n\n");
        out.push_str("| Covariance | n | Model | beta | ETPR | ETNR | ITPR | ITNR |\n");
        out.push_str("|---|---|---|---|---|---|---|---|\n");
        for c in &self.cells {
            for j in 0..3 {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | b{} | {} | {} | {} | {} |",
                    c.covariance,
                    c.n,
                    c.variant.to_uppercase(),
                    j + 1,
                    cell(&c.etpr[j], 2, &mut single),
                    cell(&c.etnr[j], 2, &mut single),
                    cell(&c.itpr[j], 2, &mut single),
                    cell(&c.itnr[j], 2, &mut single),
                );
            }
        }
        if single {
            out.push_str("\n\\* single replication: standard deviation reported as 0.\n");
        }
        out
    }

    /// Long CSV: one row per cell, metric and coefficient.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["covariance", "n", "variant", "metric", "coefficient", "reps", "mean", "sd"])?;
        for c in &self.cells {
            let mut emit = |metric: &str, coef: &str, m: &Option<MeanSd>| -> Result<()> {
                if let Some(m) = m {
                    w.write_record([
                        c.covariance.as_str(),
                        &c.n.to_string(),
                        c.variant.as_str(),
                        metric,
                        coef,
                        &m.count.to_string(),
                        &m.mean.to_string(),
                        &m.sd.to_string(),
                    ])?;
                }
                Ok(())
            };
            for j in 0..3 {
                let coef = (j + 1).to_string();
                emit("ise_x100", &coef, &c.ise_x100[j])?;
                emit("etpr", &coef, &c.etpr[j])?;
                emit("etnr", &coef, &c.etnr[j])?;
                emit("itpr", &coef, &c.itpr[j])?;
                emit("itnr", &coef, &c.itnr[j])?;
            }
            emit("aise_x100", "", &c.aise_x100)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveragePoint {
    pub covariance: String,
    pub n: usize,
    pub variant: String,
    pub coefficient: usize,
    pub grid_index: usize,
    pub t: f64,
    pub reps: usize,
    pub coverage: f64,
}

/// Share of replications whose interval covers the truth at each grid point.
pub fn coverage_profile<P: AsRef<Path>>(paths: &[P]) -> Result<Vec<CoveragePoint>> {
    let mut rows = Vec::new();
    for p in paths {
        rows.extend(read_rows::<CoverageRow>(p.as_ref())?);
    }
    coverage_from_rows(&rows)
}

pub fn coverage_from_rows(rows: &[CoverageRow]) -> Result<Vec<CoveragePoint>> {
    if rows.is_empty() {
        return Err(Error::validation(None, "no coverage rows"));
    }
    let mut grid: BTreeMap<usize, f64> = BTreeMap::new();
    let mut acc: BTreeMap<(String, usize, String, usize, usize), (usize, usize)> = BTreeMap::new();
    for r in rows {
        if r.covered > 1 {
            return Err(Error::validation(None, format!("covered must be 0 or 1, got {}", r.covered)));
        }
        match grid.get(&r.grid_index) {
            Some(&t) if (t - r.t).abs() > 1e-12 * t.abs().max(1.0) => {
                return Err(Error::validation(
                    None,
                    format!("mixed grids: index {} at t = {t} and t = {}", r.grid_index, r.t),
                ));
            }
            Some(_) => {}
            None => {
                grid.insert(r.grid_index, r.t);
            }
        }
        let e = acc
            .entry((r.covariance.clone(), r.n, r.variant.clone(), r.coefficient, r.grid_index))
            .or_default();
        e.0 += 1;
        e.1 += r.covered as usize;
    }
    Ok(acc
        .into_iter()
        .map(|((covariance, n, variant, coefficient, grid_index), (reps, hits))| CoveragePoint {
            covariance,
            n,
            variant,
            coefficient,
            grid_index,
            t: grid[&grid_index],
            reps,
            coverage: hits as f64 / reps as f64,
        })
        .collect())
}
