//! Choice of the number of interior knots by R-fold cross-validation of the
//! unpenalized partial likelihood.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::SurvivalDataset;
use crate::error::{Error, Result};
use crate::likelihood::partial_loglik_with_curves;
use crate::optimizer::{fit, FitConfig};
use crate::rng::{derive_seed, CounterRng};

pub const DEFAULT_CANDIDATES: [usize; 6] = [3, 5, 9, 13, 17, 21];
const MAX_ASSIGNMENT_TRIES: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    /// Candidates that were evaluated, ascending.
    pub candidates: Vec<usize>,
    /// Mean held-out negative log partial likelihood; `None` for failed candidates.
    pub cv_error: Vec<Option<f64>>,
    /// `candidates x folds`.
    pub fold_errors: Vec<Vec<Option<f64>>>,
    #[serde(rename = "chosen_K")]
    pub chosen_k: usize,
    pub fold_assignments: Vec<usize>,
    pub folds: usize,
    pub failures: Vec<String>,
}

/// Event-stratified fold labels: events and censored observations are
/// shuffled separately and dealt round-robin, the censored deal continuing
/// where the event deal stopped.
pub fn assign_folds(n: usize, folds: usize, events: &[bool], seed: u64) -> Result<Vec<usize>> {
    if folds < 1 || folds > n {
        return Err(Error::Argument(format!("need 1 <= folds <= n, got folds = {folds}, n = {n}")));
    }
    if events.len() != n {
        return Err(Error::Argument(format!("{} event flags for n = {n}", events.len())));
    }
    let mut rng = CounterRng::new(seed, 0x666f_6c64);
    let mut ev: Vec<usize> = (0..n).filter(|&i| events[i]).collect();
    let mut cens: Vec<usize> = (0..n).filter(|&i| !events[i]).collect();
    rng.shuffle(&mut ev);
    rng.shuffle(&mut cens);
    let mut labels = vec![0; n];
    for (slot, &i) in ev.iter().chain(&cens).enumerate() {
        labels[i] = slot % folds;
    }
    Ok(labels)
}

fn stratified_assignment(ds: &SurvivalDataset, folds: usize, seed: u64) -> Result<Vec<usize>> {
    let events: Vec<bool> = ds.observations().iter().map(|o| o.event).collect();
    for attempt in 0..MAX_ASSIGNMENT_TRIES {
        let labels = assign_folds(ds.n(), folds, &events, derive_seed(seed, attempt))?;
        let mut has_event = vec![false; folds];
        for (i, &f) in labels.iter().enumerate() {
            has_event[f] |= events[i];
        }
        if has_event.iter().all(|&e| e) {
            return Ok(labels);
        }
    }
    Err(Error::Stratification(format!(
        "could not give each of {folds} folds an event after {MAX_ASSIGNMENT_TRIES} assignments ({} events)",
        ds.event_count()
    )))
}

/// Negative held-out log partial likelihood of a model trained without fold `r`.
fn fold_error(ds: &SurvivalDataset, labels: &[usize], r: usize, cfg: &FitConfig) -> Result<f64> {
    let train: Vec<usize> = (0..ds.n()).filter(|&i| labels[i] != r).collect();
    let test: Vec<usize> = (0..ds.n()).filter(|&i| labels[i] == r).collect();
    let model = fit(&ds.subset(&train)?, cfg)?;
    let held_out = ds.subset(&test)?;
    let ll = partial_loglik_with_curves(&held_out, |t| model.beta_at(t))?;
    Ok(-ll)
}

/// Cross-validates `candidates` (duplicates removed) with `folds` folds;
/// other settings come from `cfg`. Ties go to the smallest K.
pub fn cross_validate(
    ds: &SurvivalDataset,
    cfg: &FitConfig,
    candidates: &[usize],
    folds: usize,
    seed: u64,
) -> Result<CvResult> {
    if folds < 2 {
        return Err(Error::Argument(format!("folds must be >= 2, got {folds}")));
    }
    let mut cands = if candidates.is_empty() {
        DEFAULT_CANDIDATES.to_vec()
    } else {
        candidates.to_vec()
    };
    cands.sort_unstable();
    cands.dedup();
    if cands.contains(&0) {
        return Err(Error::Argument("K candidates must be >= 1".into()));
    }
    let labels = stratified_assignment(ds, folds, seed)?;

    let jobs: Vec<(usize, usize)> = (0..cands.len())
        .flat_map(|c| (0..folds).map(move |r| (c, r)))
        .collect();
    let results: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let cfg = FitConfig { k: cands[c], ..cfg.clone() };
            fold_error(ds, &labels, r, &cfg)
        })
        .collect();

    let mut fold_errors = vec![vec![None; folds]; cands.len()];
    let mut failures = Vec::new();
    let mut failed = vec![false; cands.len()];
    for (&(c, r), res) in jobs.iter().zip(results) {
        match res {
            Ok(v) => fold_errors[c][r] = Some(v),
            Err(e) => {
                log::warn!("K = {} failed on fold {r}: {e}", cands[c]);
                failures.push(format!("K={} fold={r}: {e}", cands[c]));
                failed[c] = true;
            }
        }
    }
    let cv_error: Vec<Option<f64>> = fold_errors
        .iter()
        .zip(&failed)
        .map(|(row, &bad)| (!bad).then(|| row.iter().map(|v| v.expect("no failure")).sum::<f64>() / folds as f64))
        .collect();
    let chosen = cv_error
        .iter()
        .enumerate()
        .filter_map(|(c, e)| e.map(|v| (c, v)))
        .fold(None, |best: Option<(usize, f64)>, (c, v)| match best {
            Some((_, bv)) if bv <= v => best,
            _ => Some((c, v)),
        })
        .ok_or_else(|| Error::Argument(format!("every K candidate failed: {}", failures.join("; "))))?;
    Ok(CvResult {
        candidates: cands.clone(),
        cv_error,
        fold_errors,
        chosen_k: cands[chosen.0],
        fold_assignments: labels,
        folds,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Observation;

    #[test]
    fn balanced_folds() {
        let labels = assign_folds(10, 5, &[false; 10], 1).unwrap();
        for f in 0..5 {
            assert_eq!(labels.iter().filter(|&&l| l == f).count(), 2);
        }
        let labels = assign_folds(10, 5, &[true; 10], 1).unwrap();
        for f in 0..5 {
            assert_eq!(labels.iter().filter(|&&l| l == f).count(), 2);
        }
        let events: Vec<bool> = (0..23).map(|i| i % 4 == 0).collect();
        let labels = assign_folds(23, 3, &events, 9).unwrap();
        for f in 0..3 {
            let ev = (0..23).filter(|&i| labels[i] == f && events[i]).count();
            assert!((2..=2).contains(&ev), "fold {f} has {ev} events");
        }
        assert!(assign_folds(3, 4, &[true; 3], 0).is_err());
    }

    #[test]
    fn seeds_change_assignments() {
        let events = vec![true; 40];
        let mut seen: Vec<Vec<usize>> = (0..10).map(|s| assign_folds(40, 4, &events, s).unwrap()).collect();
        seen.sort();
        seen.dedup();
        assert!(seen.len() >= 9);
    }

    #[test]
    fn too_few_events_for_folds() {
        let obs = (0..12)
            .map(|i| Observation::new(1.0 + i as f64, i < 2, vec![i as f64 * 0.1]))
            .collect();
        let ds = SurvivalDataset::new(obs, None).unwrap();
        let err = cross_validate(&ds, &FitConfig::default(), &[3], 5, 0).unwrap_err();
        assert!(matches!(err, Error::Stratification(_)));
    }
}
