//! Right-censored survival data: validation, CSV ingest, time ordering and
//! risk sets.
//!
//! Risk sets follow the usual Cox convention `{l : T_l >= T_i}`, so every
//! subject is in its own risk set and tied times share one set (Breslow).

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub time: f64,
    /// `true` for an observed failure, `false` for censoring.
    pub event: bool,
    pub covariates: Vec<f64>,
}

impl Observation {
    pub fn new(time: f64, event: bool, covariates: Vec<f64>) -> Self {
        Self {
            time,
            event,
            covariates,
        }
    }
}

/// Immutable, validated survival dataset.
///
/// Observations are kept in input order; `sort_index` lists them by
/// ascending time (stable, so ties keep input order).
#[derive(Debug, Clone)]
pub struct SurvivalDataset {
    observations: Vec<Observation>,
    p: usize,
    tau: f64,
    sort_index: Vec<usize>,
    /// Position of each observation inside `sort_index`.
    rank: Vec<usize>,
    /// For each sorted position, the first sorted position of its tie group.
    tie_start: Vec<usize>,
    covariate_names: Option<Vec<String>>,
}

impl SurvivalDataset {
    /// Validates and indexes `observations`.
    ///
    /// When `tau` is given, observations with time beyond it are stored as
    /// censored at `tau`; otherwise `tau` is the largest observed time.
    pub fn new(mut observations: Vec<Observation>, tau: Option<f64>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::validation(None, "dataset has no observations"));
        }
        let p = observations[0].covariates.len();
        for (i, obs) in observations.iter().enumerate() {
            if !obs.time.is_finite() || obs.time < 0.0 {
                return Err(Error::validation(
                    Some(i + 1),
                    format!("time must be finite and nonnegative, got {}", obs.time),
                ));
            }
            if obs.covariates.len() != p {
                return Err(Error::validation(
                    Some(i + 1),
                    format!("expected {p} covariates, got {}", obs.covariates.len()),
                ));
            }
            if let Some(j) = obs.covariates.iter().position(|z| !z.is_finite()) {
                return Err(Error::validation(
                    Some(i + 1),
                    format!("covariate {j} is not finite"),
                ));
            }
        }

        let tau = match tau {
            Some(tau) => {
                if !(tau.is_finite() && tau > 0.0) {
                    return Err(Error::Argument(format!("tau must be positive, got {tau}")));
                }
                for obs in &mut observations {
                    if obs.time > tau {
                        obs.time = tau;
                        obs.event = false;
                    }
                }
                tau
            }
            None => observations.iter().map(|o| o.time).fold(0.0, f64::max),
        };
        if tau <= 0.0 {
            return Err(Error::validation(None, "all observed times are zero; tau must be positive"));
        }

        let mut sort_index: Vec<usize> = (0..observations.len()).collect();
        sort_index.sort_by(|&a, &b| observations[a].time.total_cmp(&observations[b].time));
        let mut rank = vec![0; observations.len()];
        for (pos, &i) in sort_index.iter().enumerate() {
            rank[i] = pos;
        }
        let mut tie_start = vec![0; observations.len()];
        for pos in 1..sort_index.len() {
            let same = observations[sort_index[pos]].time == observations[sort_index[pos - 1]].time;
            tie_start[pos] = if same { tie_start[pos - 1] } else { pos };
        }

        Ok(Self {
            observations,
            p,
            tau,
            sort_index,
            rank,
            tie_start,
            covariate_names: None,
        })
    }

    pub fn with_covariate_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p {
            return Err(Error::Argument(format!(
                "{} covariate names for {} covariates",
                names.len(),
                self.p
            )));
        }
        self.covariate_names = Some(names);
        Ok(self)
    }

    /// Reads a header-bearing CSV file.
    pub fn load_csv(
        path: impl AsRef<Path>,
        time_col: &str,
        event_col: &str,
        covariate_cols: &[String],
        tau: Option<f64>,
    ) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::from_csv_reader(file, time_col, event_col, covariate_cols, tau)
    }

    pub fn from_csv_reader<R: Read>(
        reader: R,
        time_col: &str,
        event_col: &str,
        covariate_cols: &[String],
        tau: Option<f64>,
    ) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let find = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
        };
        let time_idx = find(time_col)?;
        let event_idx = find(event_col)?;
        let cov_idx = covariate_cols
            .iter()
            .map(|c| find(c))
            .collect::<Result<Vec<_>>>()?;

        let mut observations = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let row = r + 1;
            let record = record?;
            let cell = |idx: usize, name: &str| -> Result<f64> {
                let raw = record.get(idx).unwrap_or("");
                raw.parse::<f64>().map_err(|_| {
                    Error::validation(Some(row), format!("column '{name}': '{raw}' is not numeric"))
                })
            };
            let time = cell(time_idx, time_col)?;
            if time < 0.0 {
                return Err(Error::validation(Some(row), format!("negative time {time}")));
            }
            let event = match cell(event_idx, event_col)? {
                e if e == 0.0 => false,
                e if e == 1.0 => true,
                e => {
                    return Err(Error::validation(
                        Some(row),
                        format!("event value {e} not in {{0,1}}"),
                    ))
                }
            };
            let covariates = cov_idx
                .iter()
                .zip(covariate_cols)
                .map(|(&idx, name)| cell(idx, name))
                .collect::<Result<Vec<_>>>()?;
            observations.push(Observation::new(time, event, covariates));
        }
        let ds = Self::new(observations, tau)?.with_covariate_names(covariate_cols.to_vec())?;
        if ds.event_count() == 0 {
            return Err(Error::validation(None, "no events at or before tau"));
        }
        Ok(ds)
    }

    /// Writes the dataset in input order with columns `time,event,<covariates>`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time".to_string(), "event".to_string()];
        header.extend(self.names());
        w.write_record(&header)?;
        for obs in &self.observations {
            let mut rec = vec![obs.time.to_string(), u8::from(obs.event).to_string()];
            rec.extend(obs.covariates.iter().map(|z| z.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Indices `{l : T_l >= T_i}` in input numbering, ordered by time.
    pub fn risk_set(&self, i: usize) -> Result<Vec<usize>> {
        if i >= self.n() {
            return Err(Error::Argument(format!("index {i} out of bounds for n = {}", self.n())));
        }
        let start = self.tie_start[self.rank[i]];
        Ok(self.sort_index[start..].to_vec())
    }

    pub fn n(&self) -> usize {
        self.observations.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn sort_index(&self) -> &[usize] {
        &self.sort_index
    }

    /// First sorted position of the tie group containing sorted position `pos`.
    pub fn tie_start(&self, pos: usize) -> usize {
        self.tie_start[pos]
    }

    /// Observations in ascending time order.
    pub fn sorted(&self) -> impl Iterator<Item = &Observation> + '_ {
        self.sort_index.iter().map(move |&i| &self.observations[i])
    }

    pub fn event_count(&self) -> usize {
        self.observations.iter().filter(|o| o.event).count()
    }

    pub fn covariate_names(&self) -> Option<&[String]> {
        self.covariate_names.as_deref()
    }

    /// Covariate names, falling back to `Z1..Zp`.
    pub fn names(&self) -> Vec<String> {
        match &self.covariate_names {
            Some(n) => n.clone(),
            None => (1..=self.p).map(|j| format!("Z{j}")).collect(),
        }
    }

    /// Sub-dataset of the given input indices, keeping this dataset's `tau`.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let obs = indices
            .iter()
            .map(|&i| {
                self.observations
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::Argument(format!("index {i} out of bounds")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut ds = Self::new(obs, Some(self.tau))?;
        ds.covariate_names = self.covariate_names.clone();
        Ok(ds)
    }

    /// Centers and scales every covariate column, returning the transform so
    /// estimates can be mapped back to the original scale.
    pub fn standardize(&self) -> (Self, Standardization) {
        let n = self.n() as f64;
        let mut means = vec![0.0; self.p];
        let mut scales = vec![1.0; self.p];
        for j in 0..self.p {
            let mean = self.observations.iter().map(|o| o.covariates[j]).sum::<f64>() / n;
            let var = self
                .observations
                .iter()
                .map(|o| (o.covariates[j] - mean).powi(2))
                .sum::<f64>()
                / (n - 1.0).max(1.0);
            means[j] = mean;
            if var > 0.0 {
                scales[j] = var.sqrt();
            }
        }
        let mut ds = self.clone();
        for obs in &mut ds.observations {
            for j in 0..self.p {
                obs.covariates[j] = (obs.covariates[j] - means[j]) / scales[j];
            }
        }
        (ds, Standardization { means, scales })
    }
}

/// Per-column centering and scaling applied by [`SurvivalDataset::standardize`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardization {
    /// Maps a coefficient-scale quantity for covariate `j` back to the
    /// original covariate units. Centering cancels in the partial likelihood.
    pub fn to_original(&self, j: usize, value: f64) -> f64 {
        value / self.scales[j]
    }
}
