//! Scenario sets and the reshaping operations shared by all validators.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `S` scenarios of `T` samples each, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    values: Vec<f64>,
    n_scenarios: usize,
    scenario_len: usize,
    dt: f64,
    label: String,
}

impl ScenarioSet {
    /// Builds a set from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], dt: f64) -> Result<Self> {
        let scenario_len = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut values = Vec::with_capacity(rows.len() * scenario_len);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != scenario_len {
                return Err(Error::InvalidInput(format!(
                    "scenario {i} has {} samples, expected {scenario_len}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(values, scenario_len, dt)
    }

    /// Builds a set from a row-major buffer of `S * scenario_len` samples.
    pub fn from_flat(values: Vec<f64>, scenario_len: usize, dt: f64) -> Result<Self> {
        if scenario_len < 2 {
            return Err(Error::InvalidInput(format!(
                "scenarios need at least 2 time steps, got {scenario_len}"
            )));
        }
        if values.is_empty() || !values.len().is_multiple_of(scenario_len) {
            return Err(Error::InvalidInput(format!(
                "{} samples do not form whole scenarios of length {scenario_len}",
                values.len()
            )));
        }
        check_dt(dt)?;
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at scenario {}, step {}",
                pos / scenario_len,
                pos % scenario_len
            )));
        }
        Ok(Self {
            n_scenarios: values.len() / scenario_len,
            values,
            scenario_len,
            dt,
            label: String::new(),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn n_scenarios(&self) -> usize {
        self.n_scenarios
    }

    pub fn scenario_len(&self) -> usize {
        self.scenario_len
    }

    /// Sampling interval in hours.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn scenario(&self, index: usize) -> &[f64] {
        let start = index * self.scenario_len;
        &self.values[start..start + self.scenario_len]
    }

    pub fn scenarios(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.scenario_len)
    }

    /// Row-major view of every sample.
    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    /// Applies `f` to every sample, keeping shape, `dt` and label.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = self.values.iter().map(|&v| f(v)).collect();
        Ok(Self::from_flat(values, self.scenario_len, self.dt)?.with_label(self.label.clone()))
    }

    /// Joins all scenarios, in stored order, into one series.
    pub fn concatenate(&self) -> TimeSeries {
        TimeSeries {
            values: self.values.clone(),
            dt: self.dt,
            scenario_len: self.scenario_len,
        }
    }

    /// Every sample of every scenario, for densities over all time steps.
    pub fn flatten_timesteps(&self) -> SampleCollection {
        SampleCollection {
            values: self.values.clone(),
            provenance: Provenance::AllTimesteps,
        }
    }

    /// One sample per scenario: the scenario mean.
    pub fn daily_means(&self) -> SampleCollection {
        let t = self.scenario_len as f64;
        SampleCollection {
            values: self
                .scenarios()
                .map(|row| row.iter().sum::<f64>() / t)
                .collect(),
            provenance: Provenance::DailyMeans,
        }
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt.is_finite() && dt > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "sampling interval must be positive, got {dt}"
        )))
    }
}

/// A single series, usually the concatenation of a scenario set.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    dt: f64,
    /// Length of the scenarios this series was built from, 0 if none.
    scenario_len: usize,
}

impl TimeSeries {
    /// A free-standing series with no scenario structure.
    pub fn new(values: Vec<f64>, dt: f64) -> Result<Self> {
        Self::with_scenario_len(values, dt, 0)
    }

    pub fn with_scenario_len(values: Vec<f64>, dt: f64, scenario_len: usize) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "series needs at least 2 samples, got {}",
                values.len()
            )));
        }
        check_dt(dt)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("series contains non-finite values".into()));
        }
        if scenario_len == 1 || (scenario_len > 0 && !values.len().is_multiple_of(scenario_len)) {
            return Err(Error::InvalidInput(format!(
                "{} samples are not a whole number of scenarios of length {scenario_len}",
                values.len()
            )));
        }
        Ok(Self {
            values,
            dt,
            scenario_len,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn scenario_len(&self) -> usize {
        self.scenario_len
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Cuts the series back into scenarios of the given length, dropping any
    /// incomplete tail. Returns the set and the number of truncated samples.
    pub fn into_scenarios(self, scenario_len: usize) -> Result<(ScenarioSet, usize)> {
        if scenario_len > self.values.len() {
            return Err(Error::InvalidInput(format!(
                "scenario length {scenario_len} exceeds series length {}",
                self.values.len()
            )));
        }
        let mut values = self.values;
        let keep = values.len() - values.len() % scenario_len;
        let truncated = values.len() - keep;
        values.truncate(keep);
        Ok((ScenarioSet::from_flat(values, scenario_len, self.dt)?, truncated))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    AllTimesteps,
    DailyMeans,
}

/// Samples for a density estimate, without temporal order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCollection {
    values: Vec<f64>,
    provenance: Provenance,
}

impl SampleCollection {
    pub fn new(values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("sample collection is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("samples must be finite".into()));
        }
        Ok(Self { values, provenance })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }
}
