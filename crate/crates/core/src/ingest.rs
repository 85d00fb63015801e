//! CSV loading, cleaning of faulty scenarios and preprocessing scalings.
//!
//! Input files hold one scenario per line, comma separated, with an optional
//! header row. Empty cells and `nan` (any case) mark missing values.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, ScenarioSet};

/// Scenarios as read from disk. Missing cells are stored as NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct RawScenarioSet {
    rows: Vec<Vec<f64>>,
    dt: f64,
    label: String,
}

impl RawScenarioSet {
    pub fn new(rows: Vec<Vec<f64>>, dt: f64) -> Result<Self> {
        let width = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || width < 2 {
            return Err(Error::InvalidInput(
                "need at least one scenario with two or more time steps".into(),
            ));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != width) {
            return Err(Error::InvalidInput(format!(
                "scenario {i} has {} samples, expected {width}",
                rows[i].len()
            )));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidInput(format!(
                "sampling interval must be positive, got {dt}"
            )));
        }
        Ok(Self {
            rows,
            dt,
            label: String::new(),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn n_scenarios(&self) -> usize {
        self.rows.len()
    }

    pub fn scenario_len(&self) -> usize {
        self.rows[0].len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Indices of scenarios that contain at least one missing value.
    pub fn missing_rows(&self) -> Vec<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.iter().any(|v| v.is_nan()))
            .map(|(i, _)| i)
            .collect()
    }
}

impl From<ScenarioSet> for RawScenarioSet {
    fn from(set: ScenarioSet) -> Self {
        Self {
            rows: set.scenarios().map(<[f64]>::to_vec).collect(),
            dt: set.dt(),
            label: set.label().to_owned(),
        }
    }
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("nan")
}

fn parse_cell(cell: &str) -> Option<f64> {
    if is_missing(cell) {
        Some(f64::NAN)
    } else {
        cell.parse().ok()
    }
}

/// Reads a wide-format scenario file: one scenario per line.
///
/// A first row that contains any non-numeric cell is treated as a header.
pub fn load_scenario_csv(path: impl AsRef<Path>, dt: f64) -> Result<RawScenarioSet> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(read_scenarios(file, path, dt)?.with_label(label))
}

/// Same as [`load_scenario_csv`] for an already opened reader.
pub fn read_scenarios(reader: impl std::io::Read, path: &Path, dt: f64) -> Result<RawScenarioSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|source| Error::Csv {
            path: path.to_owned(),
            source,
        })?;
        let row_no = line + 1;
        let parsed: Vec<Option<f64>> = record.iter().map(parse_cell).collect();
        if line == 0 && parsed.iter().any(Option::is_none) {
            // header
            width = Some(record.len());
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRow {
                path: path.to_owned(),
                row: row_no,
                found: record.len(),
                expected,
            });
        }
        let mut row = Vec::with_capacity(expected);
        for (col, (cell, value)) in record.iter().zip(parsed).enumerate() {
            row.push(value.ok_or_else(|| Error::Parse {
                path: path.to_owned(),
                row: row_no,
                column: col + 1,
                cell: cell.to_owned(),
            })?);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    RawScenarioSet::new(rows, dt)
}

/// Rules for discarding faulty scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleaningPolicy {
    pub drop_if_missing: bool,
    pub plausible_min: Option<f64>,
    pub plausible_max: Option<f64>,
}

impl Default for CleaningPolicy {
    fn default() -> Self {
        Self {
            drop_if_missing: true,
            plausible_min: None,
            plausible_max: None,
        }
    }
}

impl CleaningPolicy {
    pub fn validate(&self) -> Result<()> {
        if let (Some(lo), Some(hi)) = (self.plausible_min, self.plausible_max) {
            if !(lo < hi) {
                return Err(Error::InvalidConfig(format!(
                    "plausible_min ({lo}) must be below plausible_max ({hi})"
                )));
            }
        }
        Ok(())
    }

    fn accepts(&self, row: &[f64]) -> bool {
        row.iter().all(|&v| {
            v.is_finite()
                && self.plausible_min.is_none_or(|lo| v >= lo)
                && self.plausible_max.is_none_or(|hi| v <= hi)
        })
    }
}

/// Drops scenarios with missing, non-finite or implausible values.
///
/// Returns the cleaned set and the number of scenarios removed. When
/// `drop_if_missing` is off, a missing value is an error instead.
pub fn clean_scenarios(
    raw: &RawScenarioSet,
    policy: &CleaningPolicy,
) -> Result<(ScenarioSet, usize)> {
    policy.validate()?;
    if !policy.drop_if_missing {
        if let Some(&i) = raw.missing_rows().first() {
            return Err(Error::InvalidInput(format!(
                "scenario {i} has missing values and dropping is disabled"
            )));
        }
    }
    let kept: Vec<&[f64]> = raw
        .rows
        .iter()
        .map(Vec::as_slice)
        .filter(|r| policy.accepts(r))
        .collect();
    let dropped = raw.rows.len() - kept.len();
    if kept.is_empty() {
        return Err(Error::EmptySet { dropped });
    }
    let set = ScenarioSet::from_rows(&kept, raw.dt)?.with_label(raw.label.clone());
    Ok((set, dropped))
}

/// Divides generation by installed capacity.
///
/// `capacity` has either one entry per time step of a scenario (shared by
/// all scenarios) or one entry per sample of the whole set.
pub fn capacity_factor_scale(set: &ScenarioSet, capacity: &[f64]) -> Result<ScenarioSet> {
    if let Some(c) = capacity.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "capacity must be strictly positive, found {c}"
        )));
    }
    let t = set.scenario_len();
    let flat = set.as_flat();
    let values: Vec<f64> = if capacity.len() == t {
        flat.iter()
            .enumerate()
            .map(|(i, v)| v / capacity[i % t])
            .collect()
    } else if capacity.len() == flat.len() {
        flat.iter().zip(capacity).map(|(v, c)| v / c).collect()
    } else {
        return Err(Error::InvalidInput(format!(
            "capacity has {} entries, expected {t} or {}",
            capacity.len(),
            flat.len()
        )));
    };
    Ok(ScenarioSet::from_flat(values, t, set.dt())?.with_label(set.label()))
}

/// Parameters of a global min/max affine map, kept for inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    pub source_min: f64,
    pub source_max: f64,
    pub target_lo: f64,
    pub target_hi: f64,
}

impl AffineParams {
    pub fn forward(&self, x: f64) -> f64 {
        self.target_lo
            + (x - self.source_min) * (self.target_hi - self.target_lo)
                / (self.source_max - self.source_min)
    }

    pub fn inverse(&self, y: f64) -> f64 {
        self.source_min
            + (y - self.target_lo) * (self.source_max - self.source_min)
                / (self.target_hi - self.target_lo)
    }

    pub fn invert(&self, set: &ScenarioSet) -> Result<ScenarioSet> {
        set.map(|y| self.inverse(y))
    }
}

/// Maps the global minimum of the set to `target_lo` and the global maximum
/// to `target_hi`, e.g. `[-1, 1]` or `[0, 1]` before model training.
pub fn affine_rescale(
    set: &ScenarioSet,
    target_lo: f64,
    target_hi: f64,
) -> Result<(ScenarioSet, AffineParams)> {
    if !(target_lo < target_hi) || !target_lo.is_finite() || !target_hi.is_finite() {
        return Err(Error::InvalidInput(format!(
            "invalid target range [{target_lo}, {target_hi}]"
        )));
    }
    let (lo, hi) = set
        .as_flat()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if !(hi > lo) {
        return Err(Error::Degenerate(
            "cannot rescale a set whose values are all equal".into(),
        ));
    }
    let params = AffineParams {
        source_min: lo,
        source_max: hi,
        target_lo,
        target_hi,
    };
    Ok((set.map(|x| params.forward(x))?, params))
}

/// A preprocessing step applied after cleaning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scaling {
    CapacityFactor { capacity: Vec<f64> },
    AffineToRange { target_lo: f64, target_hi: f64 },
}

impl Scaling {
    pub fn apply(&self, set: &ScenarioSet) -> Result<ScenarioSet> {
        match self {
            Scaling::CapacityFactor { capacity } => capacity_factor_scale(set, capacity),
            Scaling::AffineToRange {
                target_lo,
                target_hi,
            } => affine_rescale(set, *target_lo, *target_hi).map(|(s, _)| s),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn read(text: &str) -> Result<RawScenarioSet> {
        read_scenarios(text.as_bytes(), Path::new("mem.csv"), 0.25)
    }

    #[test]
    fn parses_plain_rows() {
        let raw = read("1.0,2.0\n3.0,4.0").unwrap();
        assert_eq!(raw.rows(), &[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(raw.dt(), 0.25);
    }

    #[test]
    fn skips_header_and_accepts_crlf() {
        let raw = read("t0,t1\r\n0.5,0.25\r\n").unwrap();
        assert_eq!(raw.rows(), &[vec![0.5, 0.25]]);
    }

    #[test]
    fn missing_markers() {
        let raw = read("1.0,,3.0\n1,NaN,2\n1,nan,2\n4,5,6").unwrap();
        assert_eq!(raw.missing_rows(), vec![0, 1, 2]);
    }

    #[test]
    fn ragged_and_bad_cells_are_named() {
        match read("1,2\n3,4,5") {
            Err(Error::RaggedRow {
                row: 2,
                found: 3,
                expected: 2,
                ..
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match read("1,2\n3,x") {
            Err(Error::Parse {
                row: 2, column: 2, ..
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(read("a,b\n").is_err());
    }

    #[test]
    fn loads_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pv.csv");
        std::fs::write(&path, "1.0,2.0\n3.0,4.0\n").unwrap();
        let raw = load_scenario_csv(&path, 0.25).unwrap();
        assert_eq!(raw.n_scenarios(), 2);
        let (set, dropped) = clean_scenarios(&raw, &CleaningPolicy::default()).unwrap();
        assert_eq!(dropped, 0);
        assert_eq!(set.label(), "pv");
        assert!(matches!(
            load_scenario_csv(dir.path().join("missing.csv"), 0.25),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn cleaning_rules() {
        let raw = read("1,2,3\n1,,3\n4,5,6").unwrap();
        let (set, dropped) = clean_scenarios(&raw, &CleaningPolicy::default()).unwrap();
        assert_eq!(dropped, 1);
        assert_eq!(set.n_scenarios(), 2);

        let raw = read("0.1,0.2\n0.3,1.7").unwrap();
        let policy = CleaningPolicy {
            plausible_min: Some(0.0),
            plausible_max: Some(1.0),
            ..Default::default()
        };
        let (set, dropped) = clean_scenarios(&raw, &policy).unwrap();
        assert_eq!(dropped, 1);
        assert_eq!(set.scenario(0), &[0.1, 0.2]);

        let raw = read("1,2\n3,4").unwrap();
        let (set, dropped) = clean_scenarios(&raw, &CleaningPolicy::default()).unwrap();
        assert_eq!(dropped, 0);
        assert_eq!(set.as_flat(), &[1.0, 2.0, 3.0, 4.0]);

        let raw = read("1,\n,4").unwrap();
        assert!(matches!(
            clean_scenarios(&raw, &CleaningPolicy::default()),
            Err(Error::EmptySet { dropped: 2 })
        ));

        let strict = CleaningPolicy {
            drop_if_missing: false,
            ..Default::default()
        };
        assert!(clean_scenarios(&read("1,\n3,4").unwrap(), &strict).is_err());

        let inverted = CleaningPolicy {
            plausible_min: Some(1.0),
            plausible_max: Some(0.0),
            ..Default::default()
        };
        assert!(matches!(
            clean_scenarios(&read("1,2").unwrap(), &inverted),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn capacity_factor() {
        let set = ScenarioSet::from_rows(&[[10.0, 20.0]], 0.25).unwrap();
        let cf = capacity_factor_scale(&set, &[100.0, 100.0]).unwrap();
        assert_eq!(cf.as_flat(), &[0.1, 0.2]);
        let ones = capacity_factor_scale(&set, &[10.0, 20.0]).unwrap();
        assert_eq!(ones.as_flat(), &[1.0, 1.0]);
        assert!(capacity_factor_scale(&set, &[0.0, 100.0]).is_err());
        assert!(capacity_factor_scale(&set, &[1.0, 2.0, 3.0]).is_err());

        let two = ScenarioSet::from_rows(&[[10.0, 20.0], [30.0, 40.0]], 0.25).unwrap();
        let per_step = capacity_factor_scale(&two, &[10.0, 20.0, 30.0, 80.0]).unwrap();
        assert_eq!(per_step.as_flat(), &[1.0, 1.0, 1.0, 0.5]);
    }

    #[test]
    fn affine_examples() {
        let set = ScenarioSet::from_rows(&[[0.0, 5.0, 10.0]], 0.25).unwrap();
        let (unit, _) = affine_rescale(&set, 0.0, 1.0).unwrap();
        assert_eq!(unit.as_flat(), &[0.0, 0.5, 1.0]);
        let (sym, params) = affine_rescale(&set, -1.0, 1.0).unwrap();
        assert_eq!(sym.as_flat(), &[-1.0, 0.0, 1.0]);
        assert_eq!(params.invert(&sym).unwrap().as_flat(), set.as_flat());

        let flat = ScenarioSet::from_rows(&[[2.0, 2.0]], 0.25).unwrap();
        assert!(matches!(affine_rescale(&flat, 0.0, 1.0), Err(Error::Degenerate(_))));
        assert!(affine_rescale(&set, 1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn cleaning_is_idempotent(
            rows in prop::collection::vec(prop::collection::vec(prop_oneof![
                4 => -2.0f64..2.0,
                1 => Just(f64::NAN),
            ], 4), 1..12)
        ) {
            let raw = RawScenarioSet::new(rows, 1.0).unwrap();
            let policy = CleaningPolicy { plausible_min: Some(-1.0), plausible_max: Some(1.0), ..Default::default() };
            if let Ok((set, _)) = clean_scenarios(&raw, &policy) {
                let (again, dropped) = clean_scenarios(&set.clone().into(), &policy).unwrap();
                prop_assert_eq!(dropped, 0);
                prop_assert_eq!(again, set);
            }
        }

        #[test]
        fn affine_preserves_order_and_inverts(
            values in prop::collection::vec(-1e3f64..1e3, 2..40),
            sym in any::<bool>(),
        ) {
            prop_assume!(values.iter().any(|v| *v != values[0]));
            let set = ScenarioSet::from_flat(values.clone(), values.len(), 1.0).unwrap();
            let lo = if sym { -1.0 } else { 0.0 };
            let (scaled, params) = affine_rescale(&set, lo, 1.0).unwrap();
            let out = scaled.as_flat();
            for i in 0..values.len() {
                for j in 0..values.len() {
                    if values[i] < values[j] {
                        prop_assert!(out[i] <= out[j]);
                    }
                }
            }
            let back = params.invert(&scaled).unwrap();
            let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (a, b) in back.as_flat().iter().zip(&values) {
                prop_assert!((a - b).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn capacity_factor_stays_in_unit_interval(
            pairs in prop::collection::vec((0.0f64..1.0, 0.1f64..500.0), 2..30)
        ) {
            let gen: Vec<f64> = pairs.iter().map(|(f, c)| f * c).collect();
            let cap: Vec<f64> = pairs.iter().map(|(_, c)| *c).collect();
            let set = ScenarioSet::from_flat(gen, pairs.len(), 1.0).unwrap();
            let cf = capacity_factor_scale(&set, &cap).unwrap();
            prop_assert!(cf.as_flat().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
