//! Multifractal detrended fluctuation analysis.
//!
//! The profile of the series is cut into segments of length `s`, either
//! disjoint (remainder discarded) or sliding one sample at a time. A
//! least-squares polynomial of order `m` is removed from every segment and
//! the mean squared residual gives the segment variance `F²(v, s)`. The q-th
//! order fluctuation function is
//!
//! ```text
//! F_q(s) = ( mean_v [F²(v, s)]^(q/2) )^(1/q)
//! ```
//!
//! and the generalized Hurst exponent `h(q)` is the slope of `log2 F_q(s)`
//! against `log2 s`.
//!
//! Segment variances below `variance_floor` are raised to the floor before
//! aggregation and counted; without this, negative `q` would divide by zero
//! on perfectly detrended segments (e.g. runs of repeated, rounded values).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, ScenarioSet, TimeSeries};

pub const DEFAULT_Q_VALUES: [f64; 6] = [2.0, 4.0, 10.0, -2.0, -4.0, -10.0];
pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Segmentation {
    /// Windows start at every sample, `N - s + 1` of them.
    #[default]
    Sliding,
    /// `floor(N / s)` disjoint windows from the start of the series.
    NonOverlapping,
}

impl Segmentation {
    pub fn segment_count(self, n: usize, s: usize) -> usize {
        match self {
            Segmentation::Sliding => n + 1 - s,
            Segmentation::NonOverlapping => n / s,
        }
    }

    fn start(self, v: usize, s: usize) -> usize {
        match self {
            Segmentation::Sliding => v,
            Segmentation::NonOverlapping => v * s,
        }
    }
}

/// Segment lengths `min..=max`.
pub fn dense_scales(min: usize, max: usize) -> Vec<usize> {
    (min..=max).collect()
}

/// About `count` segment lengths spread evenly in log space over
/// `[min, max]`, deduplicated after rounding.
pub fn log_scales(min: usize, max: usize, count: usize) -> Vec<usize> {
    if count < 2 || min >= max {
        return vec![min];
    }
    let (lo, hi) = ((min as f64).ln(), (max as f64).ln());
    let mut out: Vec<usize> = (0..count)
        .map(|i| (lo + (hi - lo) * i as f64 / (count - 1) as f64).exp().round() as usize)
        .collect();
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MfdfaConfig {
    pub q_values: Vec<f64>,
    /// Polynomial order `m` of the detrending fit.
    pub detrend_order: usize,
    /// Segment lengths; when unset, every integer in
    /// `m + 2 ..= scenario_len` of the analysed series.
    pub s_values: Option<Vec<usize>>,
    pub mode: Segmentation,
    pub variance_floor: f64,
}

impl Default for MfdfaConfig {
    fn default() -> Self {
        Self {
            q_values: DEFAULT_Q_VALUES.to_vec(),
            detrend_order: 1,
            s_values: None,
            mode: Segmentation::Sliding,
            variance_floor: DEFAULT_VARIANCE_FLOOR,
        }
    }
}

impl MfdfaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.q_values.is_empty() {
            return bad("at least one q value is required".into());
        }
        if let Some(q) = self.q_values.iter().find(|q| **q == 0.0 || !q.is_finite()) {
            return bad(format!("q must be finite and nonzero, got {q}"));
        }
        if self.detrend_order == 0 {
            return bad("detrending order must be at least 1".into());
        }
        if !(self.variance_floor > 0.0 && self.variance_floor.is_finite()) {
            return bad(format!(
                "variance floor must be positive, got {}",
                self.variance_floor
            ));
        }
        if let Some(s) = &self.s_values {
            self.check_scales(s)?;
        }
        Ok(())
    }

    fn check_scales(&self, s: &[usize]) -> Result<()> {
        let min = self.detrend_order + 2;
        if s.is_empty() {
            return Err(Error::InvalidConfig("no segment lengths given".into()));
        }
        if s[0] < min {
            return Err(Error::InvalidConfig(format!(
                "segment length {} is below m + 2 = {min}",
                s[0]
            )));
        }
        if s.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "segment lengths must be strictly ascending".into(),
            ));
        }
        Ok(())
    }

    /// Segment lengths used for `ts`.
    pub fn resolve_scales(&self, ts: &TimeSeries) -> Result<Vec<usize>> {
        let scales = match &self.s_values {
            Some(s) => s.clone(),
            None if ts.scenario_len() > 0 => {
                dense_scales(self.detrend_order + 2, ts.scenario_len())
            }
            None => {
                return Err(Error::InvalidConfig(
                    "segment lengths are required for series without scenario structure".into(),
                ))
            }
        };
        self.check_scales(&scales)?;
        if let Some(&max) = scales.last() {
            if max > ts.len() {
                return Err(Error::InvalidConfig(format!(
                    "segment length {max} exceeds series length {}",
                    ts.len()
                )));
            }
        }
        Ok(scales)
    }
}

/// Centered cumulative sum of a series.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub values: Vec<f64>,
    /// `x_k - mean`, the increments of `values`.
    increments: Vec<f64>,
}

impl Profile {
    pub fn source_len(&self) -> usize {
        self.values.len()
    }
}

pub fn profile(ts: &TimeSeries) -> Profile {
    let x = ts.values();
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let increments: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let mut acc = 0.0;
    let values = increments
        .iter()
        .map(|d| {
            acc += d;
            acc
        })
        .collect();
    Profile { values, increments }
}

/// Orthonormal polynomial basis of degree `0..=order` on abscissae `0..len`.
struct PolyBasis {
    len: usize,
    /// `order + 1` rows of `len` values.
    rows: Vec<Vec<f64>>,
}

impl PolyBasis {
    fn new(len: usize, order: usize) -> Self {
        let mid = (len as f64 - 1.0) / 2.0;
        let half = mid.max(1.0);
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(order + 1);
        for degree in 0..=order {
            let mut v: Vec<f64> = (0..len)
                .map(|i| ((i as f64 - mid) / half).powi(degree as i32))
                .collect();
            // two passes of modified Gram-Schmidt
            for _ in 0..2 {
                for r in &rows {
                    let dot: f64 = r.iter().zip(&v).map(|(a, b)| a * b).sum();
                    v.iter_mut().zip(r).for_each(|(x, a)| *x -= dot * a);
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            rows.push(v);
        }
        Self { len, rows }
    }

    /// Mean squared residual of `y` after removing its projection.
    fn residual_variance(&self, y: &[f64], coeffs: &mut [f64]) -> f64 {
        for (c, r) in coeffs.iter_mut().zip(&self.rows) {
            *c = r.iter().zip(y).map(|(a, b)| a * b).sum();
        }
        let mut ss = 0.0;
        for (i, &yi) in y.iter().enumerate() {
            let fit: f64 = coeffs.iter().zip(&self.rows).map(|(c, r)| c * r[i]).sum();
            let r = yi - fit;
            ss += r * r;
        }
        ss / self.len as f64
    }
}

fn check_segment(n: usize, s: usize, order: usize) -> Result<()> {
    if order == 0 {
        return Err(Error::InvalidConfig("detrending order must be at least 1".into()));
    }
    if s < order + 2 {
        return Err(Error::InvalidConfig(format!(
            "segment length {s} is below m + 2 = {}",
            order + 2
        )));
    }
    if s > n {
        return Err(Error::InvalidConfig(format!(
            "segment length {s} exceeds profile length {n}"
        )));
    }
    Ok(())
}

fn variances_unchecked(p: &Profile, s: usize, order: usize, mode: Segmentation) -> Vec<f64> {
    let basis = PolyBasis::new(s, order);
    let count = mode.segment_count(p.source_len(), s);
    let mut window = vec![0.0; s];
    let mut coeffs = vec![0.0; order + 1];
    (0..count)
        .map(|v| {
            // Re-integrate the increments inside the window. This is the
            // profile minus a constant, which the fit absorbs, with rounding
            // proportional to the local excursion only.
            let start = mode.start(v, s);
            let mut acc = 0.0;
            window[0] = 0.0;
            for (w, d) in window[1..].iter_mut().zip(&p.increments[start + 1..start + s]) {
                acc += d;
                *w = acc;
            }
            basis.residual_variance(&window, &mut coeffs)
        })
        .collect()
}

/// Variance `F²(v, s)` of every segment around its order-`m` polynomial fit,
/// before flooring.
pub fn segment_variances(
    p: &Profile,
    s: usize,
    order: usize,
    mode: Segmentation,
) -> Result<Vec<f64>> {
    check_segment(p.source_len(), s, order)?;
    Ok(variances_unchecked(p, s, order, mode))
}

/// `(mean_v var_v^(q/2))^(1/q)`, evaluated in log space.
pub fn q_order_mean(variances: &[f64], q: f64) -> f64 {
    let logs: Vec<f64> = variances.iter().map(|v| 0.5 * q * v.ln()).collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logs.iter().map(|l| (l - max).exp()).sum();
    let log_mean = max + (sum / variances.len() as f64).ln();
    (log_mean / q).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HurstFit {
    pub q: f64,
    /// Slope of `log2 F_q(s)` against `log2 s`.
    pub h: f64,
    pub std_error: f64,
    pub intercept: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationSurface {
    pub s_values: Vec<usize>,
    pub q_values: Vec<f64>,
    /// `fluctuation[iq][is] = F_q(s)`.
    pub fluctuation: Vec<Vec<f64>>,
    /// `s >= scenario_len / 2`; segments this long straddle scenario joins.
    pub flagged_s: Vec<bool>,
    /// Floored segments per `(q, s)`.
    pub clamped_segments: Vec<Vec<usize>>,
    pub n_segments: Vec<usize>,
    pub scenario_len: usize,
    pub mode: Segmentation,
    pub detrend_order: usize,
    /// One entry per q once fitted.
    pub hurst: Vec<HurstFit>,
}

impl FluctuationSurface {
    pub fn q_index(&self, q: f64) -> Option<usize> {
        self.q_values.iter().position(|&x| x == q)
    }

    pub fn s_index(&self, s: usize) -> Option<usize> {
        self.s_values.binary_search(&s).ok()
    }

    pub fn hurst_for(&self, q: f64) -> Option<&HurstFit> {
        self.hurst.iter().find(|h| h.q == q)
    }

    pub fn total_clamped(&self) -> usize {
        self.clamped_segments.first().map_or(0, |row| row.iter().sum())
    }
}

fn flagged(s: usize, scenario_len: usize) -> bool {
    scenario_len > 0 && 2 * s >= scenario_len
}

/// `F_q(s)` over the configured `(q, s)` grid.
pub fn fluctuation_function(ts: &TimeSeries, cfg: &MfdfaConfig) -> Result<FluctuationSurface> {
    cfg.validate()?;
    let scales = cfg.resolve_scales(ts)?;
    let p = profile(ts);
    let order = cfg.detrend_order;
    let floor = cfg.variance_floor;

    // per s: (F_q for every q, clamp count, segment count)
    let columns: Vec<(Vec<f64>, usize, usize)> = scales
        .par_iter()
        .map(|&s| {
            let mut vars = variances_unchecked(&p, s, order, cfg.mode);
            let mut clamped = 0;
            for v in vars.iter_mut() {
                if *v < floor {
                    *v = floor;
                    clamped += 1;
                }
            }
            let fq = cfg.q_values.iter().map(|&q| q_order_mean(&vars, q)).collect();
            (fq, clamped, vars.len())
        })
        .collect();

    let nq = cfg.q_values.len();
    let fluctuation = (0..nq)
        .map(|iq| columns.iter().map(|c| c.0[iq]).collect())
        .collect();
    let clamped_segments = (0..nq)
        .map(|_| columns.iter().map(|c| c.1).collect())
        .collect();
    Ok(FluctuationSurface {
        flagged_s: scales.iter().map(|&s| flagged(s, ts.scenario_len())).collect(),
        n_segments: columns.iter().map(|c| c.2).collect(),
        s_values: scales,
        q_values: cfg.q_values.clone(),
        fluctuation,
        clamped_segments,
        scenario_len: ts.scenario_len(),
        mode: cfg.mode,
        detrend_order: order,
        hurst: Vec::new(),
    })
}

/// Ordinary least squares `y = a + b x`; returns `(b, a, std_error(b))`.
fn ols(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let se = (ssr / (n - 2.0) / sxx).sqrt();
    (slope, intercept, se)
}

/// Fits `h(q)` over the unflagged segment lengths inside `s_range`
/// (inclusive; all lengths if `None`).
pub fn hurst_fit(
    surface: &FluctuationSurface,
    s_range: Option<(usize, usize)>,
) -> Result<FluctuationSurface> {
    let (lo, hi) = s_range.unwrap_or((0, usize::MAX));
    let usable: Vec<usize> = (0..surface.s_values.len())
        .filter(|&i| {
            let s = surface.s_values[i];
            !surface.flagged_s[i] && s >= lo && s <= hi
        })
        .collect();
    if usable.len() < 3 {
        return Err(Error::InvalidConfig(format!(
            "Hurst fit needs at least 3 unflagged segment lengths in range, found {}",
            usable.len()
        )));
    }
    let x: Vec<f64> = usable
        .iter()
        .map(|&i| (surface.s_values[i] as f64).log2())
        .collect();
    let hurst = surface
        .q_values
        .iter()
        .zip(&surface.fluctuation)
        .map(|(&q, row)| {
            let y: Vec<f64> = usable.iter().map(|&i| row[i].log2()).collect();
            let (h, intercept, std_error) = ols(&x, &y);
            HurstFit {
                q,
                h,
                std_error,
                intercept,
                n_points: usable.len(),
            }
        })
        .collect();
    Ok(FluctuationSurface {
        hurst,
        ..surface.clone()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct MfdfaParams {
    #[serde(flatten)]
    pub config: MfdfaConfig,
    /// Inclusive `(min, max)` segment lengths for the Hurst fit.
    pub fit_range: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfdfaReport {
    pub reference: FluctuationSurface,
    pub candidate: FluctuationSurface,
}

/// Fluctuation surfaces and Hurst fits of both concatenated sets.
///
/// Without explicit segment lengths, every length from `m + 2` up to two
/// scenarios is evaluated; lengths from half a scenario on are flagged and
/// left out of the fit.
pub fn mfdfa_report(
    reference: &ScenarioSet,
    candidate: &ScenarioSet,
    params: &MfdfaParams,
) -> Result<MfdfaReport> {
    if reference.dt() != candidate.dt() {
        return Err(Error::DtMismatch(reference.dt(), candidate.dt()));
    }
    if reference.scenario_len() != candidate.scenario_len() {
        return Err(Error::LengthMismatch(
            reference.scenario_len(),
            candidate.scenario_len(),
        ));
    }
    let t = reference.scenario_len();
    let config = match &params.config.s_values {
        Some(_) => params.config.clone(),
        None => {
            // flagged lengths up to two scenarios are kept for display
            let n = reference.as_flat().len().min(candidate.as_flat().len());
            MfdfaConfig {
                s_values: Some(dense_scales(
                    params.config.detrend_order + 2,
                    (2 * t).min(n),
                )),
                ..params.config.clone()
            }
        }
    };
    let run = |set: &ScenarioSet| -> Result<FluctuationSurface> {
        let surface = fluctuation_function(&set.concatenate(), &config)?;
        hurst_fit(&surface, params.fit_range)
    };
    Ok(MfdfaReport {
        reference: run(reference)?,
        candidate: run(candidate)?,
    })
}
