//! Gaussian kernel density estimates of scenario samples.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, SampleCollection, ScenarioSet};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Default number of evaluation points.
pub const DEFAULT_GRID_POINTS: usize = 512;
/// Kernel half-widths added on both sides of the sample range.
pub const GRID_PAD_BANDWIDTHS: f64 = 3.0;
pub const DEFAULT_LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Gaussian,
}

/// Where to evaluate a density.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    /// `points` equispaced values on `[min - 3h, max + 3h]`.
    Auto { points: usize },
    /// `points` equispaced values on `[lo, hi]`.
    Span { lo: f64, hi: f64, points: usize },
    /// Explicit ascending points.
    Points(Vec<f64>),
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Auto {
            points: DEFAULT_GRID_POINTS,
        }
    }
}

fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let step = (hi - lo) / (points - 1) as f64;
    (0..points)
        .map(|i| if i + 1 == points { hi } else { lo + step * i as f64 })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    pub n_samples: usize,
    pub kernel: Kernel,
}

impl DensityEstimate {
    /// Trapezoidal integral of the density over its grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }

    /// Grid point with the largest density.
    pub fn mode(&self) -> f64 {
        let (i, _) = self
            .density
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &d)| {
                if d > best.1 {
                    (i, d)
                } else {
                    best
                }
            });
        self.grid[i]
    }
}

/// Sample standard deviation with `N - 1` divisor.
fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (ss / (n - 1.0)).sqrt()
}

/// Scott's rule of thumb, `h = sigma * N^(-1/5)`.
pub fn default_bandwidth(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InvalidInput(
            "bandwidth selection needs at least 2 samples".into(),
        ));
    }
    let sigma = sample_std(samples);
    if !(sigma > 0.0) {
        return Err(Error::Degenerate(
            "samples are all identical, bandwidth is undefined".into(),
        ));
    }
    Ok(scott_bandwidth(sigma, samples.len()))
}

pub(crate) fn scott_bandwidth(sigma: f64, n: usize) -> f64 {
    sigma * (n as f64).powf(-0.2)
}

fn resolve_bandwidth(samples: &[f64], bandwidth: Option<f64>) -> Result<f64> {
    match bandwidth {
        Some(h) if h.is_finite() && h > 0.0 => Ok(h),
        Some(h) => Err(Error::InvalidInput(format!(
            "bandwidth must be positive, got {h}"
        ))),
        None => default_bandwidth(samples),
    }
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

fn build_grid(samples: &[f64], h: f64, spec: &GridSpec) -> Result<Vec<f64>> {
    let grid = match spec {
        GridSpec::Auto { points } => {
            let (lo, hi) = min_max(samples);
            span_grid(lo - GRID_PAD_BANDWIDTHS * h, hi + GRID_PAD_BANDWIDTHS * h, *points)?
        }
        GridSpec::Span { lo, hi, points } => span_grid(*lo, *hi, *points)?,
        GridSpec::Points(points) => points.clone(),
    };
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput(
            "evaluation grid must be non-empty and strictly ascending".into(),
        ));
    }
    Ok(grid)
}

fn span_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !(lo < hi) {
        return Err(Error::InvalidInput(format!(
            "cannot place {points} grid points on [{lo}, {hi}]"
        )));
    }
    Ok(linspace(lo, hi, points))
}

/// Kernel density estimate with a Gaussian kernel.
///
/// Without an explicit bandwidth, Scott's rule is used, which requires at
/// least two distinct samples.
pub fn kde_pdf(
    samples: &SampleCollection,
    bandwidth: Option<f64>,
    grid: &GridSpec,
) -> Result<DensityEstimate> {
    let xs = samples.values();
    let h = resolve_bandwidth(xs, bandwidth)?;
    let grid = build_grid(xs, h, grid)?;
    let norm = INV_SQRT_2PI / (h * xs.len() as f64);
    let density = grid
        .par_iter()
        .map(|&x| {
            norm * xs
                .iter()
                .map(|&xi| {
                    let u = (x - xi) / h;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
        })
        .collect();
    Ok(DensityEstimate {
        grid,
        density,
        bandwidth: h,
        n_samples: xs.len(),
        kernel: Kernel::Gaussian,
    })
}

/// `log10(max(density, floor))` at every grid point.
pub fn log_density(est: &DensityEstimate, floor: f64) -> Vec<f64> {
    est.density.iter().map(|d| d.max(floor).log10()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PdfParams {
    pub grid_points: usize,
    /// Fixed bandwidth for every estimate; Scott's rule per estimate if unset.
    pub bandwidth: Option<f64>,
    pub log_floor: f64,
}

impl Default for PdfParams {
    fn default() -> Self {
        Self {
            grid_points: DEFAULT_GRID_POINTS,
            bandwidth: None,
            log_floor: DEFAULT_LOG_FLOOR,
        }
    }
}

/// Reference and candidate estimates evaluated on one shared grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityPair {
    pub reference: DensityEstimate,
    pub candidate: DensityEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdfReport {
    /// All time steps as samples.
    pub full: DensityPair,
    /// Per-scenario means as samples.
    pub marginal: DensityPair,
}

fn paired(
    reference: &SampleCollection,
    candidate: &SampleCollection,
    params: &PdfParams,
) -> Result<DensityPair> {
    let h_ref = resolve_bandwidth(reference.values(), params.bandwidth)?;
    let h_cand = resolve_bandwidth(candidate.values(), params.bandwidth)?;
    let (rlo, rhi) = min_max(reference.values());
    let (clo, chi) = min_max(candidate.values());
    let grid = GridSpec::Span {
        lo: (rlo - GRID_PAD_BANDWIDTHS * h_ref).min(clo - GRID_PAD_BANDWIDTHS * h_cand),
        hi: (rhi + GRID_PAD_BANDWIDTHS * h_ref).max(chi + GRID_PAD_BANDWIDTHS * h_cand),
        points: params.grid_points,
    };
    Ok(DensityPair {
        reference: kde_pdf(reference, Some(h_ref), &grid)?,
        candidate: kde_pdf(candidate, Some(h_cand), &grid)?,
    })
}

/// Full and marginal (daily mean) densities of both sets.
pub fn pdf_report(
    reference: &ScenarioSet,
    candidate: &ScenarioSet,
    params: &PdfParams,
) -> Result<PdfReport> {
    Ok(PdfReport {
        full: paired(
            &reference.flatten_timesteps(),
            &candidate.flatten_timesteps(),
            params,
        )?,
        marginal: paired(&reference.daily_means(), &candidate.daily_means(), params)?,
    })
}
