//! CSV curves and the JSON summary of a report bundle.

use std::path::{Path, PathBuf};

use serde::Serialize;

use scenval::autocorr::AcfCurve;
use scenval::density::{log_density, DensityEstimate};
use scenval::mfdfa::{FluctuationSurface, HurstFit};
use scenval::spectral::Spectrum;

use crate::report::{ProvenanceBlock, ReportBundle, SetRole, Warning};
use crate::CliError;

const ROLES: [SetRole; 2] = [SetRole::Reference, SetRole::Candidate];

fn write_csv(
    dir: &Path,
    name: &str,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<String, CliError> {
    let path = dir.join(name);
    let fail = |e: csv::Error| CliError::output(&path, e);
    let mut w = csv::Writer::from_path(&path).map_err(fail)?;
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(&row).map_err(fail)?;
    }
    w.flush().map_err(|e| CliError::output(&path, e))?;
    Ok(name.to_owned())
}

fn density_rows(est: &DensityEstimate, floor: f64) -> Vec<Vec<String>> {
    let logs = log_density(est, floor);
    est.grid
        .iter()
        .zip(&est.density)
        .zip(logs)
        .map(|((x, d), l)| vec![x.to_string(), d.to_string(), l.to_string()])
        .collect()
}

fn acf_rows(curves: &[&AcfCurve]) -> Vec<Vec<String>> {
    curves
        .iter()
        .enumerate()
        .flat_map(|(example, c)| {
            c.lags.iter().zip(&c.values).map(move |(lag, r)| {
                vec![
                    example.to_string(),
                    c.scenario_index.to_string(),
                    lag.to_string(),
                    r.to_string(),
                ]
            })
        })
        .collect()
}

fn spectrum_rows(s: &Spectrum) -> Vec<Vec<String>> {
    (0..s.psd.len())
        .map(|i| {
            vec![
                s.frequencies[i].to_string(),
                s.periods[i].to_string(),
                s.psd[i].to_string(),
                s.flagged[i].to_string(),
            ]
        })
        .collect()
}

fn surface_rows(s: &FluctuationSurface) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (iq, q) in s.q_values.iter().enumerate() {
        for (is, sv) in s.s_values.iter().enumerate() {
            rows.push(vec![
                q.to_string(),
                sv.to_string(),
                s.flagged_s[is].to_string(),
                s.n_segments[is].to_string(),
                s.fluctuation[iq][is].to_string(),
                s.clamped_segments[iq][is].to_string(),
            ]);
        }
    }
    rows
}

#[derive(Serialize)]
struct DensitySummary {
    bandwidth: f64,
    n_samples: usize,
    integral: f64,
}

impl From<&DensityEstimate> for DensitySummary {
    fn from(e: &DensityEstimate) -> Self {
        Self {
            bandwidth: e.bandwidth,
            n_samples: e.n_samples,
            integral: e.integral(),
        }
    }
}

#[derive(Serialize)]
struct PdfSummary {
    full_reference: DensitySummary,
    full_candidate: DensitySummary,
    marginal_reference: DensitySummary,
    marginal_candidate: DensitySummary,
}

#[derive(Serialize)]
struct MatchSummary {
    reference_index: usize,
    best_candidate_index: usize,
    mse: f64,
    second_best_mse: Option<f64>,
}

#[derive(Serialize)]
struct AcfSummary<'a> {
    max_lag: usize,
    seed: u64,
    matches: Vec<MatchSummary>,
    caveat: &'a str,
}

#[derive(Serialize)]
struct PsdSummary {
    min_period_hours: f64,
    max_period_hours: f64,
    flag_above_hours: Option<f64>,
    segment_len: Option<usize>,
    n_segments_reference: Option<usize>,
    n_segments_candidate: Option<usize>,
    total_power_reference: f64,
    total_power_candidate: f64,
}

#[derive(Serialize)]
struct SurfaceSummary {
    hurst: Vec<HurstFit>,
    clamped_segments: usize,
    flagged_from_s: Option<usize>,
}

impl From<&FluctuationSurface> for SurfaceSummary {
    fn from(s: &FluctuationSurface) -> Self {
        Self {
            hurst: s.hurst.clone(),
            clamped_segments: s.total_clamped(),
            flagged_from_s: s
                .flagged_s
                .iter()
                .position(|f| *f)
                .map(|i| s.s_values[i]),
        }
    }
}

#[derive(Serialize)]
struct MfdfaSummary {
    reference: SurfaceSummary,
    candidate: SurfaceSummary,
}

#[derive(Serialize)]
struct Summary<'a> {
    provenance: &'a ProvenanceBlock,
    #[serde(skip_serializing_if = "Option::is_none")]
    pdf: Option<PdfSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    acf: Option<AcfSummary<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    psd: Option<PsdSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mfdfa: Option<MfdfaSummary>,
    warnings: &'a [Warning],
}

fn summary(bundle: &ReportBundle) -> Summary<'_> {
    Summary {
        provenance: &bundle.provenance,
        pdf: bundle.pdf.as_ref().map(|r| PdfSummary {
            full_reference: (&r.full.reference).into(),
            full_candidate: (&r.full.candidate).into(),
            marginal_reference: (&r.marginal.reference).into(),
            marginal_candidate: (&r.marginal.candidate).into(),
        }),
        acf: bundle.acf.as_ref().map(|p| AcfSummary {
            max_lag: p.max_lag,
            seed: p.seed,
            matches: p
                .pairs
                .iter()
                .map(|pair| MatchSummary {
                    reference_index: pair.result.reference_index,
                    best_candidate_index: pair.result.best_candidate_index,
                    mse: pair.result.mse,
                    second_best_mse: pair.result.runner_up_mses.first().copied(),
                })
                .collect(),
            caveat: &p.caveat,
        }),
        psd: bundle.psd.as_ref().map(|r| PsdSummary {
            min_period_hours: r.min_period,
            max_period_hours: r.max_period,
            flag_above_hours: r.reference.flag_bound,
            segment_len: r.reference.welch.as_ref().map(|w| w.segment_len),
            n_segments_reference: r.reference.welch.as_ref().map(|w| w.n_segments),
            n_segments_candidate: r.candidate.welch.as_ref().map(|w| w.n_segments),
            total_power_reference: r.reference.total_power(),
            total_power_candidate: r.candidate.total_power(),
        }),
        mfdfa: bundle.mfdfa.as_ref().map(|r| MfdfaSummary {
            reference: (&r.reference).into(),
            candidate: (&r.candidate).into(),
        }),
        warnings: &bundle.warnings,
    }
}

fn absolute(p: &Path) -> PathBuf {
    std::fs::canonicalize(p)
        .or_else(|_| std::env::current_dir().map(|d| d.join(p)))
        .unwrap_or_else(|_| p.to_owned())
}

/// Writes every curve as CSV plus `summary.json` and `config.toml`. Returns
/// the written file names relative to `dir`.
pub fn write_bundle(bundle: &ReportBundle, dir: &Path) -> Result<Vec<String>, CliError> {
    let mut manifest = Vec::new();

    if let Some(pdf) = &bundle.pdf {
        let floor = bundle.provenance.config.pdf.log_floor;
        for (kind, pair) in [("full", &pdf.full), ("marginal", &pdf.marginal)] {
            for (role, est) in ROLES.iter().zip([&pair.reference, &pair.candidate]) {
                manifest.push(write_csv(
                    dir,
                    &format!("pdf_{kind}_{}.csv", role.name()),
                    &["x", "density", "log10_density"],
                    density_rows(est, floor),
                )?);
            }
        }
    }

    if let Some(panel) = &bundle.acf {
        let refs: Vec<&AcfCurve> = panel.pairs.iter().map(|p| &p.reference).collect();
        let matched: Vec<&AcfCurve> = panel.pairs.iter().map(|p| &p.matched).collect();
        for (role, curves) in ROLES.iter().zip([refs, matched]) {
            manifest.push(write_csv(
                dir,
                &format!("acf_{}.csv", role.name()),
                &["example", "scenario_index", "lag", "acf"],
                acf_rows(&curves),
            )?);
        }
    }

    if let Some(psd) = &bundle.psd {
        for (role, s) in ROLES.iter().zip([&psd.reference, &psd.candidate]) {
            manifest.push(write_csv(
                dir,
                &format!("psd_{}.csv", role.name()),
                &["frequency_per_hour", "period_hours", "psd", "flagged"],
                spectrum_rows(s),
            )?);
        }
    }

    if let Some(mf) = &bundle.mfdfa {
        for (role, s) in ROLES.iter().zip([&mf.reference, &mf.candidate]) {
            manifest.push(write_csv(
                dir,
                &format!("mfdfa_{}.csv", role.name()),
                &["q", "s", "flagged", "n_segments", "fluctuation", "clamped_segments"],
                surface_rows(s),
            )?);
        }
    }

    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary(bundle))
        .map_err(|e| CliError::output(&path, e))?;
    std::fs::write(&path, text + "\n").map_err(|e| CliError::output(&path, e))?;
    manifest.push("summary.json".into());

    let mut echo = bundle.provenance.config.clone();
    echo.reference_csv = absolute(&echo.reference_csv);
    echo.candidate_csv = absolute(&echo.candidate_csv);
    echo.output_dir = absolute(&echo.output_dir);
    let path = dir.join("config.toml");
    std::fs::write(&path, echo.to_toml()).map_err(|e| CliError::output(&path, e))?;
    manifest.push("config.toml".into());

    Ok(manifest)
}

/// Writes a scenario set as a headerless CSV, one scenario per row.
pub fn write_scenario_csv(set: &scenval::ScenarioSet, path: &Path) -> Result<(), CliError> {
    let fail = |e: csv::Error| CliError::output(path, e);
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(fail)?;
    for row in set.scenarios() {
        w.write_record(row.iter().map(f64::to_string)).map_err(fail)?;
    }
    w.flush().map_err(|e| CliError::output(path, e))
}
