use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use scenval::autocorr::{acf_panel, AcfPanel};
use scenval::density::{pdf_report, PdfReport};
use scenval::ingest::{clean_scenarios, load_scenario_csv};
use scenval::mfdfa::{mfdfa_report, FluctuationSurface, MfdfaReport};
use scenval::spectral::{psd_report, PsdReport, Spectrum};
use scenval::ScenarioSet;

use crate::config::{ValidationConfig, Validator};
use crate::{output, plots, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SetRole {
    Reference,
    Candidate,
}

impl SetRole {
    pub fn name(self) -> &'static str {
        match self {
            SetRole::Reference => "reference",
            SetRole::Candidate => "candidate",
        }
    }
}

/// Conditions a reader of the results should know about.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    DroppedScenarios {
        set: SetRole,
        count: usize,
    },
    DegenerateSkipped {
        set: SetRole,
        validator: Validator,
        count: usize,
    },
    FlaggedPeriods {
        set: SetRole,
        bins: usize,
        above_hours: f64,
    },
    SingleWelchSegment {
        set: SetRole,
    },
    FlaggedScales {
        set: SetRole,
        count: usize,
        from_s: usize,
    },
    ClampedSegments {
        set: SetRole,
        count: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputInfo {
    pub path: String,
    pub sha256: String,
    pub n_scenarios: usize,
    pub scenario_len: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProvenanceBlock {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: ValidationConfig,
    pub reference: InputInfo,
    pub candidate: InputInfo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub provenance: ProvenanceBlock,
    pub pdf: Option<PdfReport>,
    pub acf: Option<AcfPanel>,
    pub psd: Option<PsdReport>,
    pub mfdfa: Option<MfdfaReport>,
    pub warnings: Vec<Warning>,
}

impl ReportBundle {
    /// Number of validator payloads present.
    pub fn payload_count(&self) -> usize {
        [
            self.pdf.is_some(),
            self.acf.is_some(),
            self.psd.is_some(),
            self.mfdfa.is_some(),
        ]
        .iter()
        .filter(|p| **p)
        .count()
    }
}

fn digest(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|source| scenval::Error::Io {
        path: path.to_owned(),
        source,
    })?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

fn load(cfg: &ValidationConfig, path: &Path) -> Result<(ScenarioSet, InputInfo), CliError> {
    let raw = load_scenario_csv(path, cfg.dt_hours)?;
    let (set, dropped) = clean_scenarios(&raw, &cfg.cleaning)?;
    let info = InputInfo {
        path: path.display().to_string(),
        sha256: digest(path)?,
        n_scenarios: set.n_scenarios(),
        scenario_len: set.scenario_len(),
        dropped,
    };
    Ok((set, info))
}

fn spectrum_warnings(set: SetRole, s: &Spectrum, out: &mut Vec<Warning>) {
    let bins = s.flagged.iter().filter(|f| **f).count();
    if let (Some(bound), true) = (s.flag_bound, bins > 0) {
        out.push(Warning::FlaggedPeriods {
            set,
            bins,
            above_hours: bound,
        });
    }
    if s.welch.as_ref().is_some_and(|w| w.single_segment) {
        out.push(Warning::SingleWelchSegment { set });
    }
}

fn surface_warnings(set: SetRole, s: &FluctuationSurface, out: &mut Vec<Warning>) {
    let count = s.flagged_s.iter().filter(|f| **f).count();
    if let Some(i) = s.flagged_s.iter().position(|f| *f) {
        out.push(Warning::FlaggedScales {
            set,
            count,
            from_s: s.s_values[i],
        });
    }
    let clamped = s.total_clamped();
    if clamped > 0 {
        out.push(Warning::ClampedSegments {
            set,
            count: clamped,
        });
    }
}

fn tag(validator: Validator) -> impl Fn(scenval::Error) -> CliError {
    move |source| CliError::Validator { validator, source }
}

/// Loads both inputs and runs the selected validators, without writing
/// anything.
pub fn evaluate(cfg: &ValidationConfig) -> Result<ReportBundle, CliError> {
    cfg.validate()?;
    let (reference, ref_info) = load(cfg, &cfg.reference_csv)?;
    let (candidate, cand_info) = load(cfg, &cfg.candidate_csv)?;
    if reference.scenario_len() != candidate.scenario_len() {
        return Err(scenval::Error::LengthMismatch(
            reference.scenario_len(),
            candidate.scenario_len(),
        )
        .into());
    }

    let mut warnings = Vec::new();
    for (set, info) in [(SetRole::Reference, &ref_info), (SetRole::Candidate, &cand_info)] {
        if info.dropped > 0 {
            warnings.push(Warning::DroppedScenarios {
                set,
                count: info.dropped,
            });
        }
    }

    let mut bundle = ReportBundle {
        provenance: ProvenanceBlock {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config: cfg.clone(),
            reference: ref_info,
            candidate: cand_info,
        },
        pdf: None,
        acf: None,
        psd: None,
        mfdfa: None,
        warnings: Vec::new(),
    };

    for validator in cfg.selected() {
        match validator {
            Validator::Pdf => {
                bundle.pdf = Some(pdf_report(&reference, &candidate, &cfg.pdf).map_err(tag(validator))?);
            }
            Validator::Acf => {
                let panel = acf_panel(
                    &reference,
                    &candidate,
                    cfg.acf.n_examples.min(reference.n_scenarios()),
                    cfg.acf.max_lag,
                    cfg.seed,
                )
                .map_err(tag(validator))?;
                for (set, count) in [
                    (SetRole::Reference, panel.skipped_reference),
                    (SetRole::Candidate, panel.skipped_candidates),
                ] {
                    if count > 0 {
                        warnings.push(Warning::DegenerateSkipped {
                            set,
                            validator,
                            count,
                        });
                    }
                }
                bundle.acf = Some(panel);
            }
            Validator::Psd => {
                let r = psd_report(&reference, &candidate, &cfg.psd).map_err(tag(validator))?;
                spectrum_warnings(SetRole::Reference, &r.reference, &mut warnings);
                spectrum_warnings(SetRole::Candidate, &r.candidate, &mut warnings);
                bundle.psd = Some(r);
            }
            Validator::Mfdfa => {
                let r = mfdfa_report(&reference, &candidate, &cfg.mfdfa).map_err(tag(validator))?;
                surface_warnings(SetRole::Reference, &r.reference, &mut warnings);
                surface_warnings(SetRole::Candidate, &r.candidate, &mut warnings);
                bundle.mfdfa = Some(r);
            }
        }
    }
    bundle.warnings = warnings;
    Ok(bundle)
}

/// Runs the configured validators and writes CSV curves, the summary and,
/// if enabled, plots under the output directory. Returns the bundle and the
/// list of written files.
pub fn run_validation(cfg: &ValidationConfig) -> Result<(ReportBundle, Vec<String>), CliError> {
    let bundle = evaluate(cfg)?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))?;
    let mut manifest = output::write_bundle(&bundle, dir)?;
    if cfg.emit_plots {
        manifest.extend(plots::emit_plot_files(&bundle, dir)?);
    }
    Ok((bundle, manifest))
}
