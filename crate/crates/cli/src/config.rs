use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use scenval::autocorr::AcfParams;
use scenval::density::PdfParams;
use scenval::ingest::CleaningPolicy;
use scenval::mfdfa::MfdfaParams;
use scenval::spectral::WelchParams;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Validator {
    Pdf,
    Acf,
    Psd,
    Mfdfa,
}

impl Validator {
    /// Execution and report order.
    pub const ALL: [Validator; 4] = [Validator::Pdf, Validator::Acf, Validator::Psd, Validator::Mfdfa];

    pub fn name(self) -> &'static str {
        match self {
            Validator::Pdf => "pdf",
            Validator::Acf => "acf",
            Validator::Psd => "psd",
            Validator::Mfdfa => "mfdfa",
        }
    }
}

impl fmt::Display for Validator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything needed to reproduce a validation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub reference_csv: PathBuf,
    pub candidate_csv: PathBuf,
    pub dt_hours: f64,
    #[serde(default = "all_validators")]
    pub validators: Vec<Validator>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub emit_plots: bool,
    #[serde(default)]
    pub cleaning: CleaningPolicy,
    #[serde(default)]
    pub pdf: PdfParams,
    #[serde(default)]
    pub acf: AcfParams,
    #[serde(default)]
    pub psd: WelchParams,
    #[serde(default)]
    pub mfdfa: MfdfaParams,
}

fn all_validators() -> Vec<Validator> {
    Validator::ALL.to_vec()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("scenval-out")
}

fn default_true() -> bool {
    true
}

/// Partial configuration as read from a file, before flag overrides.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub reference_csv: Option<PathBuf>,
    pub candidate_csv: Option<PathBuf>,
    pub dt_hours: Option<f64>,
    pub validators: Option<Vec<Validator>>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub emit_plots: Option<bool>,
    #[serde(default)]
    pub cleaning: CleaningPolicy,
    #[serde(default)]
    pub pdf: PdfParams,
    #[serde(default)]
    pub acf: AcfParams,
    #[serde(default)]
    pub psd: WelchParams,
    #[serde(default)]
    pub mfdfa: MfdfaParams,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut file: ConfigFile = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        // relative input and output paths are taken from the config's directory
        if let Some(dir) = path.parent() {
            for p in [
                &mut file.reference_csv,
                &mut file.candidate_csv,
                &mut file.output_dir,
            ]
            .into_iter()
            .flatten()
            {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(file)
    }
}

/// Values given on the command line; any set field wins over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub reference_csv: Option<PathBuf>,
    pub candidate_csv: Option<PathBuf>,
    pub dt_hours: Option<f64>,
    pub validators: Option<Vec<Validator>>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub no_plots: bool,
}

impl ValidationConfig {
    pub fn resolve(file: ConfigFile, flags: Overrides) -> Result<Self, CliError> {
        let missing = |what: &str| CliError::Config(format!("{what} is required"));
        let cfg = ValidationConfig {
            reference_csv: flags
                .reference_csv
                .or(file.reference_csv)
                .ok_or_else(|| missing("reference file (--reference)"))?,
            candidate_csv: flags
                .candidate_csv
                .or(file.candidate_csv)
                .ok_or_else(|| missing("candidate file (--candidate)"))?,
            dt_hours: flags
                .dt_hours
                .or(file.dt_hours)
                .ok_or_else(|| missing("sampling interval (--dt-hours)"))?,
            validators: flags
                .validators
                .or(file.validators)
                .unwrap_or_else(all_validators),
            output_dir: flags
                .output_dir
                .or(file.output_dir)
                .unwrap_or_else(default_output_dir),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            emit_plots: !flags.no_plots && file.emit_plots.unwrap_or(true),
            cleaning: file.cleaning,
            pdf: file.pdf,
            acf: file.acf,
            psd: file.psd,
            mfdfa: file.mfdfa,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.validators.is_empty() {
            return Err(CliError::Config("select at least one validator".into()));
        }
        if !(self.dt_hours.is_finite() && self.dt_hours > 0.0) {
            return Err(CliError::Config(format!(
                "dt_hours must be positive, got {}",
                self.dt_hours
            )));
        }
        self.cleaning.validate().map_err(CliError::from)?;
        self.mfdfa.config.validate().map_err(CliError::from)?;
        Ok(())
    }

    /// Selected validators in canonical order, without duplicates.
    pub fn selected(&self) -> Vec<Validator> {
        Validator::ALL
            .into_iter()
            .filter(|v| self.validators.contains(v))
            .collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }
}
