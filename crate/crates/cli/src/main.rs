use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use scenval::synthetic::{as_scenario_set, generate_with_dt, quantize, GeneratorKind, GeneratorSpec};
use scenval::ScenarioSet;
use scenval_cli::output::write_scenario_csv;
use scenval_cli::{run_validation, CliError, ConfigFile, Overrides, ValidationConfig, Validator};

/// Compare a candidate set of time-series scenarios against a reference set.
#[derive(Parser)]
#[command(name = "scenval", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the selected validators (all by default) and write the report.
    Validate {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated subset of pdf, acf, psd, mfdfa.
        #[arg(long, value_delimiter = ',')]
        validators: Option<Vec<ValidatorArg>>,
    },
    /// Value distributions of all timesteps and of scenario means.
    Pdf(RunArgs),
    /// Autocorrelation of sampled reference scenarios and their best matches.
    Acf(RunArgs),
    /// Power spectral density of the concatenated scenarios.
    Psd(RunArgs),
    /// Multifractal fluctuation functions and generalized Hurst exponents.
    Mfdfa(RunArgs),
    /// Write a seeded synthetic scenario set as CSV.
    Synthesize(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    candidate: Option<PathBuf>,
    /// Sampling interval in hours.
    #[arg(long)]
    dt_hours: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write CSV and JSON only.
    #[arg(long)]
    no_plots: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ValidatorArg {
    Pdf,
    Acf,
    Psd,
    Mfdfa,
}

impl From<ValidatorArg> for Validator {
    fn from(v: ValidatorArg) -> Self {
        match v {
            ValidatorArg::Pdf => Validator::Pdf,
            ValidatorArg::Acf => Validator::Acf,
            ValidatorArg::Psd => Validator::Psd,
            ValidatorArg::Mfdfa => Validator::Mfdfa,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    White,
    Ar1,
    Sine,
    RandomWalk,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// AR(1) coefficient.
    #[arg(long, default_value_t = 0.9)]
    phi: f64,
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
    /// Sine period in timesteps.
    #[arg(long, default_value_t = 96.0)]
    period_steps: f64,
    /// Constant added to every value.
    #[arg(long, default_value_t = 0.0)]
    offset: f64,
    /// Round to this many decimals.
    #[arg(long)]
    decimals: Option<u32>,
    #[arg(long)]
    scenarios: usize,
    #[arg(long)]
    scenario_len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
}

fn validate(run: RunArgs, validators: Option<Vec<Validator>>) -> Result<(), CliError> {
    let file = match &run.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let cfg = ValidationConfig::resolve(
        file,
        Overrides {
            reference_csv: run.reference,
            candidate_csv: run.candidate,
            dt_hours: run.dt_hours,
            validators,
            output_dir: run.out,
            seed: run.seed,
            no_plots: run.no_plots,
        },
    )?;
    let (bundle, manifest) = run_validation(&cfg)?;
    for w in &bundle.warnings {
        eprintln!("warning: {}", serde_json::to_string(w).unwrap_or_default());
    }
    for name in manifest {
        println!("{}", cfg.output_dir.join(name).display());
    }
    Ok(())
}

fn synthesize(a: SynthArgs) -> Result<(), CliError> {
    let kind = match a.kind {
        KindArg::White => GeneratorKind::WhiteGaussian { sigma: a.sigma },
        KindArg::Ar1 => GeneratorKind::Ar1 {
            sigma: a.sigma,
            phi: a.phi,
        },
        KindArg::Sine => GeneratorKind::Sine {
            amplitude: a.amplitude,
            period_steps: a.period_steps,
        },
        KindArg::RandomWalk => GeneratorKind::RandomWalk { sigma: a.sigma },
    };
    let spec = GeneratorSpec {
        kind,
        n: a.scenarios * a.scenario_len,
        seed: a.seed,
    };
    let (set, _) = as_scenario_set(generate_with_dt(&spec, 1.0)?, a.scenario_len)?;
    let mut flat: Vec<f64> = set.as_flat().iter().map(|v| v + a.offset).collect();
    if let Some(d) = a.decimals {
        flat = quantize(&flat, d);
    }
    let set = ScenarioSet::from_flat(flat, a.scenario_len, 1.0)?;
    write_scenario_csv(&set, &a.out)?;
    println!("{}", a.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Validate { run, validators } => {
            validate(run, validators.map(|v| v.into_iter().map(Into::into).collect()))
        }
        Command::Pdf(run) => validate(run, Some(vec![Validator::Pdf])),
        Command::Acf(run) => validate(run, Some(vec![Validator::Acf])),
        Command::Psd(run) => validate(run, Some(vec![Validator::Psd])),
        Command::Mfdfa(run) => validate(run, Some(vec![Validator::Mfdfa])),
        Command::Synthesize(a) => synthesize(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
