//! Command-line parsing for `dgff-lab`.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::exit;
use crate::experiments::run_experiment;

#[derive(Debug, Parser)]
#[command(
    name = "dgff-lab",
    version,
    about = "Discrete Gaussian free field experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw one field (or load a snapshot) and summarise it.
    Sample(Params),
    /// Green function diagonal over the inner box.
    Green(Params),
    /// Finite-N free energies per disorder sample.
    FreeEnergy(Params),
    /// Two-overlap distribution estimate.
    Overlap(Params),
    /// High-point counts and exponents.
    HighPoints(Params),
    /// Gibbs mass outside the bulk region.
    BoundaryMass(Params),
    /// Integral and derivative identities; exits with 2 when one fails.
    #[command(alias = "bk-identities")]
    BkCheck(Params),
    /// Poisson-Dirichlet second moment.
    Pd(Params),
    /// Evaluate a closed-form prediction.
    Predict(Params),
    /// Two-level GREM Monte Carlo free energy.
    GremMc(Params),
}

impl Command {
    fn split(&self) -> (Experiment, &Params) {
        match self {
            Command::Sample(p) => (Experiment::Sample, p),
            Command::Green(p) => (Experiment::Green, p),
            Command::FreeEnergy(p) => (Experiment::FreeEnergy, p),
            Command::Overlap(p) => (Experiment::Overlap, p),
            Command::HighPoints(p) => (Experiment::HighPoints, p),
            Command::BoundaryMass(p) => (Experiment::BoundaryMass, p),
            Command::BkCheck(p) => (Experiment::BkCheck, p),
            Command::Pd(p) => (Experiment::Pd, p),
            Command::Predict(p) => (Experiment::Predict, p),
            Command::GremMc(p) => (Experiment::GremMc, p),
        }
    }
}

/// Flags override values read from `--config`. Lists are comma separated and reals
/// accept `beta_c` multiples such as `2*beta_c`.
#[derive(Debug, Clone, Default, Args)]
pub struct Params {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub workers: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long = "n", short = 'n')]
    pub n: Option<String>,
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub sigma1: Option<String>,
    #[arg(long)]
    pub sigma2: Option<String>,
    #[arg(long)]
    pub sigma_sq: Option<String>,
    #[arg(long)]
    pub rho: Option<String>,
    #[arg(long)]
    pub delta: Option<String>,
    #[arg(long, alias = "lambda")]
    pub gamma: Option<String>,
    #[arg(long)]
    pub disorder: Option<String>,
    #[arg(long)]
    pub pairs: Option<String>,
    #[arg(long)]
    pub formula: Option<String>,
    #[arg(long)]
    pub atoms: Option<String>,
    #[arg(long)]
    pub samples: Option<String>,
    #[arg(long)]
    pub r: Option<String>,
    #[arg(long)]
    pub u: Option<String>,
    #[arg(long)]
    pub du: Option<String>,
    #[arg(long)]
    pub snapshot_in: Option<String>,
    #[arg(long)]
    pub snapshot_out: Option<String>,
}

impl Params {
    fn pairs(&self) -> [(&'static str, &Option<String>); 22] {
        [
            ("seed", &self.seed),
            ("workers", &self.workers),
            ("out", &self.out),
            ("n", &self.n),
            ("beta", &self.beta),
            ("alpha", &self.alpha),
            ("sigma1", &self.sigma1),
            ("sigma2", &self.sigma2),
            ("sigma_sq", &self.sigma_sq),
            ("rho", &self.rho),
            ("delta", &self.delta),
            ("gamma", &self.gamma),
            ("disorder", &self.disorder),
            ("pairs", &self.pairs),
            ("formula", &self.formula),
            ("atoms", &self.atoms),
            ("samples", &self.samples),
            ("r", &self.r),
            ("u", &self.u),
            ("du", &self.du),
            ("snapshot_in", &self.snapshot_in),
            ("snapshot_out", &self.snapshot_out),
        ]
    }
}

/// The configuration a command line describes: `--config` first, then the subcommand,
/// then each flag.
pub fn build_config(cli: &Cli) -> Result<ExperimentConfig> {
    let (experiment, params) = cli.command.split();
    let mut config = match &params.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::new(experiment),
    };
    config.experiment = experiment;
    for (key, value) in params.pairs() {
        if let Some(v) = value {
            config.set(key, v)?;
        }
    }
    Ok(config)
}

/// Runs the command line and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                exit::USAGE
            } else {
                exit::SUCCESS
            };
        }
    };
    let config = match build_config(&cli).and_then(|c| c.validate().map(|_| c)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit::USAGE;
        }
    };
    match run_experiment(&config) {
        Ok(outcome) => {
            if let Some(s) = &outcome.stdout {
                println!("{s}");
            }
            for f in &outcome.files {
                eprintln!("wrote {}", f.display());
            }
            if outcome.failures.is_empty() {
                exit::SUCCESS
            } else {
                for f in &outcome.failures {
                    eprintln!("check failed: {f}");
                }
                exit::CHECK_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit::USAGE
        }
    }
}
