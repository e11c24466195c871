use std::path::Path;

use clap::{Args, ValueEnum};
use jacobi_greedy::experiments::{geometric_grid, ExperimentConfig};
use jacobi_greedy::{JacobiParams, NormalizationMode};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[value(rename_all = "kebab-case")]
pub enum Command {
    /// Growth of ‖x_n‖_p in n
    Norms,
    /// Constant-coefficient sums over the blocks A_N
    BlockSum,
    /// Square-function and random-sign norms over A_N
    AverageBlock,
    /// P_n(x)/n^α on the windows [1 - d/n², 1]
    NearOne,
    /// Block-sum against random-sign growth
    Witness,
    /// Scaled Darboux remainder
    DarbouxCheck,
    /// Closed form of the block cosine sum
    IdentityCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Norms => "norms",
            Command::BlockSum => "block-sum",
            Command::AverageBlock => "average-block",
            Command::NearOne => "near-one",
            Command::Witness => "witness",
            Command::DarbouxCheck => "darboux-check",
            Command::IdentityCheck => "identity-check",
        }
    }

    /// Whether the grid counts degrees `n` (otherwise block sizes `N`).
    fn degree_grid(self) -> bool {
        matches!(self, Command::Norms | Command::NearOne | Command::DarbouxCheck)
    }

    fn default_grid(self) -> (usize, usize) {
        match self {
            Command::Norms => (64, 4096),
            Command::BlockSum | Command::Witness => (8, 512),
            Command::AverageBlock => (8, 256),
            Command::NearOne => (10, 1000),
            Command::DarbouxCheck => (16, 512),
            Command::IdentityCheck => (1, 64),
        }
    }

    fn default_mode(self) -> NormalizationMode {
        match self {
            Command::BlockSum | Command::Witness => NormalizationMode::SqrtScaled,
            _ => NormalizationMode::Orthonormal,
        }
    }

    fn default_p(self) -> f64 {
        match self {
            Command::Norms => 4.0,
            _ => 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Orthonormal,
    SqrtScaled,
    Lp,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Smallest degree of the grid (norms, near-one, darboux-check)
    #[arg(long = "n-min")]
    pub n_min: Option<usize>,
    #[arg(long = "n-max")]
    pub n_max: Option<usize>,
    /// Smallest block size of the grid (block-sum, average-block, witness, identity-check)
    #[arg(long = "N-min")]
    pub big_n_min: Option<usize>,
    #[arg(long = "N-max")]
    pub big_n_max: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Relative tolerance of the quadrature refinement
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value = "out")]
    pub out: std::path::PathBuf,
    /// JSON experiment config or manifest; flags override its fields
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    /// Worker threads (default: logical processors)
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ConfigFile {
    Manifest { config: ExperimentConfig },
    Bare(ExperimentConfig),
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    let parsed: ConfigFile =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(match parsed {
        ConfigFile::Manifest { config } | ConfigFile::Bare(config) => config,
    })
}

/// Defaults, then the config file, then flags.
pub fn resolve(command: Command, args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => load_config(path)?,
        None => {
            let (lo, hi) = command.default_grid();
            let params = JacobiParams::new(0.0, 0.0)?;
            ExperimentConfig::new(params, command.default_p(), geometric_grid(lo, hi)).with_mode(command.default_mode())
        }
    };

    if args.alpha.is_some() || args.beta.is_some() {
        cfg.params =
            JacobiParams::new(args.alpha.unwrap_or(cfg.params.alpha()), args.beta.unwrap_or(cfg.params.beta()))?;
    }
    if let Some(p) = args.p {
        cfg.p = p;
    }
    if let Some(mode) = args.mode {
        cfg.mode = match mode {
            ModeArg::Orthonormal => NormalizationMode::Orthonormal,
            ModeArg::SqrtScaled => NormalizationMode::SqrtScaled,
            ModeArg::Lp => NormalizationMode::lp(cfg.p)?,
        };
    }
    let (lo, hi) = if command.degree_grid() { (args.n_min, args.n_max) } else { (args.big_n_min, args.big_n_max) };
    if lo.is_some() || hi.is_some() {
        let lo = lo.or(cfg.sizes.first().copied()).unwrap_or(1);
        let hi = hi.or(cfg.sizes.last().copied()).unwrap_or(lo);
        cfg.sizes = geometric_grid(lo, hi);
        if cfg.sizes.len() < 2 {
            return Err(CliError::Config(format!("grid {lo}..{hi} has fewer than two sizes")));
        }
    }
    if let Some(s) = args.samples {
        cfg.samples = s;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(tol) = args.tol {
        cfg.mesh = cfg.mesh.with_tolerance(tol);
    }
    cfg.mesh.validate()?;
    Ok(cfg)
}
