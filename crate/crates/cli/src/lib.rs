//! Command-line front end for the Jacobi greedy experiments.

pub mod config;
pub mod error;
pub mod output;

use std::f64::consts::PI;
use std::ffi::OsString;
use std::path::Path;

use clap::{Parser, Subcommand};
use jacobi_greedy::experiments::{
    average_block_experiment, block_sum_experiment, darboux_check, geometric_sum_identity_check, main_theorem_witness,
    near_one_experiment, norm_regimes_experiment, ExperimentConfig, SlopeFit, Table, Verdict, WitnessConfig,
};
use serde_json::json;

pub use config::{Command, RunArgs};
pub use error::CliError;
pub use output::{emit_plot_data, format_csv, read_plot_data, RunManifest};

/// `d` values scanned by `near-one`, largest first.
pub const NEAR_ONE_D_SWEEP: [f64; 5] = [2.0, 1.0, 0.5, 0.25, 0.125];
/// Largest block size used for the random-sign half of `witness`.
pub const WITNESS_AVERAGE_MAX: usize = 256;
pub const DARBOUX_THETA_MIN: f64 = 0.1;
pub const DARBOUX_POINTS: usize = 200;
pub const IDENTITY_THETA_MIN: f64 = 0.05;
pub const IDENTITY_POINTS: usize = 200;

#[derive(Debug, Parser)]
#[command(name = "jgreedy", version, about = "Greedy approximation experiments for Jacobi polynomial bases")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Growth of ‖x_n‖_p in n
    Norms(RunArgs),
    /// Constant-coefficient sums over the blocks A_N
    BlockSum(RunArgs),
    /// Square-function and random-sign norms over A_N
    AverageBlock(RunArgs),
    /// P_n(x)/n^α on the windows [1 - d/n², 1] and the largest zero
    NearOne(RunArgs),
    /// Block-sum growth against random-sign growth
    Witness(RunArgs),
    /// Scaled Darboux remainder
    DarbouxCheck(RunArgs),
    /// Closed form of the block cosine sum
    IdentityCheck(RunArgs),
}

impl Sub {
    fn split(&self) -> (Command, &RunArgs) {
        match self {
            Sub::Norms(a) => (Command::Norms, a),
            Sub::BlockSum(a) => (Command::BlockSum, a),
            Sub::AverageBlock(a) => (Command::AverageBlock, a),
            Sub::NearOne(a) => (Command::NearOne, a),
            Sub::Witness(a) => (Command::Witness, a),
            Sub::DarbouxCheck(a) => (Command::DarbouxCheck, a),
            Sub::IdentityCheck(a) => (Command::IdentityCheck, a),
        }
    }
}

/// What a command produced before anything is written.
pub struct Outcome {
    pub table: Table,
    pub summary: serde_json::Value,
    pub fit: Option<SlopeFit>,
    pub line: String,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (command, args) = cli.command.split();
    match execute(command, args) {
        Ok(line) => {
            println!("{line}");
            0
        }
        Err(e) => {
            eprintln!("jgreedy {}: {e}", command.name());
            e.exit_code()
        }
    }
}

fn execute(command: Command, args: &RunArgs) -> Result<String, CliError> {
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        // Only the first configuration in a process takes effect.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cfg = config::resolve(command, args)?;
    let outcome = run_experiment(command, &cfg)?;
    write_outputs(command, &cfg, &outcome, &args.out)?;
    Ok(outcome.line)
}

/// Writes the CSV, JSON summary, plot data and manifest into `dir`.
pub fn write_outputs(command: Command, cfg: &ExperimentConfig, outcome: &Outcome, dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    let name = command.name();
    output::write_file(&dir.join(format!("{name}.csv")), &format_csv(&outcome.table))?;
    output::write_json(&dir.join(format!("{name}.json")), &outcome.summary)?;
    if let Some(fit) = &outcome.fit {
        emit_plot_data(fit, &dir.join(format!("{name}.dat")))?;
    }
    output::write_json(&dir.join("manifest.json"), &RunManifest::new(command, cfg.clone(), dir.to_path_buf()))
}

fn fit_json(fit: &SlopeFit) -> serde_json::Value {
    json!({
        "kind": fit.kind,
        "slope": fit.slope,
        "intercept": fit.intercept,
        "max_residual": fit.max_residual,
        "dropped_first": fit.dropped_first,
    })
}

pub fn run_experiment(command: Command, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (a, b) = (cfg.params.alpha(), cfg.params.beta());
    Ok(match command {
        Command::Norms => {
            let r = norm_regimes_experiment(cfg)?;
            let line = match r.expected_slope {
                Some(e) => format!(
                    "norms ({a}, {b}) p={}: {:?} regime, slope {:.4} (expected {e:.4}), residual {:.2e}",
                    cfg.p, r.regime, r.fit.slope, r.fit.max_residual
                ),
                None => format!(
                    "norms ({a}, {b}) p={}: critical regime, ‖x_n‖^p ≈ {:.4} + {:.4} log n, relative residual {:.2e}",
                    cfg.p, r.fit.intercept, r.fit.slope, r.fit.max_residual
                ),
            };
            Outcome {
                table: r.table(),
                summary: json!({
                    "config": cfg,
                    "regime": r.regime,
                    "expected_slope": r.expected_slope,
                    "fit": fit_json(&r.fit),
                }),
                fit: Some(r.fit),
                line,
            }
        }
        Command::BlockSum => {
            let r = block_sum_experiment(cfg)?;
            Outcome {
                table: r.table(),
                summary: json!({"config": cfg, "omega": r.omega, "fit": fit_json(&r.fit)}),
                line: format!(
                    "block-sum ({a}, {b}) p={}: slope {:.4} (omega {:.4}), residual {:.2e}",
                    cfg.p, r.fit.slope, r.omega, r.fit.max_residual
                ),
                fit: Some(r.fit),
            }
        }
        Command::AverageBlock => {
            let r = average_block_experiment(cfg)?;
            let s = r.primary(cfg.mode).clone();
            Outcome {
                table: r.table(),
                summary: json!({
                    "config": cfg,
                    "orthonormal": {
                        "square_fit": fit_json(&r.orthonormal.square_fit),
                        "rademacher_fit": fit_json(&r.orthonormal.rademacher_fit),
                        "ratio_range": r.orthonormal.ratio_range,
                    },
                    "sqrt_scaled": {
                        "square_fit": fit_json(&r.sqrt_scaled.square_fit),
                        "rademacher_fit": fit_json(&r.sqrt_scaled.rademacher_fit),
                        "ratio_range": r.sqrt_scaled.ratio_range,
                    },
                }),
                line: format!(
                    "average-block ({a}, {b}) p={}: square slope {:.4}, random-sign slope {:.4}, ratio in [{:.4}, {:.4}]",
                    cfg.p, s.square_fit.slope, s.rademacher_fit.slope, s.ratio_range.0, s.ratio_range.1
                ),
                fit: Some(s.rademacher_fit),
            }
        }
        Command::NearOne => {
            let r = near_one_experiment(cfg.params, &cfg.sizes, &NEAR_ONE_D_SWEEP)?;
            let selected = r.selected_d.map_or("none".to_string(), |d| d.to_string());
            Outcome {
                table: r.table(),
                summary: json!({
                    "config": cfg,
                    "envelopes": r.envelopes,
                    "selected_d": r.selected_d,
                    "largest_roots": r.largest_roots,
                    "root_fit": fit_json(&r.root_fit),
                }),
                line: format!(
                    "near-one ({a}, {b}): largest bounded d = {selected}, 1 - z_n slope {:.4}",
                    r.root_fit.slope
                ),
                fit: Some(r.root_fit),
            }
        }
        Command::Witness => {
            let mut average_sizes: Vec<usize> =
                cfg.sizes.iter().copied().filter(|&n| n <= WITNESS_AVERAGE_MAX).collect();
            if average_sizes.len() < 2 {
                average_sizes = cfg.sizes.clone();
            }
            let wcfg = WitnessConfig {
                params: cfg.params,
                p: cfg.p,
                block_sizes: cfg.sizes.clone(),
                average_sizes,
                mesh: cfg.mesh,
                seed: cfg.seed,
                samples: cfg.samples,
                fit_tolerance: cfg.fit_tolerance,
            };
            let r = main_theorem_witness(&wcfg)?;
            let gap = if r.verdict == Verdict::ConsistentWithQuasiGreedy {
                format!("gap ≈ 0 ({:.4})", r.gap)
            } else {
                format!("gap {:.4}", r.gap)
            };
            let avg_fit = &r.average.sqrt_scaled.rademacher_fit;
            Outcome {
                table: r.table(),
                summary: json!({
                    "config": cfg,
                    "average_sizes": wcfg.average_sizes,
                    "omega": r.omega,
                    "block_fit": fit_json(&r.block.fit),
                    "average_fit": fit_json(avg_fit),
                    "gap": r.gap,
                    "residual": r.residual,
                    "sign_ratios": r.sign_ratios,
                    "verdict": r.verdict,
                }),
                line: format!(
                    "witness ({a}, {b}) p={}: block slope {:.4} (omega {:.4}), random-sign slope {:.4}, {gap} ± {:.2e}: {}",
                    cfg.p, r.block.fit.slope, r.omega, avg_fit.slope, r.residual, r.verdict
                ),
                fit: Some(r.block.fit),
            }
        }
        Command::DarbouxCheck => {
            let r = darboux_check(cfg.params, &cfg.sizes, DARBOUX_THETA_MIN, DARBOUX_POINTS)?;
            let xs: Vec<f64> = r.degrees.iter().map(|&n| n as f64).collect();
            let fit = SlopeFit::log_log(&xs, &r.scaled_errors).ok();
            Outcome {
                table: r.table(),
                summary: json!({
                    "config": cfg,
                    "scaled_errors": r.scaled_errors,
                    "growth": r.growth(),
                    "fit": fit.as_ref().map(fit_json),
                }),
                line: format!(
                    "darboux-check ({a}, {b}): scaled error {:.4} at n={} and {:.4} at n={} (ratio {:.3})",
                    r.scaled_errors[0],
                    r.degrees[0],
                    r.scaled_errors[r.scaled_errors.len() - 1],
                    r.degrees[r.degrees.len() - 1],
                    r.growth()
                ),
                fit,
            }
        }
        Command::IdentityCheck => {
            let thetas: Vec<f64> = (0..IDENTITY_POINTS)
                .map(|i| IDENTITY_THETA_MIN + (PI - 2.0 * IDENTITY_THETA_MIN) * i as f64 / (IDENTITY_POINTS - 1) as f64)
                .collect();
            let mut table = Table { header: vec!["N".into(), "max_deviation".into()], rows: Vec::new() };
            let mut worst = 0.0f64;
            for &n in &cfg.sizes {
                let dev = geometric_sum_identity_check(cfg.params, n, &thetas)?;
                worst = worst.max(dev);
                table.rows.push(vec![n as f64, dev]);
            }
            Outcome {
                table,
                summary: json!({"config": cfg, "max_deviation": worst}),
                line: format!(
                    "identity-check ({a}, {b}): max deviation {worst:.3e} over N in [{}, {}]",
                    cfg.sizes[0],
                    cfg.sizes[cfg.sizes.len() - 1]
                ),
                fit: None,
            }
        }
    })
}
