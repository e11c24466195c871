//! File formats.
//!
//! * `<command>.csv`: fixed header row, then one row per grid point. Every
//!   value is printed as `{:.16e}` (17 significant digits).
//! * `<command>.json`: summary with the resolved config, fits and verdict.
//! * `<command>.dat`: `log10(size) log10(value)` per line, whitespace separated.
//! * `<command>.fit.json`: fitted line parameters for the `.dat` file.
//! * `manifest.json`: [`RunManifest`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use jacobi_greedy::experiments::{ExperimentConfig, FitKind, SlopeFit, Table};
use serde::{Deserialize, Serialize};

use crate::config::Command;
use crate::error::CliError;

pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn format_csv(table: &Table) -> String {
    let mut out = table.header.join(",");
    out.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(|&v| format_value(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    text.push('\n');
    write_file(path, &text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSidecar {
    pub kind: FitKind,
    pub slope: f64,
    pub intercept: f64,
    pub max_residual: f64,
    pub dropped_first: bool,
    pub points: usize,
}

/// Writes the fit's samples to `path` and its line parameters to
/// `path` with extension `fit.json`. Returns both paths.
pub fn emit_plot_data(fit: &SlopeFit, path: &Path) -> Result<(PathBuf, PathBuf), CliError> {
    if fit.xs.is_empty() || fit.xs.len() != fit.ys.len() {
        return Err(CliError::EmptyFit);
    }
    let mut data = String::new();
    for (x, y) in fit.xs.iter().zip(&fit.ys) {
        writeln!(data, "{} {}", format_value(x.log10()), format_value(y.log10())).expect("write to String");
    }
    write_file(path, &data)?;
    let sidecar = path.with_extension("fit.json");
    write_json(
        &sidecar,
        &FitSidecar {
            kind: fit.kind,
            slope: fit.slope,
            intercept: fit.intercept,
            max_residual: fit.max_residual,
            dropped_first: fit.dropped_first,
            points: fit.xs.len(),
        },
    )?;
    Ok((path.to_path_buf(), sidecar))
}

/// Reads a `.dat` file back into `(size, value)` pairs.
pub fn read_plot_data(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let mut cols = line.split_whitespace().map(str::parse::<f64>);
            match (cols.next(), cols.next(), cols.next()) {
                (Some(Ok(a)), Some(Ok(b)), None) => Ok((10f64.powf(a), 10f64.powf(b))),
                _ => Err(CliError::Config(format!("malformed plot line {line:?}"))),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Command,
    pub config: ExperimentConfig,
    pub output_dir: PathBuf,
    pub tool_version: String,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command: Command, config: ExperimentConfig, output_dir: PathBuf) -> Self {
        Self {
            command,
            config,
            output_dir,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }
}
