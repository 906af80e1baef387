//! Flags, the JSON config file, and their merge into one validated run configuration.

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Print f_r for an operator.
    Fr,
    /// Print a witness report for a measured or computed expectation.
    Verdict,
    /// Margin curve over a grid of diffusion angles.
    Scan,
    /// Largest diffusion angle with positive margin.
    Threshold,
    /// Run the alternating r-SE solver on a dense operator.
    Oracle,
    /// Schmidt decomposition of a state.
    Schmidt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorArg {
    Matched,
    #[value(name = "flat_sinc", alias = "flat-sinc")]
    FlatSinc,
    Projector,
    File,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "schmidt", version, about = "Schmidt number witnesses and phase-diffusion thresholds")]
pub struct Cli {
    /// Command to run; may instead come from the config file.
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// JSON file with any of the options below; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, conflicts_with = "db")]
    pub epsilon: Option<f64>,
    /// Squeezing in dB, converted to epsilon.
    #[arg(long)]
    pub db: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub delta_phi_deg: Option<f64>,
    #[arg(long, value_enum)]
    pub operator: Option<OperatorArg>,
    /// Operator JSON (gamma `{n, re, im}` or dense `{d_a, d_b, re, im}`).
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Local dimension for `--operator identity`.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub r: Option<usize>,
    /// Fock-space cutoff (default 100).
    #[arg(long)]
    pub cutoff: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads, 0 for one per core.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Measured expectation value for `verdict`.
    #[arg(long, allow_negative_numbers = true)]
    pub expectation: Option<f64>,
    /// Pure state JSON `{d_a, d_b, re, im}`.
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Angle spacing for `scan` and the coarse grid of `threshold` (degrees).
    #[arg(long)]
    pub step_deg: Option<f64>,
    /// Bisection tolerance for `threshold` (degrees).
    #[arg(long)]
    pub refine_tol_deg: Option<f64>,
}

/// Config-file mirror of [`Cli`]; every field optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub command: Option<Command>,
    pub epsilon: Option<f64>,
    pub db: Option<f64>,
    pub delta_phi_deg: Option<f64>,
    pub operator: Option<OperatorArg>,
    pub file: Option<PathBuf>,
    pub d: Option<usize>,
    pub r: Option<usize>,
    pub cutoff: Option<usize>,
    pub restarts: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub max_iters: Option<usize>,
    pub expectation: Option<f64>,
    pub state: Option<PathBuf>,
    pub step_deg: Option<f64>,
    pub refine_tol_deg: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("config: cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("config: {e}")))
    }
}

/// Merged settings. Optional fields are validated by the command that needs them.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub epsilon: Option<f64>,
    pub delta_phi_deg: Option<f64>,
    pub operator: Option<OperatorArg>,
    pub file: Option<PathBuf>,
    pub d: Option<usize>,
    pub r: Option<usize>,
    pub cutoff: usize,
    pub restarts: usize,
    pub seed: u64,
    pub threads: usize,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub max_iters: usize,
    pub expectation: Option<f64>,
    pub state: Option<PathBuf>,
    pub step_deg: Option<f64>,
    pub refine_tol_deg: f64,
}

impl RunConfig {
    pub fn merge(cli: Cli, file: FileConfig) -> Result<Self, CliError> {
        let command = cli
            .command
            .or(file.command)
            .ok_or_else(|| CliError::config("command: missing (pass it positionally or set `command` in the config)"))?;
        let (epsilon, db) = if cli.epsilon.is_some() || cli.db.is_some() {
            (cli.epsilon, cli.db)
        } else {
            (file.epsilon, file.db)
        };
        let epsilon = match (epsilon, db) {
            (Some(_), Some(_)) => return Err(CliError::config("epsilon: give either epsilon or db, not both")),
            (Some(e), None) => Some(e),
            (None, Some(db)) => Some(
                schmidt_core::tmsv::db_to_epsilon(db).map_err(|e| CliError::config(format!("db: {e}")))?,
            ),
            (None, None) => None,
        };
        if let Some(e) = epsilon {
            if !(e > 0.0 && e < 1.0) {
                return Err(CliError::config(format!("epsilon: must lie in (0, 1), got {e}")));
            }
        }
        let delta_phi_deg = cli.delta_phi_deg.or(file.delta_phi_deg);
        if let Some(a) = delta_phi_deg {
            if !(0.0..=180.0).contains(&a) {
                return Err(CliError::config(format!("delta_phi_deg: must lie in [0, 180], got {a}")));
            }
        }
        let r = cli.r.or(file.r);
        if r == Some(0) {
            return Err(CliError::config("r: must be at least 1"));
        }
        let d = cli.d.or(file.d);
        if d == Some(0) {
            return Err(CliError::config("d: must be at least 1"));
        }
        let restarts = cli.restarts.or(file.restarts).unwrap_or(100);
        if restarts == 0 {
            return Err(CliError::config("restarts: must be at least 1"));
        }
        let max_iters = cli.max_iters.or(file.max_iters).unwrap_or(500);
        if max_iters == 0 {
            return Err(CliError::config("max_iters: must be at least 1"));
        }
        let step_deg = cli.step_deg.or(file.step_deg);
        if let Some(s) = step_deg {
            if !(s > 0.0 && s <= 180.0) {
                return Err(CliError::config(format!("step_deg: must lie in (0, 180], got {s}")));
            }
        }
        let refine_tol_deg = cli.refine_tol_deg.or(file.refine_tol_deg).unwrap_or(0.01);
        if refine_tol_deg.is_nan() || refine_tol_deg <= 0.0 {
            return Err(CliError::config(format!("refine_tol_deg: must be positive, got {refine_tol_deg}")));
        }
        let expectation = cli.expectation.or(file.expectation);
        if expectation.is_some_and(|x| !x.is_finite()) {
            return Err(CliError::config("expectation: must be finite"));
        }
        Ok(RunConfig {
            command,
            epsilon,
            delta_phi_deg,
            operator: cli.operator.or(file.operator),
            file: cli.file.or(file.file),
            d,
            r,
            cutoff: cli.cutoff.or(file.cutoff).unwrap_or(100),
            restarts,
            seed: cli.seed.or(file.seed).unwrap_or(0),
            threads: cli.threads.or(file.threads).unwrap_or(0),
            out: cli.out.or(file.out),
            format: cli.format.or(file.format),
            max_iters,
            expectation,
            state: cli.state.or(file.state),
            step_deg,
            refine_tol_deg,
        })
    }

    pub fn require_epsilon(&self) -> Result<f64, CliError> {
        self.epsilon.ok_or_else(|| CliError::config("epsilon: required (or give --db)"))
    }

    pub fn require_r(&self) -> Result<usize, CliError> {
        self.r.ok_or_else(|| CliError::config("r: required"))
    }

    pub fn require_delta_phi(&self) -> Result<f64, CliError> {
        self.delta_phi_deg
            .map(f64::to_radians)
            .ok_or_else(|| CliError::config("delta_phi_deg: required for this operator"))
    }

    pub fn require_operator(&self) -> Result<OperatorArg, CliError> {
        self.operator.ok_or_else(|| CliError::config("operator: required"))
    }
}
