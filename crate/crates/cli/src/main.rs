//! `schmidt`: command-line front end for `schmidt-core`.
//!
//! Exit status is 0 on success, 2 when the input is invalid and 3 when a
//! numerical routine fails.

mod config;

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;

use schmidt_core::bipartite::{schmidt_decompose, tmsv_pure, PureState};
use schmidt_core::numerics::{matrix_to_parts, DEFAULT_RANK_TOL};
use schmidt_core::operators::{
    expectation_mixed, flat_sinc_gamma, tmsv_gamma, DenseOperator, DiagonalMixedState, GammaOperator, Observable,
    ProjectorOperator,
};
use schmidt_core::schmidt_number::{fr_oracle, ClosedFormFr, FrSource, FrValue, OracleOptions, WitnessReport};
use schmidt_core::tmsv::{angle_grid, margin_curve, threshold, OperatorKind, Scenario, ThresholdOptions};
use schmidt_core::Error;

use config::{Cli, Command, FileConfig, Format, OperatorArg, RunConfig};

/// Largest gamma size converted to a dense operator (dimension `n^2`).
const MAX_DENSE_GAMMA: usize = 16;

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NoConvergence | Error::MetricNotPsd(_) | Error::DegenerateMetric | Error::NotReal(_) => 3,
            _ => 2,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Serialize)]
struct FrOutput {
    r: usize,
    f_r: f64,
    f_r_source: FrSource,
    approximate: bool,
}

#[derive(Serialize)]
struct MatrixParts {
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

/// Columns of `left_basis` / `right_basis` are the Schmidt vectors `e_k` / `f_k`.
#[derive(Serialize)]
struct SchmidtOutput {
    d_a: usize,
    d_b: usize,
    rank: usize,
    coefficients: Vec<f64>,
    left_basis: MatrixParts,
    right_basis: MatrixParts,
}

enum Op {
    Gamma(GammaOperator),
    Projector(ProjectorOperator),
    Dense(DenseOperator),
}

fn read_json(path: &Path, field: &str) -> Result<serde_json::Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("{field}: cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{field}: {e}")))
}

fn load_state(path: &Path) -> Result<PureState, CliError> {
    serde_json::from_value(read_json(path, "state")?).map_err(|e| CliError::config(format!("state: {e}")))
}

fn build_operator(cfg: &RunConfig) -> Result<Op, CliError> {
    Ok(match cfg.require_operator()? {
        OperatorArg::Matched => Op::Gamma(tmsv_gamma(cfg.require_epsilon()?, cfg.require_delta_phi()?, cfg.cutoff)?),
        OperatorArg::FlatSinc => Op::Gamma(flat_sinc_gamma(cfg.require_delta_phi()?, cfg.cutoff)?),
        OperatorArg::Projector => {
            let target = match &cfg.state {
                Some(path) => load_state(path)?,
                None => tmsv_pure(cfg.require_epsilon()?, 0.0, cfg.cutoff)?,
            };
            Op::Projector(ProjectorOperator::new(target)?)
        }
        OperatorArg::File => {
            let path = cfg.file.as_ref().ok_or_else(|| CliError::config("file: required for --operator file"))?;
            let value = read_json(path, "file")?;
            if value.get("n").is_some() {
                Op::Gamma(serde_json::from_value(value).map_err(|e| CliError::config(format!("file: {e}")))?)
            } else {
                Op::Dense(serde_json::from_value(value).map_err(|e| CliError::config(format!("file: {e}")))?)
            }
        }
        OperatorArg::Identity => {
            let d = cfg.d.ok_or_else(|| CliError::config("d: required for --operator identity"))?;
            Op::Dense(DenseOperator::identity(d, d))
        }
    })
}

fn to_dense(op: &Op) -> Result<DenseOperator, CliError> {
    Ok(match op {
        Op::Gamma(g) if g.n() > MAX_DENSE_GAMMA => {
            return Err(CliError::config(format!(
                "cutoff: a gamma operator of size {} is too large for the dense solver (at most {MAX_DENSE_GAMMA})",
                g.n()
            )))
        }
        Op::Gamma(g) => g.to_dense(),
        Op::Projector(p) => p.to_dense(),
        Op::Dense(d) => d.clone(),
    })
}

fn oracle_options(cfg: &RunConfig) -> OracleOptions {
    OracleOptions {
        restarts: cfg.restarts,
        max_iters: cfg.max_iters,
        seed: cfg.seed,
        ..OracleOptions::default()
    }
}

fn oracle_fr(op: &Op, r: usize, cfg: &RunConfig) -> Result<FrValue, CliError> {
    let dense = to_dense(op)?;
    let r = r.min(dense.d_a().min(dense.d_b()));
    let outcome = fr_oracle(&dense, r, &oracle_options(cfg))?;
    Ok(FrValue {
        value: outcome.solution.value,
        source: FrSource::Oracle,
        approximate: true,
    })
}

fn compute_fr(op: &Op, r: usize, cfg: &RunConfig) -> Result<FrValue, CliError> {
    match op {
        Op::Projector(p) => Ok(p.closed_form_fr(r)?),
        Op::Gamma(g) => match g.closed_form_fr(r) {
            // principal submatrices undershoot for indefinite gamma; fall back to the dense solver
            Err(Error::IndefiniteGamma(_)) => oracle_fr(op, r, cfg),
            other => Ok(other?),
        },
        Op::Dense(_) => oracle_fr(op, r, cfg),
    }
}

fn expectation_for(op: &Op, cfg: &RunConfig) -> Result<f64, CliError> {
    if let Some(x) = cfg.expectation {
        return Ok(x);
    }
    if let Some(path) = &cfg.state {
        if !matches!(cfg.operator, Some(OperatorArg::Projector)) {
            let psi = load_state(path)?;
            return Ok(match op {
                Op::Gamma(g) => g.expectation_pure(&psi)?,
                Op::Projector(p) => p.expectation_pure(&psi)?,
                Op::Dense(d) => d.expectation_pure(&psi)?,
            });
        }
    }
    match (op, cfg.operator, cfg.epsilon) {
        (Op::Gamma(g), Some(OperatorArg::Matched | OperatorArg::FlatSinc), Some(eps)) => {
            let rho = DiagonalMixedState::tmsv_phase_randomized(eps, cfg.require_delta_phi()?, cfg.cutoff)?;
            Ok(expectation_mixed(g, &rho)?.value)
        }
        _ => Err(CliError::config(
            "expectation: required (or give --state, or --epsilon with a matched/flat_sinc operator)",
        )),
    }
}

fn scenario(cfg: &RunConfig) -> Result<Scenario, CliError> {
    let kind = match cfg.require_operator()? {
        OperatorArg::Matched => OperatorKind::Matched,
        OperatorArg::FlatSinc => OperatorKind::FlatSinc,
        other => {
            return Err(CliError::config(format!(
                "operator: `{}` has no diffusion scenario, use matched or flat_sinc",
                serde_json::to_value(other).unwrap().as_str().unwrap_or("?")
            )))
        }
    };
    Ok(Scenario::new(cfg.require_epsilon()?, cfg.cutoff, kind, cfg.require_r()?)?)
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

fn json_only(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.format == Some(Format::Csv) {
        return Err(CliError::config("format: csv is only available for scan"));
    }
    Ok(())
}

fn run(cfg: &RunConfig) -> Result<String, CliError> {
    match cfg.command {
        Command::Fr => {
            json_only(cfg)?;
            let r = cfg.require_r()?;
            let op = build_operator(cfg)?;
            let fr = compute_fr(&op, r, cfg)?;
            Ok(pretty(&FrOutput {
                r,
                f_r: fr.value,
                f_r_source: fr.source,
                approximate: fr.approximate,
            }))
        }
        Command::Verdict => {
            json_only(cfg)?;
            let r = cfg.require_r()?;
            let op = build_operator(cfg)?;
            let expectation = expectation_for(&op, cfg)?;
            let fr = compute_fr(&op, r, cfg)?;
            Ok(pretty(&WitnessReport::new(r, fr, expectation, None)))
        }
        Command::Scan => {
            let s = scenario(cfg)?;
            let grid = angle_grid(cfg.step_deg.unwrap_or(1.0))?;
            let curve = margin_curve(&s, &grid)?;
            Ok(match cfg.format.unwrap_or(Format::Csv) {
                Format::Csv => curve.to_csv(),
                Format::Json => pretty(&curve),
            })
        }
        Command::Threshold => {
            json_only(cfg)?;
            let s = scenario(cfg)?;
            let opts = ThresholdOptions {
                coarse_step_deg: cfg.step_deg.unwrap_or(0.5),
                refine_tol_deg: cfg.refine_tol_deg,
            };
            Ok(pretty(&threshold(&s, &opts)?))
        }
        Command::Oracle => {
            json_only(cfg)?;
            let r = cfg.require_r()?;
            let dense = to_dense(&build_operator(cfg)?)?;
            Ok(pretty(&fr_oracle(&dense, r, &oracle_options(cfg))?))
        }
        Command::Schmidt => {
            json_only(cfg)?;
            let psi = match &cfg.state {
                Some(path) => load_state(path)?,
                None => tmsv_pure(cfg.require_epsilon()?, 0.0, cfg.cutoff)?,
            };
            let dec = schmidt_decompose(&psi, DEFAULT_RANK_TOL)?;
            let (left_re, left_im) = matrix_to_parts(&dec.left_basis);
            let (right_re, right_im) = matrix_to_parts(&dec.right_basis);
            Ok(pretty(&SchmidtOutput {
                d_a: psi.d_a(),
                d_b: psi.d_b(),
                rank: dec.rank(),
                coefficients: dec.coefficients.clone(),
                left_basis: MatrixParts { re: left_re, im: left_im },
                right_basis: MatrixParts { re: right_re, im: right_im },
            }))
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let file_cfg = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let cfg = RunConfig::merge(cli, file_cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::config(format!("threads: {e}")))?;
    let output = pool.install(|| run(&cfg))?;
    match &cfg.out {
        Some(path) => std::fs::write(path, output)
            .map_err(|e| CliError::config(format!("out: cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(output.as_bytes())
            .map_err(|e| CliError::config(format!("out: {e}"))),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
