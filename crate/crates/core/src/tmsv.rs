//! Phase-randomized two-mode squeezed vacuum: detection margins versus phase
//! diffusion, threshold search, and squeezing conversions.
//!
//! Angles are degrees at every public interface and radians inside.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{expectation_mixed, flat_sinc_gamma, sinc, tmsv_gamma, DiagonalMixedState};
use crate::schmidt_number::{f1_gamma, f2_gamma, fr_gamma, DEFAULT_ENUMERATION_CAP};

pub const DEFAULT_CUTOFF: usize = 100;
pub const DEFAULT_K_MAX: usize = 300;
pub const DEFAULT_K_SEARCH: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// `tmsv_gamma` with the state's own `epsilon` and `delta_phi`.
    Matched,
    /// `gamma[m,n] = sinc(delta_phi (m - n))`.
    FlatSinc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioJson")]
pub struct Scenario {
    pub epsilon: f64,
    pub cutoff: usize,
    pub operator_kind: OperatorKind,
    pub r: usize,
}

#[derive(Deserialize)]
struct ScenarioJson {
    epsilon: f64,
    #[serde(default = "default_cutoff")]
    cutoff: usize,
    operator_kind: OperatorKind,
    r: usize,
}

fn default_cutoff() -> usize {
    DEFAULT_CUTOFF
}

impl TryFrom<ScenarioJson> for Scenario {
    type Error = Error;
    fn try_from(j: ScenarioJson) -> Result<Self> {
        Scenario::new(j.epsilon, j.cutoff, j.operator_kind, j.r)
    }
}

impl Scenario {
    pub fn new(epsilon: f64, cutoff: usize, operator_kind: OperatorKind, r: usize) -> Result<Self> {
        check_epsilon(epsilon)?;
        if r == 0 {
            return Err(Error::bad("r", "must be at least 1"));
        }
        if cutoff < r {
            return Err(Error::bad("cutoff", format!("must be at least r = {r}, got {cutoff}")));
        }
        Ok(Scenario {
            epsilon,
            cutoff,
            operator_kind,
            r,
        })
    }

    /// `(expectation, f_r, f_r approximate)` at one angle in radians.
    fn evaluate(&self, delta_phi: f64) -> Result<(f64, f64, bool)> {
        let (eps, n) = (self.epsilon, self.cutoff);
        match self.operator_kind {
            OperatorKind::Matched => {
                let expectation = expectation_closed_form_rad(eps, delta_phi, DEFAULT_K_MAX);
                let (f_r, approx) = match self.r {
                    1 => (1.0 - eps * eps, false),
                    2 => (f2_matched_rad(eps, delta_phi, DEFAULT_K_SEARCH.min(n)), false),
                    r => {
                        let s = fr_gamma(&tmsv_gamma(eps, delta_phi, n)?, r, DEFAULT_ENUMERATION_CAP)?;
                        (s.value, s.approximate)
                    }
                };
                Ok((expectation, f_r, approx))
            }
            OperatorKind::FlatSinc => {
                let op = flat_sinc_gamma(delta_phi, n)?;
                let rho = DiagonalMixedState::tmsv_phase_randomized(eps, delta_phi, n)?;
                let expectation = expectation_mixed(&op, &rho)?.value;
                let (f_r, approx) = match self.r {
                    1 => (f1_gamma(&op), false),
                    2 => (f2_gamma(&op)?, false),
                    r => {
                        let s = fr_gamma(&op, r, DEFAULT_ENUMERATION_CAP)?;
                        (s.value, s.approximate)
                    }
                };
                Ok((expectation, f_r, approx))
            }
        }
    }

    /// Detection margin `<L> - f_r(L)` at `delta_phi_deg`.
    pub fn margin(&self, delta_phi_deg: f64) -> Result<f64> {
        check_angle(delta_phi_deg)?;
        let (e, f, _) = self.evaluate(delta_phi_deg.to_radians())?;
        Ok(e - f)
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::bad("epsilon", format!("must lie in (0, 1), got {epsilon}")))
    }
}

fn check_angle(deg: f64) -> Result<()> {
    if deg > 0.0 && deg <= 180.0 {
        Ok(())
    } else {
        Err(Error::bad("delta_phi_deg", format!("must lie in (0, 180], got {deg}")))
    }
}

fn check_delta_phi_deg(deg: f64) -> Result<()> {
    if (0.0..=180.0).contains(&deg) {
        Ok(())
    } else {
        Err(Error::bad("delta_phi_deg", format!("must lie in [0, 180], got {deg}")))
    }
}

fn expectation_closed_form_rad(epsilon: f64, delta_phi: f64, k_max: usize) -> f64 {
    let e2 = epsilon * epsilon;
    let mut power = 1.0;
    let mut tail = 0.0;
    for k in 1..=k_max {
        power *= e2;
        let s = sinc(delta_phi * k as f64);
        tail += power * s * s;
    }
    (1.0 - e2) / (1.0 + e2) * (1.0 + 2.0 * tail)
}

/// `<L>` for the matched pair:
/// `(1 - eps^2)/(1 + eps^2) (1 + 2 sum_{k=1}^{k_max} eps^{2k} sinc^2(delta_phi k))`.
pub fn expectation_closed_form(epsilon: f64, delta_phi_deg: f64, k_max: usize) -> Result<f64> {
    check_epsilon(epsilon)?;
    check_delta_phi_deg(delta_phi_deg)?;
    Ok(expectation_closed_form_rad(epsilon, delta_phi_deg.to_radians(), k_max))
}

/// Bound on the terms of [`expectation_closed_form`] beyond `k_max`.
pub fn closed_form_remainder_bound(epsilon: f64, k_max: usize) -> f64 {
    let e2 = epsilon * epsilon;
    2.0 * e2.powi(k_max as i32 + 1) / (1.0 - e2)
}

fn f2_matched_rad(epsilon: f64, delta_phi: f64, k_search: usize) -> f64 {
    let e2 = epsilon * epsilon;
    let mut power = 1.0;
    let mut best = f64::NEG_INFINITY;
    for k in 1..=k_search {
        power *= e2;
        let s = sinc(delta_phi * k as f64);
        let v = 1.0 + power + ((1.0 - power) * (1.0 - power) + 4.0 * power * s * s).sqrt();
        best = best.max(v);
    }
    0.5 * (1.0 - e2) * best
}

/// `f_2` of the matched operator: the `m = 0` pair maximum over `k = 1..=k_search`.
pub fn f2_matched(epsilon: f64, delta_phi_deg: f64, k_search: usize) -> Result<f64> {
    check_epsilon(epsilon)?;
    check_delta_phi_deg(delta_phi_deg)?;
    if k_search == 0 {
        return Err(Error::bad("k_search", "must be at least 1"));
    }
    Ok(f2_matched_rad(epsilon, delta_phi_deg.to_radians(), k_search))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginCurve {
    pub delta_phi_deg: Vec<f64>,
    pub expectation: Vec<f64>,
    pub f_r: Vec<f64>,
    pub margin: Vec<f64>,
    #[serde(default)]
    pub approximate_f_r: bool,
}

pub const CURVE_CSV_HEADER: &str = "delta_phi_deg,expectation,f_r,margin";

impl MarginCurve {
    pub fn len(&self) -> usize {
        self.delta_phi_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta_phi_deg.is_empty()
    }

    /// Twelve significant digits per value.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.len() + 1));
        out.push_str(CURVE_CSV_HEADER);
        out.push('\n');
        for i in 0..self.len() {
            let _ = writeln!(
                out,
                "{:.11e},{:.11e},{:.11e},{:.11e}",
                self.delta_phi_deg[i], self.expectation[i], self.f_r[i], self.margin[i]
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some(CURVE_CSV_HEADER) {
            return Err(Error::bad("csv", format!("expected header `{CURVE_CSV_HEADER}`")));
        }
        let mut curve = MarginCurve {
            delta_phi_deg: Vec::new(),
            expectation: Vec::new(),
            f_r: Vec::new(),
            margin: Vec::new(),
            approximate_f_r: false,
        };
        for (row, line) in lines.enumerate() {
            let values: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::bad("csv", format!("row {}: {e}", row + 1)))?;
            if values.len() != 4 {
                return Err(Error::bad("csv", format!("row {} has {} fields", row + 1, values.len())));
            }
            curve.delta_phi_deg.push(values[0]);
            curve.expectation.push(values[1]);
            curve.f_r.push(values[2]);
            curve.margin.push(values[3]);
        }
        Ok(curve)
    }

    /// Display copy with every column divided by the largest expectation value.
    /// Zero crossings are unchanged.
    pub fn normalized(&self) -> Self {
        let peak = self.expectation.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let scale = if peak > 0.0 { peak } else { 1.0 };
        let div = |v: &[f64]| v.iter().map(|x| x / scale).collect();
        MarginCurve {
            delta_phi_deg: self.delta_phi_deg.clone(),
            expectation: div(&self.expectation),
            f_r: div(&self.f_r),
            margin: div(&self.margin),
            approximate_f_r: self.approximate_f_r,
        }
    }
}

/// Expectation, `f_r` and margin on each angle. Angles must be strictly increasing in (0, 180].
pub fn margin_curve(s: &Scenario, angles_deg: &[f64]) -> Result<MarginCurve> {
    for &a in angles_deg {
        check_angle(a)?;
    }
    if angles_deg.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::bad("angles_deg", "must be strictly increasing"));
    }
    let rows: Vec<(f64, f64, bool)> = angles_deg
        .par_iter()
        .map(|a| s.evaluate(a.to_radians()))
        .collect::<Result<_>>()?;
    Ok(MarginCurve {
        delta_phi_deg: angles_deg.to_vec(),
        expectation: rows.iter().map(|r| r.0).collect(),
        f_r: rows.iter().map(|r| r.1).collect(),
        margin: rows.iter().map(|r| r.0 - r.1).collect(),
        approximate_f_r: rows.iter().any(|r| r.2),
    })
}

/// `step, 2 step, ...` up to and including 180.
pub fn angle_grid(step_deg: f64) -> Result<Vec<f64>> {
    if !(step_deg > 0.0 && step_deg <= 180.0) {
        return Err(Error::bad("step_deg", format!("must lie in (0, 180], got {step_deg}")));
    }
    let count = (180.0 / step_deg).floor() as usize;
    let mut grid: Vec<f64> = (1..=count).map(|i| i as f64 * step_deg).collect();
    if grid.last().is_none_or(|&last| 180.0 - last > 1e-9 * step_deg) {
        grid.push(180.0);
    } else if let Some(last) = grid.last_mut() {
        *last = 180.0;
    }
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdOptions {
    pub coarse_step_deg: f64,
    pub refine_tol_deg: f64,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        ThresholdOptions {
            coarse_step_deg: 0.5,
            refine_tol_deg: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub scenario: Scenario,
    pub r: usize,
    pub threshold_deg: f64,
    /// Every coarse-grid positive-to-nonpositive transition, each refined.
    pub crossings_deg: Vec<f64>,
    pub approximate_f_r: bool,
}

/// Largest diffusion angle up to which the margin stays positive.
///
/// The coarse grid locates every positive-to-nonpositive transition; each is
/// refined by bisection and the last one is the threshold. Returns 0 when the
/// margin is never positive and 180 when it never drops to zero or below.
pub fn threshold(s: &Scenario, opts: &ThresholdOptions) -> Result<ThresholdReport> {
    if opts.refine_tol_deg.is_nan() || opts.refine_tol_deg <= 0.0 {
        return Err(Error::bad("refine_tol_deg", "must be positive"));
    }
    let grid = angle_grid(opts.coarse_step_deg)?;
    let curve = margin_curve(s, &grid)?;
    let mut approximate = curve.approximate_f_r;
    let brackets: Vec<(f64, f64)> = (0..grid.len() - 1)
        .filter(|&i| curve.margin[i] > 0.0 && curve.margin[i + 1] <= 0.0)
        .map(|i| (grid[i], grid[i + 1]))
        .collect();
    let refined: Vec<(f64, bool)> = brackets
        .par_iter()
        .map(|&(lo, hi)| bisect(s, lo, hi, opts.refine_tol_deg))
        .collect::<Result<_>>()?;
    approximate |= refined.iter().any(|r| r.1);
    let crossings: Vec<f64> = refined.iter().map(|r| r.0).collect();
    let threshold_deg = match crossings.last() {
        Some(&c) => c,
        None if curve.margin.iter().all(|&m| m <= 0.0) => 0.0,
        None if curve.margin.iter().all(|&m| m > 0.0) => 180.0,
        // positive only after the last nonpositive point: the grid never saw it drop again
        None => 180.0,
    };
    Ok(ThresholdReport {
        scenario: *s,
        r: s.r,
        threshold_deg,
        crossings_deg: crossings,
        approximate_f_r: approximate,
    })
}

fn bisect(s: &Scenario, mut lo: f64, mut hi: f64, tol: f64) -> Result<(f64, bool)> {
    let mut approximate = false;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let (e, f, approx) = s.evaluate(mid.to_radians())?;
        approximate |= approx;
        if e - f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi), approximate))
}

/// `tanh(db ln(10) / 20)`: squeezing in dB to the TMSV amplitude `epsilon`.
pub fn db_to_epsilon(db: f64) -> Result<f64> {
    if !(db.is_finite() && db >= 0.0) {
        return Err(Error::bad("db", format!("must be finite and nonnegative, got {db}")));
    }
    Ok((db * std::f64::consts::LN_10 / 20.0).tanh())
}

pub fn epsilon_to_db(epsilon: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::bad("epsilon", format!("must lie in [0, 1), got {epsilon}")));
    }
    Ok(epsilon.atanh() * 20.0 / std::f64::consts::LN_10)
}
