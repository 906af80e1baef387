//! Maximal SN-r expectation values `f_r(L)` and the r-Schmidt eigenvalue problem.
//!
//! Closed forms cover projectors (`f_r` is the weight of the `r` largest
//! squared Schmidt coefficients) and positive semi-definite gamma operators
//! (`f_r` is the largest top eigenvalue over all `r x r` principal submatrices
//! of `gamma`). General dense operators go through [`fr_oracle`], a multi-start
//! alternating solver of the coupled generalized eigenproblems whose fixed
//! points are exactly the r-SE solutions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bipartite::{schmidt_decompose, PureState};
use crate::error::{Error, Result};
use crate::numerics::{self, CMatrix, DEFAULT_RANK_TOL};
use crate::operators::{DenseOperator, GammaOperator, ProjectorOperator, IMAG_TOL};
use crate::random::complex_normal_matrix;

/// Largest number of index subsets [`fr_gamma`] enumerates before switching to greedy search.
pub const DEFAULT_ENUMERATION_CAP: u64 = 2_000_000;
/// Verdict tolerance when `f_r` is exact.
pub const CLOSED_FORM_DETECTION_TOL: f64 = 1e-9;
/// Verdict tolerance when `f_r` came from an iterative or heuristic search.
pub const ORACLE_DETECTION_TOL: f64 = 1e-6;
/// Largest bi-orthogonality residual for which an r-SE candidate counts as stationary.
pub const STATIONARITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrSource {
    ClosedForm,
    Enumeration,
    Greedy,
    Oracle,
}

impl FrSource {
    pub fn default_detection_tol(self) -> f64 {
        match self {
            FrSource::ClosedForm | FrSource::Enumeration => CLOSED_FORM_DETECTION_TOL,
            FrSource::Greedy | FrSource::Oracle => ORACLE_DETECTION_TOL,
        }
    }
}

/// A value of `f_r` together with where it came from. `approximate` values
/// are lower bounds on the true maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrValue {
    pub value: f64,
    pub source: FrSource,
    pub approximate: bool,
}

fn check_r(r: usize) -> Result<()> {
    if r == 0 {
        Err(Error::bad("r", "must be at least 1"))
    } else {
        Ok(())
    }
}

/// Sum of the `r` largest squared Schmidt coefficients of the projector's target.
pub fn f_r_projector(p: &ProjectorOperator, r: usize) -> Result<f64> {
    check_r(r)?;
    Ok(p.kappas().iter().take(r).map(|k| k * k).sum())
}

/// The target truncated to its `r` largest Schmidt terms, renormalized.
pub fn projector_maximizer(p: &ProjectorOperator, r: usize) -> Result<PureState> {
    check_r(r)?;
    let s = p.schmidt();
    let mut coeffs = CMatrix::zeros(s.left_basis.nrows(), s.right_basis.nrows());
    for (k, &kappa) in s.coefficients.iter().enumerate().take(r) {
        coeffs += s.left_basis.column(k) * s.right_basis.column(k).transpose() * num_complex::Complex64::new(kappa, 0.0);
    }
    PureState::normalized(coeffs)
}

/// `max_n gamma[n,n]`.
pub fn f1_gamma(l: &GammaOperator) -> f64 {
    l.diagonal().into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Largest eigenvalue over all principal 2x2 submatrices, via the closed-form radical.
pub fn f2_gamma(l: &GammaOperator) -> Result<f64> {
    let n = l.n();
    if n < 2 {
        return Err(Error::TooSmall(n));
    }
    let g = l.gamma();
    let mut best = f64::NEG_INFINITY;
    for m in 0..n {
        for k in (m + 1)..n {
            best = best.max(pair_top(g[(m, m)].re, g[(k, k)].re, g[(m, k)].norm_sqr()));
        }
    }
    Ok(best)
}

#[inline]
fn pair_top(a: f64, b: f64, off_sqr: f64) -> f64 {
    0.5 * (a + b) + 0.5 * ((a - b) * (a - b) + 4.0 * off_sqr).sqrt()
}

/// Result of the principal-submatrix search.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetSearch {
    pub value: f64,
    /// Maximizing index subset `q_1 < ... < q_r`.
    pub subset: Vec<usize>,
    /// True when the greedy fallback was used (value is then a lower bound).
    pub approximate: bool,
    pub visited: u64,
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

fn principal_top(gamma: &CMatrix, subset: &[usize]) -> f64 {
    let r = subset.len();
    let sub = CMatrix::from_fn(r, r, |i, j| gamma[(subset[i], subset[j])]);
    numerics::max_eigenvalue_unchecked(&sub)
}

/// Best `(value, subset)` over all subsets starting with `first`, lexicographic, first max wins.
fn best_with_first(gamma: &CMatrix, r: usize, first: usize) -> (f64, Vec<usize>, u64) {
    let n = gamma.nrows();
    let mut subset: Vec<usize> = (0..r).map(|i| first + i).collect();
    let mut best = (f64::NEG_INFINITY, subset.clone());
    let mut visited = 0u64;
    loop {
        visited += 1;
        let v = principal_top(gamma, &subset);
        if v > best.0 {
            best = (v, subset.clone());
        }
        // advance positions 1..r to the next combination of (first+1..n)
        let mut pos = r;
        loop {
            if pos == 1 {
                return (best.0, best.1, visited);
            }
            pos -= 1;
            if subset[pos] < n - (r - pos) {
                subset[pos] += 1;
                for j in pos + 1..r {
                    subset[j] = subset[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn greedy_search(gamma: &CMatrix, r: usize) -> SubsetSearch {
    let n = gamma.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| gamma[(j, j)].re.total_cmp(&gamma[(i, i)].re));
    let mut subset: Vec<usize> = order[..r].to_vec();
    subset.sort_unstable();
    let mut value = principal_top(gamma, &subset);
    let mut visited = 1u64;
    loop {
        let threshold = value + 1e-14 * value.abs().max(1.0);
        let mut best: Option<(f64, Vec<usize>)> = None;
        for pos in 0..r {
            for j in (0..n).filter(|j| !subset.contains(j)) {
                let mut cand = subset.clone();
                cand[pos] = j;
                cand.sort_unstable();
                let v = principal_top(gamma, &cand);
                visited += 1;
                if v > threshold && best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                    best = Some((v, cand));
                }
            }
        }
        match best {
            Some((v, cand)) => {
                value = v;
                subset = cand;
            }
            None => break,
        }
    }
    SubsetSearch {
        value,
        subset,
        approximate: true,
        visited,
    }
}

/// Largest top eigenvalue over all `r x r` principal submatrices of `gamma`.
///
/// Exact when `C(n, r) <= enumeration_cap`; otherwise a greedy swap search
/// seeded with the `r` largest diagonal entries, flagged `approximate`.
/// For positive semi-definite `gamma` this is `f_r(L)`; for indefinite
/// `gamma` it only bounds `f_r(L)` from below.
pub fn fr_gamma(l: &GammaOperator, r: usize, enumeration_cap: u64) -> Result<SubsetSearch> {
    check_r(r)?;
    let n = l.n();
    let gamma = l.gamma();
    if r >= n {
        return Ok(SubsetSearch {
            value: numerics::hermitian_eig_unchecked(gamma).max_eigenvalue(),
            subset: (0..n).collect(),
            approximate: false,
            visited: 1,
        });
    }
    if r == 1 {
        let diag = l.diagonal();
        let (idx, value) = diag
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        return Ok(SubsetSearch {
            value,
            subset: vec![idx],
            approximate: false,
            visited: n as u64,
        });
    }
    if binomial(n, r) > enumeration_cap as u128 {
        return Ok(greedy_search(gamma, r));
    }
    let per_first: Vec<(f64, Vec<usize>, u64)> = (0..=n - r)
        .into_par_iter()
        .map(|first| best_with_first(gamma, r, first))
        .collect();
    let mut visited = 0;
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for (v, subset, count) in per_first {
        visited += count;
        if v > best.0 {
            best = (v, subset);
        }
    }
    Ok(SubsetSearch {
        value: best.0,
        subset: best.1,
        approximate: false,
        visited,
    })
}

/// Candidate r-SE solution with its Form-2 diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RseSolution {
    pub value: f64,
    pub vector: PureState,
    /// `||L psi - g psi||`.
    pub chi_norm: f64,
    /// Norm of the part of `chi` inside `span{|e_k, f_k'> : k, k' < rank(psi)}`.
    pub biorth_residual: f64,
}

impl RseSolution {
    pub fn is_stationary(&self) -> bool {
        self.biorth_residual <= STATIONARITY_TOL
    }
}

/// Form-2 check of `L|psi> = g|psi> + |chi>` with bi-orthogonal `chi`.
///
/// `g = <psi|L|psi>`; `chi` is expanded in the Schmidt bases of `psi` and its
/// components with both indices inside the Schmidt rank are collected into
/// `biorth_residual`.
pub fn rse_residual(l: &DenseOperator, psi: &PureState, r: usize) -> Result<RseSolution> {
    check_r(r)?;
    let dec = schmidt_decompose(psi, DEFAULT_RANK_TOL)?;
    if dec.rank() > r {
        return Err(Error::RankTooHigh { rank: dec.rank(), r });
    }
    let v = psi.to_vector();
    let lv = l.apply(psi)?;
    let g = v.dotc(&lv);
    if g.im.abs() > IMAG_TOL {
        return Err(Error::NotReal(g.im));
    }
    let chi = lv - v.scale(g.re);
    let (d_a, d_b) = psi.dims();
    let chi_matrix = CMatrix::from_fn(d_a, d_b, |a, b| chi[a * d_b + b]);
    let overlaps = dec.left_basis.adjoint() * chi_matrix * dec.right_basis.map(|z| z.conj());
    let s = dec.rank();
    let biorth_residual = overlaps.view((0, 0), (s, s)).norm();
    Ok(RseSolution {
        value: g.re,
        vector: psi.clone(),
        chi_norm: chi.norm(),
        biorth_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Stop once one full alternation changes `g` by less than this.
    pub tol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            restarts: 100,
            max_iters: 500,
            seed: 0,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleOutcome {
    pub solution: RseSolution,
    /// False when the best restart hit `max_iters` first (the iterate is still a valid lower bound).
    pub converged: bool,
    pub iterations: usize,
    /// Index of the restart that produced the best value.
    pub restart: usize,
}

struct RestartResult {
    value: f64,
    coeffs: CMatrix,
    converged: bool,
    iterations: usize,
}

#[derive(Clone, Copy)]
enum Fixed {
    /// Local vectors on A are fixed; solve for the B factors.
    A,
    B,
}

/// Maximizes `<psi|L|psi>` over `psi = sum_k x_k (x) y_k` with one side held fixed.
///
/// `fixed` holds the fixed local vectors as columns. The unknowns are stacked
/// as `k * d + i` where `d` is the free local dimension.
fn half_step(l: &DenseOperator, fixed: &CMatrix, side: Fixed) -> Result<(f64, CMatrix)> {
    let (d_a, d_b) = (l.d_a(), l.d_b());
    let r = fixed.ncols();
    let free = match side {
        Fixed::A => d_b,
        Fixed::B => d_a,
    };
    let mut embed = CMatrix::zeros(d_a * d_b, r * free);
    for k in 0..r {
        for a in 0..d_a {
            for b in 0..d_b {
                let (coef, col) = match side {
                    Fixed::A => (fixed[(a, k)], k * d_b + b),
                    Fixed::B => (fixed[(b, k)], k * d_a + a),
                };
                embed[(a * d_b + b, col)] = coef;
            }
        }
    }
    let op_block = embed.adjoint() * l.matrix() * &embed;
    let metric = embed.adjoint() * &embed;
    let eig = numerics::generalized_hermitian_eig_unchecked(&op_block, &metric, DEFAULT_RANK_TOL)?;
    let top = eig.vector(0);
    let solved = CMatrix::from_fn(free, r, |i, k| top[k * free + i]);
    Ok((eig.max_eigenvalue(), solved))
}

fn run_restart(l: &DenseOperator, r: usize, opts: &OracleOptions, index: usize) -> Result<RestartResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(index as u64);
    let mut xs = complex_normal_matrix(&mut rng, l.d_a(), r);
    let mut ys = complex_normal_matrix(&mut rng, l.d_b(), r);
    let mut value = f64::NEG_INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        ys = half_step(l, &xs, Fixed::A)?.1;
        let (g, x_new) = half_step(l, &ys, Fixed::B)?;
        xs = x_new;
        // move the scale of each product term onto the B factor
        for k in 0..r {
            let norm = xs.column(k).norm();
            if norm > f64::MIN_POSITIVE {
                xs.column_mut(k).unscale_mut(norm);
                ys.column_mut(k).scale_mut(norm);
            }
        }
        let delta = (g - value).abs();
        value = g;
        if delta < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(RestartResult {
        value,
        coeffs: &xs * ys.transpose(),
        converged,
        iterations,
    })
}

/// Multi-start alternating solver for the r-SE problem of a dense operator.
///
/// Each restart draws Gaussian (not orthonormalized) local vectors and
/// alternately solves the generalized eigenproblem for the B factors with the
/// A factors fixed and vice versa, taking the top eigenpair each time. The
/// returned value is an achieved expectation of a Schmidt-rank-`<= r` state, so
/// it never exceeds `f_r(L)`. Restarts are independent and seeded by
/// `(seed, restart index)`; the best one (first on ties) is kept.
pub fn fr_oracle(l: &DenseOperator, r: usize, opts: &OracleOptions) -> Result<OracleOutcome> {
    check_r(r)?;
    if r > l.d_a().min(l.d_b()) {
        return Err(Error::bad(
            "r",
            format!("must not exceed min(d_a, d_b) = {}", l.d_a().min(l.d_b())),
        ));
    }
    if opts.restarts == 0 {
        return Err(Error::bad("restarts", "must be at least 1"));
    }
    if opts.max_iters == 0 {
        return Err(Error::bad("max_iters", "must be at least 1"));
    }
    let results: Vec<Option<RestartResult>> = (0..opts.restarts)
        .into_par_iter()
        .map(|i| run_restart(l, r, opts, i).ok())
        .collect();
    let mut best: Option<(usize, RestartResult)> = None;
    for (i, res) in results.into_iter().enumerate() {
        let Some(res) = res else { continue };
        if !res.value.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|(_, b)| res.value > b.value) {
            best = Some((i, res));
        }
    }
    let (restart, best) = best.ok_or(Error::NoConvergence)?;
    let vector = PureState::normalized(best.coeffs)?;
    let solution = rse_residual(l, &vector, r)?;
    Ok(OracleOutcome {
        solution,
        converged: best.converged,
        iterations: best.iterations,
        restart,
    })
}

/// Operators with a closed-form (or exhaustive) `f_r`.
pub trait ClosedFormFr {
    fn closed_form_fr(&self, r: usize) -> Result<FrValue>;
}

impl ClosedFormFr for ProjectorOperator {
    fn closed_form_fr(&self, r: usize) -> Result<FrValue> {
        Ok(FrValue {
            value: f_r_projector(self, r)?,
            source: FrSource::ClosedForm,
            approximate: false,
        })
    }
}

impl ClosedFormFr for GammaOperator {
    /// Rejects indefinite `gamma`, for which the principal-submatrix maximum
    /// can fall below the true `f_r`.
    fn closed_form_fr(&self, r: usize) -> Result<FrValue> {
        check_r(r)?;
        let scale = self.gamma().norm().max(1.0);
        let lowest = self.min_eigenvalue();
        if lowest < -1e-12 * scale {
            return Err(Error::IndefiniteGamma(lowest));
        }
        let n = self.n();
        if r == 1 {
            return Ok(FrValue {
                value: f1_gamma(self),
                source: FrSource::ClosedForm,
                approximate: false,
            });
        }
        if r == 2 && n > 2 {
            return Ok(FrValue {
                value: f2_gamma(self)?,
                source: FrSource::ClosedForm,
                approximate: false,
            });
        }
        let search = fr_gamma(self, r, DEFAULT_ENUMERATION_CAP)?;
        let source = match (r >= n, search.approximate) {
            (true, _) => FrSource::ClosedForm,
            (false, true) => FrSource::Greedy,
            (false, false) => FrSource::Enumeration,
        };
        Ok(FrValue {
            value: search.value,
            source,
            approximate: search.approximate,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub r: usize,
    pub f_r: f64,
    pub expectation: f64,
    pub margin: f64,
    pub verdict: bool,
    pub f_r_source: FrSource,
    pub approximate: bool,
    pub detection_tol: f64,
}

impl WitnessReport {
    /// `detection_tol = None` picks the default for `f_r.source`.
    pub fn new(r: usize, f_r: FrValue, expectation: f64, detection_tol: Option<f64>) -> Self {
        let detection_tol = detection_tol.unwrap_or_else(|| f_r.source.default_detection_tol());
        let margin = expectation - f_r.value;
        WitnessReport {
            r,
            f_r: f_r.value,
            expectation,
            margin,
            verdict: margin > detection_tol,
            f_r_source: f_r.source,
            approximate: f_r.approximate,
            detection_tol,
        }
    }
}

/// Decides "Schmidt number > r" from a measured `<L>`: true iff `<L> - f_r(L) > detection_tol`.
pub fn witness_verdict<L: ClosedFormFr + ?Sized>(
    l: &L,
    rho_expectation: f64,
    r: usize,
    detection_tol: Option<f64>,
) -> Result<WitnessReport> {
    if !rho_expectation.is_finite() {
        return Err(Error::bad("expectation", "must be finite"));
    }
    let f_r = l.closed_form_fr(r)?;
    Ok(WitnessReport::new(r, f_r, rho_expectation, detection_tol))
}

/// Verdict for a dense operator, with `f_r` from [`fr_oracle`].
pub fn witness_verdict_oracle(
    l: &DenseOperator,
    rho_expectation: f64,
    r: usize,
    opts: &OracleOptions,
    detection_tol: Option<f64>,
) -> Result<WitnessReport> {
    let outcome = fr_oracle(l, r, opts)?;
    let f_r = FrValue {
        value: outcome.solution.value,
        source: FrSource::Oracle,
        approximate: true,
    };
    Ok(WitnessReport::new(r, f_r, rho_expectation, detection_tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bipartite::tmsv_pure;
    use crate::operators::{flat_sinc_gamma, tmsv_gamma, witness_from, Observable};
    use crate::random::{random_hermitian, random_psd, random_rank_r_state};
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn diag_gamma(values: &[f64]) -> GammaOperator {
        let n = values.len();
        GammaOperator::from_real_fn(n, |i, j| if i == j { values[i] } else { 0.0 }).unwrap()
    }

    /// Brute force: top eigenvalue (from the validated Hermitian solver) of every r-subset.
    fn brute_force_fr(g: &GammaOperator, r: usize) -> f64 {
        let n = g.n();
        let mut best = f64::NEG_INFINITY;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != r {
                continue;
            }
            let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let sub = CMatrix::from_fn(r, r, |i, j| g.gamma()[(idx[i], idx[j])]);
            let top = numerics::hermitian_eig(&sub, 1e-10).unwrap().max_eigenvalue();
            best = best.max(top);
        }
        best
    }

    #[test]
    fn projector_closed_forms() {
        let eps: f64 = 1.0 / 3.0;
        let p = ProjectorOperator::new(tmsv_pure(eps, 0.0, 25).unwrap()).unwrap();
        let f2 = f_r_projector(&p, 2).unwrap();
        assert!((f2 - 80.0 / 81.0).abs() < 1e-12);
        let me = ProjectorOperator::new(PureState::maximally_entangled(4, 4).unwrap()).unwrap();
        assert!((f_r_projector(&me, 2).unwrap() - 0.5).abs() < 1e-12);
        let bell = ProjectorOperator::new(PureState::maximally_entangled(2, 2).unwrap()).unwrap();
        assert!((f_r_projector(&bell, 2).unwrap() - 1.0).abs() < 1e-12);
        assert!((f_r_projector(&bell, 7).unwrap() - 1.0).abs() < 1e-12);
        assert!(f_r_projector(&bell, 0).is_err());
    }

    #[test]
    fn projector_maximizer_overlap() {
        let eps: f64 = 0.5;
        let p = ProjectorOperator::new(tmsv_pure(eps, 0.3, 30).unwrap()).unwrap();
        for r in 1..5 {
            let psi = projector_maximizer(&p, r).unwrap();
            let g = p.expectation_pure(&psi).unwrap();
            assert!((g - f_r_projector(&p, r).unwrap()).abs() < 1e-12);
            assert!((g - (1.0 - eps.powi(2 * r as i32))).abs() < 1e-12);
        }
    }

    #[test]
    fn f1_examples() {
        assert!((f1_gamma(&tmsv_gamma(1.0 / 3.0, 0.4, 20).unwrap()) - 8.0 / 9.0).abs() < 1e-15);
        assert_eq!(f1_gamma(&flat_sinc_gamma(0.3, 20).unwrap()), 1.0);
        assert_eq!(f1_gamma(&diag_gamma(&[0.2, 0.7, 0.1])), 0.7);
    }

    #[test]
    fn f2_examples() {
        let eps: f64 = 1.0 / 3.0;
        let f2 = f2_gamma(&tmsv_gamma(eps, 0.0, 40).unwrap()).unwrap();
        assert!((f2 - 80.0 / 81.0).abs() < 1e-12);
        assert!((f2_gamma(&diag_gamma(&[1.0, 1.0, 1.0])).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(f2_gamma(&diag_gamma(&[1.0])).unwrap_err(), Error::TooSmall(1));
    }

    #[test]
    fn f2_matches_brute_force_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for _ in 0..20 {
            let g = GammaOperator::new(random_hermitian(&mut rng, 4)).unwrap();
            assert!((f2_gamma(&g).unwrap() - brute_force_fr(&g, 2)).abs() < 1e-12);
        }
    }

    #[test]
    fn fr_gamma_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        for n in 1..=7 {
            let g = GammaOperator::new(random_hermitian(&mut rng, n)).unwrap();
            for r in 1..=n {
                let s = fr_gamma(&g, r, DEFAULT_ENUMERATION_CAP).unwrap();
                assert!(!s.approximate);
                assert_eq!(s.subset.len(), r);
                assert!((s.value - brute_force_fr(&g, r)).abs() < 1e-12, "n={n} r={r}");
            }
        }
    }

    #[test]
    fn fr_gamma_special_cases() {
        let g = tmsv_gamma(1.0 / 3.0, 0.0, 40).unwrap();
        for r in 1..6 {
            let v = fr_gamma(&g, r, DEFAULT_ENUMERATION_CAP).unwrap().value;
            assert!((v - (1.0 - (1.0f64 / 9.0).powi(r as i32))).abs() < 1e-12);
        }
        let h = GammaOperator::new(random_hermitian(&mut ChaCha8Rng::seed_from_u64(1), 5)).unwrap();
        assert_eq!(fr_gamma(&h, 1, DEFAULT_ENUMERATION_CAP).unwrap().value, f1_gamma(&h));
        let top = numerics::hermitian_eig(h.gamma(), 1e-10).unwrap().max_eigenvalue();
        assert!((fr_gamma(&h, 5, DEFAULT_ENUMERATION_CAP).unwrap().value - top).abs() < 1e-12);
        assert!(fr_gamma(&h, 0, 10).is_err());
    }

    #[test]
    fn greedy_fallback_is_flagged_lower_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = GammaOperator::new(random_psd(&mut rng, 9)).unwrap();
        let exact = fr_gamma(&g, 3, DEFAULT_ENUMERATION_CAP).unwrap();
        let greedy = fr_gamma(&g, 3, 10).unwrap();
        assert!(greedy.approximate);
        assert!(greedy.value <= exact.value + 1e-12);
        // diagonally dominant case: greedy seeding finds the optimum
        let tm = tmsv_gamma(0.5, 0.7, 30).unwrap();
        let a = fr_gamma(&tm, 3, DEFAULT_ENUMERATION_CAP).unwrap();
        let b = fr_gamma(&tm, 3, 5).unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
        assert_eq!(a.subset, b.subset);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(101, 3), 166_650);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(1000, 500), u128::MAX);
    }

    #[test]
    fn residual_of_eigenvector_is_zero() {
        let l = tmsv_gamma(0.4, PI, 4).unwrap().to_dense();
        let psi = PureState::basis(5, 5, 2, 2);
        let sol = rse_residual(&l, &psi, 1).unwrap();
        assert_eq!(sol.chi_norm, 0.0);
        assert_eq!(sol.biorth_residual, 0.0);
    }

    #[test]
    fn residual_of_truncated_tmsv() {
        let eps: f64 = 1.0 / 3.0;
        let p = ProjectorOperator::new(tmsv_pure(eps, 0.0, 20).unwrap()).unwrap();
        let dense = p.to_dense();
        for r in 1..4 {
            let psi = projector_maximizer(&p, r).unwrap();
            let sol = rse_residual(&dense, &psi, r).unwrap();
            assert!(sol.biorth_residual <= 1e-10);
            assert!((sol.value - (1.0 - eps.powi(2 * r as i32))).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_rejects_high_rank_and_reports_nonstationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let l = DenseOperator::new(random_hermitian(&mut rng, 9), 3, 3).unwrap();
        let psi = random_rank_r_state(&mut rng, 3, 3, 3);
        assert!(matches!(rse_residual(&l, &psi, 2), Err(Error::RankTooHigh { rank: 3, r: 2 })));
        let psi = random_rank_r_state(&mut rng, 3, 3, 2);
        let sol = rse_residual(&l, &psi, 2).unwrap();
        assert!(sol.biorth_residual >= 0.0 && sol.chi_norm >= sol.biorth_residual);
    }

    #[test]
    fn oracle_full_rank_equals_max_eigenvalue() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let l = DenseOperator::new(random_hermitian(&mut rng, 9), 3, 3).unwrap();
        let out = fr_oracle(&l, 3, &OracleOptions { restarts: 5, ..Default::default() }).unwrap();
        assert!((out.solution.value - l.max_eigenvalue()).abs() < 1e-8);
    }

    #[test]
    fn oracle_bell_projector_separable_bound() {
        let p = ProjectorOperator::new(PureState::maximally_entangled(2, 2).unwrap()).unwrap();
        let out = fr_oracle(&p.to_dense(), 1, &OracleOptions { restarts: 10, ..Default::default() }).unwrap();
        assert!((out.solution.value - 0.5).abs() < 1e-9);
        assert!(out.converged);
        assert!(out.solution.is_stationary());
    }

    #[test]
    fn oracle_matches_f2_on_psd_gamma() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let g = GammaOperator::new(random_psd(&mut rng, 4)).unwrap();
        let out = fr_oracle(&g.to_dense(), 2, &OracleOptions { restarts: 50, seed: 1, ..Default::default() }).unwrap();
        let exact = f2_gamma(&g).unwrap();
        assert!((out.solution.value - exact).abs() < 1e-7);
    }

    #[test]
    fn oracle_finds_more_than_principal_submatrices_for_indefinite_gamma() {
        // L = |00><11| + |11><00|: max diagonal is 0, yet |++> reaches 1/2
        let g = GammaOperator::from_real_fn(2, |i, j| if i == j { 0.0 } else { 1.0 }).unwrap();
        let out = fr_oracle(&g.to_dense(), 1, &OracleOptions { restarts: 10, ..Default::default() }).unwrap();
        assert!((out.solution.value - 0.5).abs() < 1e-9);
        assert_eq!(f1_gamma(&g), 0.0);
        assert!(matches!(witness_verdict(&g, 0.3, 1, None), Err(Error::IndefiniteGamma(_))));
    }

    #[test]
    fn oracle_is_deterministic_and_validates() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let l = DenseOperator::new(random_hermitian(&mut rng, 9), 3, 3).unwrap();
        let opts = OracleOptions { restarts: 8, seed: 42, ..Default::default() };
        let a = fr_oracle(&l, 2, &opts).unwrap();
        let b = fr_oracle(&l, 2, &opts).unwrap();
        assert_eq!(a.solution.value, b.solution.value);
        assert_eq!(a.solution.vector, b.solution.vector);
        assert_eq!(a.restart, b.restart);
        assert!(fr_oracle(&l, 4, &opts).is_err());
        assert!(fr_oracle(&l, 0, &opts).is_err());
        assert!(fr_oracle(&l, 1, &OracleOptions { restarts: 0, ..opts }).is_err());
    }

    #[test]
    fn verdict_examples() {
        let eps: f64 = 1.0 / 3.0;
        let p = ProjectorOperator::new(tmsv_pure(eps, 0.0, 60).unwrap()).unwrap();
        for r in 1..5 {
            let rep = witness_verdict(&p, 1.0, r, None).unwrap();
            assert!(rep.verdict);
            assert!((rep.margin - eps.powi(2 * r as i32)).abs() < 1e-12);
        }
        let l = tmsv_gamma(eps, PI, 60).unwrap();
        let rep = witness_verdict(&l, 0.8, 1, None).unwrap();
        assert!(!rep.verdict && rep.margin < 0.0);
        let rep = witness_verdict(&l, rep.f_r, 1, Some(0.0)).unwrap();
        assert!(!rep.verdict);
        assert_eq!(rep.margin, 0.0);
    }

    #[test]
    fn identity_cannot_witness() {
        let id = GammaOperator::new(CMatrix::identity(4, 4)).unwrap();
        for r in 1..=4 {
            let f = id.closed_form_fr(r).unwrap().value;
            assert!((f - 1.0).abs() < 1e-12);
        }
        let dense_id = DenseOperator::identity(3, 3);
        let rep = witness_verdict_oracle(&dense_id, 1.0, 1, &OracleOptions { restarts: 3, ..Default::default() }, None)
            .unwrap();
        assert!(rep.margin <= 1e-12 && !rep.verdict);
    }

    #[test]
    fn report_json_keys() {
        let p = ProjectorOperator::new(PureState::maximally_entangled(2, 2).unwrap()).unwrap();
        let rep = witness_verdict(&p, 0.9, 1, None).unwrap();
        let v = serde_json::to_value(&rep).unwrap();
        for key in ["r", "f_r", "expectation", "margin", "verdict", "f_r_source", "approximate"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["f_r_source"], "closed_form");
        let back: WitnessReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, rep);
    }

    #[test]
    fn witness_positive_on_rank_r_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let g = GammaOperator::new(random_psd(&mut rng, 4)).unwrap();
        for r in 1..=3 {
            let f = fr_gamma(&g, r, DEFAULT_ENUMERATION_CAP).unwrap().value;
            let w = witness_from(&g, f);
            for _ in 0..1000 {
                let psi = random_rank_r_state(&mut rng, 4, 4, r);
                assert!(w.expectation_pure(&psi).unwrap() >= -1e-8);
            }
        }
        let _ = Complex64::new(0.0, 0.0);
    }
}
