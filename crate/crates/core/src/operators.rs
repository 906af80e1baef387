//! Hermitian test operators on `H_A (x) H_B` and their expectation values.
//!
//! Three representations are supported:
//!
//! * [`ProjectorOperator`]: `|phi><phi|` together with the Schmidt data of `phi`.
//! * [`GammaOperator`]: `L = sum_{m,n} gamma[m,n] |m,m><n,n|`, stored as the
//!   `n x n` matrix `gamma` only.
//! * [`DenseOperator`]: a full `(d_a d_b) x (d_a d_b)` matrix with composite
//!   index `a * d_b + b`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::bipartite::{schmidt_decompose, PureState, SchmidtDecomposition};
use crate::error::{Error, Result};
use crate::numerics::{self, CMatrix, CVector, DEFAULT_RANK_TOL};

/// Absolute Hermiticity tolerance for stored operators.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Largest imaginary residue tolerated in an expectation value.
pub const IMAG_TOL: f64 = 1e-8;

/// `sin(x) / x` with `sinc(0) = 1`.
///
/// Uses the series `1 - x^2/6` for `|x| < 1e-8`, and returns exactly zero at
/// nonzero integer multiples of `pi` (the rounded `f64` value of `pi` would
/// otherwise leave a residue of order 1e-16).
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        return 1.0 - x * x / 6.0;
    }
    let turns = x / PI;
    let nearest = turns.round();
    if nearest != 0.0 && (turns - nearest).abs() <= 4.0 * f64::EPSILON * turns.abs() {
        return 0.0;
    }
    x.sin() / x
}

fn check_hermitian_abs(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() || m.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "operator matrix must be square and nonempty, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    numerics::ensure_finite(m)?;
    let deviation = numerics::hermitian_deviation(m);
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian {
            deviation,
            allowed: HERMITIAN_TOL,
        });
    }
    Ok(())
}

fn real_part(z: Complex64) -> Result<f64> {
    if z.im.abs() > IMAG_TOL {
        Err(Error::NotReal(z.im))
    } else {
        Ok(z.re)
    }
}

fn dims_match(op: (usize, usize), psi: &PureState) -> Result<()> {
    if op == psi.dims() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "operator acts on {}x{}, state lives on {}x{}",
            op.0,
            op.1,
            psi.d_a(),
            psi.d_b()
        )))
    }
}

/// Common surface of every operator representation.
pub trait Observable {
    /// Local dimensions `(d_a, d_b)` the operator acts on.
    fn local_dims(&self) -> (usize, usize);

    /// Dense matrix in composite index `a * d_b + b`.
    fn to_dense(&self) -> DenseOperator;

    /// `<psi|L|psi>`.
    fn expectation_pure(&self, psi: &PureState) -> Result<f64>;
}

pub fn expectation_pure<L: Observable + ?Sized>(op: &L, psi: &PureState) -> Result<f64> {
    op.expectation_pure(psi)
}

/// `|phi><phi|` with the Schmidt coefficients `kappa_k` of `phi`.
#[derive(Debug, Clone)]
pub struct ProjectorOperator {
    target: PureState,
    schmidt: SchmidtDecomposition,
}

impl ProjectorOperator {
    pub fn new(target: PureState) -> Result<Self> {
        let schmidt = schmidt_decompose(&target, DEFAULT_RANK_TOL)?;
        Ok(ProjectorOperator { target, schmidt })
    }

    pub fn target(&self) -> &PureState {
        &self.target
    }

    pub fn schmidt(&self) -> &SchmidtDecomposition {
        &self.schmidt
    }

    /// Schmidt coefficients `kappa_k`, descending.
    pub fn kappas(&self) -> &[f64] {
        &self.schmidt.coefficients
    }
}

impl Observable for ProjectorOperator {
    fn local_dims(&self) -> (usize, usize) {
        self.target.dims()
    }

    fn to_dense(&self) -> DenseOperator {
        let v = self.target.to_vector();
        let (d_a, d_b) = self.target.dims();
        DenseOperator {
            matrix: &v * v.adjoint(),
            d_a,
            d_b,
        }
    }

    fn expectation_pure(&self, psi: &PureState) -> Result<f64> {
        dims_match(self.local_dims(), psi)?;
        Ok(self.target.inner(psi)?.norm_sqr())
    }
}

/// `L = sum_{m,n} gamma[m,n] |m,m><n,n|` on an `n x n` system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GammaJson", into = "GammaJson")]
pub struct GammaOperator {
    gamma: CMatrix,
}

#[derive(Serialize, Deserialize)]
struct GammaJson {
    n: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl TryFrom<GammaJson> for GammaOperator {
    type Error = Error;

    fn try_from(j: GammaJson) -> Result<Self> {
        GammaOperator::new(numerics::matrix_from_parts(j.n, j.n, &j.re, &j.im)?)
    }
}

impl From<GammaOperator> for GammaJson {
    fn from(g: GammaOperator) -> Self {
        let (re, im) = numerics::matrix_to_parts(&g.gamma);
        GammaJson { n: g.n(), re, im }
    }
}

impl GammaOperator {
    pub fn new(gamma: CMatrix) -> Result<Self> {
        check_hermitian_abs(&gamma)?;
        Ok(GammaOperator { gamma })
    }

    pub fn from_real_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        Self::new(CMatrix::from_fn(n, n, |i, j| Complex64::new(f(i, j), 0.0)))
    }

    pub fn n(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn gamma(&self) -> &CMatrix {
        &self.gamma
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.gamma[(i, i)].re).collect()
    }

    /// Smallest eigenvalue of `gamma`.
    pub fn min_eigenvalue(&self) -> f64 {
        *numerics::hermitian_eig_unchecked(&self.gamma)
            .eigenvalues
            .last()
            .expect("nonempty")
    }

    /// Dense form embedded in a `d_a x d_b` system (`|m,m>` has index `m * d_b + m`).
    pub fn to_dense_in(&self, d_a: usize, d_b: usize) -> Result<DenseOperator> {
        let n = self.n();
        if d_a < n || d_b < n {
            return Err(Error::DimensionMismatch(format!(
                "gamma of size {n} does not fit into {d_a}x{d_b}"
            )));
        }
        let dim = d_a * d_b;
        let mut matrix = CMatrix::zeros(dim, dim);
        for m in 0..n {
            for k in 0..n {
                matrix[(m * d_b + m, k * d_b + k)] = self.gamma[(m, k)];
            }
        }
        Ok(DenseOperator { matrix, d_a, d_b })
    }

    /// Expectation in a state of any shape that contains the `n x n` diagonal block.
    pub(crate) fn expectation_on_diagonal(&self, coeffs: &CMatrix) -> Result<f64> {
        let n = self.n();
        let diag: Vec<Complex64> = (0..n).map(|k| coeffs[(k, k)]).collect();
        let mut total = Complex64::new(0.0, 0.0);
        for (m, dm) in diag.iter().enumerate() {
            let row: Complex64 = diag.iter().enumerate().map(|(k, dk)| self.gamma[(m, k)] * dk).sum();
            total += dm.conj() * row;
        }
        real_part(total)
    }
}

impl Observable for GammaOperator {
    fn local_dims(&self) -> (usize, usize) {
        (self.n(), self.n())
    }

    fn to_dense(&self) -> DenseOperator {
        self.to_dense_in(self.n(), self.n()).expect("square embedding fits")
    }

    fn expectation_pure(&self, psi: &PureState) -> Result<f64> {
        dims_match(self.local_dims(), psi)?;
        self.expectation_on_diagonal(psi.coeffs())
    }
}

/// A general Hermitian operator on `H_A (x) H_B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DenseJson", into = "DenseJson")]
pub struct DenseOperator {
    matrix: CMatrix,
    d_a: usize,
    d_b: usize,
}

#[derive(Serialize, Deserialize)]
struct DenseJson {
    d_a: usize,
    d_b: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl TryFrom<DenseJson> for DenseOperator {
    type Error = Error;

    fn try_from(j: DenseJson) -> Result<Self> {
        let dim = j.d_a * j.d_b;
        DenseOperator::new(numerics::matrix_from_parts(dim, dim, &j.re, &j.im)?, j.d_a, j.d_b)
    }
}

impl From<DenseOperator> for DenseJson {
    fn from(op: DenseOperator) -> Self {
        let (re, im) = numerics::matrix_to_parts(&op.matrix);
        DenseJson {
            d_a: op.d_a,
            d_b: op.d_b,
            re,
            im,
        }
    }
}

impl DenseOperator {
    pub fn new(matrix: CMatrix, d_a: usize, d_b: usize) -> Result<Self> {
        if d_a == 0 || d_b == 0 || matrix.shape() != (d_a * d_b, d_a * d_b) {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix for a {d_a}x{d_b} system",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        check_hermitian_abs(&matrix)?;
        Ok(DenseOperator { matrix, d_a, d_b })
    }

    pub fn identity(d_a: usize, d_b: usize) -> Self {
        let dim = d_a * d_b;
        DenseOperator {
            matrix: CMatrix::identity(dim, dim),
            d_a,
            d_b,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn d_b(&self) -> usize {
        self.d_b
    }

    pub fn apply(&self, psi: &PureState) -> Result<CVector> {
        dims_match((self.d_a, self.d_b), psi)?;
        Ok(&self.matrix * psi.to_vector())
    }

    /// `(S (x) T) L (S (x) T)^†` for unitary local maps.
    pub fn conjugate_local(&self, s: &CMatrix, t: &CMatrix) -> Result<Self> {
        if s.shape() != (self.d_a, self.d_a) || t.shape() != (self.d_b, self.d_b) {
            return Err(Error::DimensionMismatch("local maps do not match operator".into()));
        }
        let st = s.kronecker(t);
        let matrix = &st * &self.matrix * st.adjoint();
        Ok(DenseOperator {
            matrix: (&matrix + matrix.adjoint()).scale(0.5),
            d_a: self.d_a,
            d_b: self.d_b,
        })
    }

    pub fn max_eigenvalue(&self) -> f64 {
        numerics::hermitian_eig_unchecked(&self.matrix).max_eigenvalue()
    }
}

impl std::ops::Neg for DenseOperator {
    type Output = DenseOperator;

    fn neg(self) -> DenseOperator {
        DenseOperator {
            matrix: -self.matrix,
            d_a: self.d_a,
            d_b: self.d_b,
        }
    }
}

impl Observable for DenseOperator {
    fn local_dims(&self) -> (usize, usize) {
        (self.d_a, self.d_b)
    }

    fn to_dense(&self) -> DenseOperator {
        self.clone()
    }

    fn expectation_pure(&self, psi: &PureState) -> Result<f64> {
        let v = psi.to_vector();
        dims_match((self.d_a, self.d_b), psi)?;
        real_part(v.dotc(&(&self.matrix * &v)))
    }
}

/// A projector rewritten as `(U (x) V) L_gamma (U (x) V)^†` in the Schmidt
/// basis of its target, with `gamma[m,n] = kappa_m kappa_n`.
#[derive(Debug, Clone)]
pub struct GammaForm {
    pub gamma: GammaOperator,
    pub left: CMatrix,
    pub right: CMatrix,
}

impl GammaForm {
    /// Coefficients of `(U^† (x) V^†)|psi>`.
    fn rotate(&self, psi: &PureState) -> CMatrix {
        self.left.adjoint() * psi.coeffs() * self.right.map(|z| z.conj())
    }
}

impl Observable for GammaForm {
    fn local_dims(&self) -> (usize, usize) {
        (self.left.nrows(), self.right.nrows())
    }

    fn to_dense(&self) -> DenseOperator {
        let (d_a, d_b) = self.local_dims();
        let inner = self.gamma.to_dense_in(d_a, d_b).expect("gamma sized from the target");
        let uv = self.left.kronecker(&self.right);
        let matrix = &uv * inner.matrix * uv.adjoint();
        DenseOperator {
            matrix: (&matrix + matrix.adjoint()).scale(0.5),
            d_a,
            d_b,
        }
    }

    fn expectation_pure(&self, psi: &PureState) -> Result<f64> {
        dims_match(self.local_dims(), psi)?;
        self.gamma.expectation_on_diagonal(&self.rotate(psi))
    }
}

pub fn projector_as_gamma(p: &ProjectorOperator) -> GammaForm {
    let (d_a, d_b) = p.local_dims();
    let n = d_a.min(d_b);
    let mut kappa = vec![0.0; n];
    kappa[..p.kappas().len()].copy_from_slice(p.kappas());
    let gamma = GammaOperator {
        gamma: CMatrix::from_fn(n, n, |m, k| Complex64::new(kappa[m] * kappa[k], 0.0)),
    };
    GammaForm {
        gamma,
        left: p.schmidt().left_basis.clone(),
        right: p.schmidt().right_basis.clone(),
    }
}

fn check_delta_phi(delta_phi: f64, allow_zero: bool) -> Result<()> {
    let ok = if allow_zero {
        (0.0..=PI).contains(&delta_phi)
    } else {
        delta_phi > 0.0 && delta_phi <= PI
    };
    if ok {
        Ok(())
    } else {
        let range = if allow_zero { "[0, pi]" } else { "(0, pi]" };
        Err(Error::bad("delta_phi", format!("must lie in {range}, got {delta_phi}")))
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::bad("epsilon", format!("must lie in (0, 1), got {epsilon}")))
    }
}

/// Phase-randomized TMSV operator:
/// `gamma[m,n] = (1 - eps^2) eps^{m+n} sinc(delta_phi (m - n))`, `m, n <= cutoff`.
pub fn tmsv_gamma(epsilon: f64, delta_phi: f64, cutoff: usize) -> Result<GammaOperator> {
    check_epsilon(epsilon)?;
    check_delta_phi(delta_phi, true)?;
    let powers = epsilon_powers(epsilon, cutoff);
    let scale = 1.0 - epsilon * epsilon;
    GammaOperator::from_real_fn(cutoff + 1, |m, n| {
        scale * (powers[m] * powers[n]) * sinc(delta_phi * (m as f64 - n as f64))
    })
}

/// `gamma[m,n] = sinc(delta_phi (m - n))`, `m, n <= cutoff`.
pub fn flat_sinc_gamma(delta_phi: f64, cutoff: usize) -> Result<GammaOperator> {
    check_delta_phi(delta_phi, false)?;
    GammaOperator::from_real_fn(cutoff + 1, |m, n| sinc(delta_phi * (m as f64 - n as f64)))
}

fn epsilon_powers(epsilon: f64, cutoff: usize) -> Vec<f64> {
    (0..=cutoff).map(|k| epsilon.powi(k as i32)).collect()
}

/// Mixed states supported on the `|k,k>` subspace.
#[derive(Debug, Clone)]
pub enum MixedStructure {
    /// `rho = (1/2dphi) int dphi |eps e^{i phi}><eps e^{i phi}|` truncated at `cutoff`.
    TmsvPhaseRandomized {
        epsilon: f64,
        delta_phi: f64,
        cutoff: usize,
    },
    /// `rho = sum_k w_k |psi_k><psi_k|`.
    Explicit { dyads: Vec<PureState> },
}

#[derive(Debug, Clone)]
pub struct DiagonalMixedState {
    weights: Vec<f64>,
    structure: MixedStructure,
}

impl DiagonalMixedState {
    /// Truncated phase-randomized TMSV. Populations `p_m = (1 - eps^2) eps^{2m}`
    /// are kept as they are; the missing trace `eps^{2(cutoff+1)}` is reported by
    /// [`Self::trace_deficit`].
    pub fn tmsv_phase_randomized(epsilon: f64, delta_phi: f64, cutoff: usize) -> Result<Self> {
        check_epsilon(epsilon)?;
        check_delta_phi(delta_phi, true)?;
        // Telescoping form eps^{2m} - eps^{2m+2}: the truncated trace then sums to
        // 1 - eps^{2(cutoff+1)} without accumulated rounding.
        let e2 = epsilon * epsilon;
        let mut level = 1.0;
        let weights = (0..=cutoff)
            .map(|_| {
                let next = level * e2;
                let p = level - next;
                level = next;
                p
            })
            .collect();
        Ok(DiagonalMixedState {
            weights,
            structure: MixedStructure::TmsvPhaseRandomized {
                epsilon,
                delta_phi,
                cutoff,
            },
        })
    }

    pub fn explicit(weights: Vec<f64>, dyads: Vec<PureState>) -> Result<Self> {
        if weights.len() != dyads.len() || dyads.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} dyads",
                weights.len(),
                dyads.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::bad("weights", "must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::bad("weights", format!("must sum to 1, got {total}")));
        }
        let dims = dyads[0].dims();
        if dyads.iter().any(|d| d.dims() != dims) {
            return Err(Error::DimensionMismatch("dyads live on different systems".into()));
        }
        Ok(DiagonalMixedState {
            weights,
            structure: MixedStructure::Explicit { dyads },
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn structure(&self) -> &MixedStructure {
        &self.structure
    }

    pub fn trace_deficit(&self) -> f64 {
        match &self.structure {
            MixedStructure::TmsvPhaseRandomized { epsilon, cutoff, .. } => {
                epsilon.powi(2 * (*cutoff as i32 + 1))
            }
            MixedStructure::Explicit { .. } => 1.0 - self.weights.iter().sum::<f64>(),
        }
    }

    /// Matrix `rho[m,n] = <m,m|rho|n,n>` for the TMSV structure.
    pub fn diagonal_block(&self) -> Option<Vec<Vec<f64>>> {
        match &self.structure {
            MixedStructure::TmsvPhaseRandomized { delta_phi, .. } => {
                let p = &self.weights;
                let amp: Vec<f64> = p.iter().map(|w| w.sqrt()).collect();
                Some(
                    (0..p.len())
                        .map(|m| {
                            (0..p.len())
                                .map(|n| {
                                    if m == n {
                                        p[m]
                                    } else {
                                        amp[m] * amp[n] * sinc(delta_phi * (m as f64 - n as f64))
                                    }
                                })
                                .collect()
                        })
                        .collect(),
                )
            }
            MixedStructure::Explicit { .. } => None,
        }
    }
}

/// `Tr(rho L)` together with the trace the truncated state is missing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixedExpectation {
    pub value: f64,
    pub trace_deficit: f64,
}

/// Neumaier-compensated running sum.
#[derive(Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

pub fn expectation_mixed(op: &GammaOperator, rho: &DiagonalMixedState) -> Result<MixedExpectation> {
    let value = match rho.structure() {
        MixedStructure::TmsvPhaseRandomized { cutoff, .. } => {
            if op.n() != cutoff + 1 {
                return Err(Error::DimensionMismatch(format!(
                    "operator of size {} against a state truncated at {cutoff}",
                    op.n()
                )));
            }
            let block = rho.diagonal_block().expect("tmsv structure");
            let mut acc = CompensatedSum::default();
            for (m, row) in block.iter().enumerate() {
                for (n, &r) in row.iter().enumerate() {
                    // Tr(rho L) = sum rho[m,n] gamma[n,m]; rho is real symmetric
                    acc.add(r * op.gamma()[(n, m)].re);
                }
            }
            acc.value()
        }
        MixedStructure::Explicit { dyads } => {
            let mut acc = CompensatedSum::default();
            for (w, psi) in rho.weights().iter().zip(dyads) {
                acc.add(w * op.expectation_pure(psi)?);
            }
            acc.value()
        }
    };
    Ok(MixedExpectation {
        value,
        trace_deficit: rho.trace_deficit(),
    })
}

/// `W_L = lambda I (x) I - L`.
pub fn witness_from<L: Observable + ?Sized>(op: &L, lambda: f64) -> DenseOperator {
    let dense = op.to_dense();
    let dim = dense.matrix.nrows();
    DenseOperator {
        matrix: CMatrix::identity(dim, dim).scale(lambda) - dense.matrix,
        d_a: dense.d_a,
        d_b: dense.d_b,
    }
}
