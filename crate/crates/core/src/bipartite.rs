//! Pure bipartite states and their Schmidt decomposition.
//!
//! A state `|psi> = sum_{a,b} M[a,b] |a,b>` is stored as its coefficient
//! matrix `M` (rows index subsystem A). The singular value decomposition of
//! `M` is the Schmidt decomposition of the state, and the rank of `M` is the
//! Schmidt rank.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, CMatrix, CVector};

/// Tolerance on `||M||_F = 1`.
pub const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PureStateJson", into = "PureStateJson")]
pub struct PureState {
    coeffs: CMatrix,
}

#[derive(Serialize, Deserialize)]
struct PureStateJson {
    d_a: usize,
    d_b: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl TryFrom<PureStateJson> for PureState {
    type Error = Error;

    fn try_from(j: PureStateJson) -> Result<Self> {
        PureState::new(numerics::matrix_from_parts(j.d_a, j.d_b, &j.re, &j.im)?)
    }
}

impl From<PureState> for PureStateJson {
    fn from(s: PureState) -> Self {
        let (re, im) = numerics::matrix_to_parts(&s.coeffs);
        PureStateJson {
            d_a: s.d_a(),
            d_b: s.d_b(),
            re,
            im,
        }
    }
}

impl PureState {
    /// Wraps an already normalized coefficient matrix.
    pub fn new(coeffs: CMatrix) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::DimensionMismatch("empty coefficient matrix".into()));
        }
        numerics::ensure_finite(&coeffs)?;
        let norm = coeffs.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(PureState { coeffs })
    }

    /// Rescales `coeffs` to unit Frobenius norm.
    pub fn normalized(coeffs: CMatrix) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::DimensionMismatch("empty coefficient matrix".into()));
        }
        numerics::ensure_finite(&coeffs)?;
        let norm = coeffs.norm();
        if norm.is_nan() || norm <= f64::MIN_POSITIVE {
            return Err(Error::ZeroState);
        }
        Ok(PureState {
            coeffs: coeffs.unscale(norm),
        })
    }

    /// Builds a state from amplitudes in composite order `a * d_b + b`, normalizing.
    pub fn from_amplitudes(d_a: usize, d_b: usize, amplitudes: &[Complex64]) -> Result<Self> {
        if amplitudes.len() != d_a * d_b {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for a {d_a}x{d_b} system",
                amplitudes.len()
            )));
        }
        Self::normalized(CMatrix::from_row_slice(d_a, d_b, amplitudes))
    }

    /// The normalized product state `|x> (x) |y>`.
    pub fn product(x: &CVector, y: &CVector) -> Result<Self> {
        Self::normalized(x * y.transpose())
    }

    /// `|a, b>` on a `d_a x d_b` system.
    pub fn basis(d_a: usize, d_b: usize, a: usize, b: usize) -> Self {
        let mut coeffs = CMatrix::zeros(d_a, d_b);
        coeffs[(a, b)] = Complex64::new(1.0, 0.0);
        PureState { coeffs }
    }

    /// `sum_{k<r} |k,k> / sqrt(r)` on a `d x d` system.
    pub fn maximally_entangled(d: usize, r: usize) -> Result<Self> {
        if r == 0 || r > d {
            return Err(Error::bad("r", format!("need 1 <= r <= d = {d}, got {r}")));
        }
        let mut coeffs = CMatrix::zeros(d, d);
        for k in 0..r {
            coeffs[(k, k)] = Complex64::new(1.0, 0.0);
        }
        Self::normalized(coeffs)
    }

    pub fn coeffs(&self) -> &CMatrix {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> CMatrix {
        self.coeffs
    }

    pub fn d_a(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn d_b(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.coeffs.shape()
    }

    /// State vector in composite order `a * d_b + b`.
    pub fn to_vector(&self) -> CVector {
        let (d_a, d_b) = self.dims();
        CVector::from_fn(d_a * d_b, |i, _| self.coeffs[(i / d_b, i % d_b)])
    }

    /// `<self|other> = Tr(M_self^† M_other)`.
    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch(format!(
                "states on {:?} and {:?}",
                self.dims(),
                other.dims()
            )));
        }
        Ok(self
            .coeffs
            .iter()
            .zip(other.coeffs.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}

/// `|psi> = sum_k lambda_k |e_k, f_k>` with complete local bases.
///
/// Column `k` of `left_basis` is `|e_k>`, column `k` of `right_basis` is
/// `|f_k>`; columns beyond the rank complete the bases.
#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    pub left_basis: CMatrix,
    pub right_basis: CMatrix,
    pub coefficients: Vec<f64>,
}

impl SchmidtDecomposition {
    pub fn rank(&self) -> usize {
        self.coefficients.len()
    }

    /// Coefficient matrix `sum_k lambda_k e_k f_k^T`.
    pub fn reconstruct(&self) -> CMatrix {
        let (d_a, d_b) = (self.left_basis.nrows(), self.right_basis.nrows());
        let mut m = CMatrix::zeros(d_a, d_b);
        for (k, &lambda) in self.coefficients.iter().enumerate() {
            m += self.left_basis.column(k) * self.right_basis.column(k).transpose() * Complex64::new(lambda, 0.0);
        }
        m
    }
}

pub fn schmidt_decompose(psi: &PureState, rank_tol: f64) -> Result<SchmidtDecomposition> {
    let dec = numerics::svd(psi.coeffs())?;
    let largest = dec.singular_values[0];
    if largest.is_nan() || largest <= f64::MIN_POSITIVE {
        return Err(Error::ZeroState);
    }
    let coefficients: Vec<f64> = dec
        .singular_values
        .iter()
        .copied()
        .take_while(|&s| s > rank_tol * largest)
        .collect();
    // M = U S V^†  =>  f_k = conj(v_k)
    Ok(SchmidtDecomposition {
        left_basis: dec.left,
        right_basis: dec.right.map(|z| z.conj()),
        coefficients,
    })
}

pub fn schmidt_rank(psi: &PureState, rank_tol: f64) -> Result<usize> {
    Ok(schmidt_decompose(psi, rank_tol)?.rank())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::bad("epsilon", format!("must lie in (0, 1), got {epsilon}")))
    }
}

/// Two-mode squeezed vacuum `sqrt(1 - eps^2) sum_k (eps e^{i phase})^k |k,k>`
/// truncated at `k <= cutoff` and renormalized.
pub fn tmsv_pure(epsilon: f64, phase: f64, cutoff: usize) -> Result<PureState> {
    check_epsilon(epsilon)?;
    if !phase.is_finite() {
        return Err(Error::bad("phase", "must be finite"));
    }
    let n = cutoff + 1;
    let q = Complex64::from_polar(epsilon, phase);
    let prefactor = (1.0 - epsilon * epsilon).sqrt();
    let mut coeffs = CMatrix::zeros(n, n);
    for k in 0..n {
        coeffs[(k, k)] = q.powu(k as u32) * prefactor;
    }
    PureState::normalized(coeffs)
}

/// Norm deficit `1 - ||unnormalized truncated TMSV||^2 = eps^{2(cutoff+1)}`.
pub fn tmsv_norm_deficit(epsilon: f64, cutoff: usize) -> f64 {
    epsilon.powi(2 * (cutoff as i32 + 1))
}

/// `(S (x) T)|psi>`, i.e. `M -> S M T^T`, renormalized.
pub fn apply_local(psi: &PureState, s: &CMatrix, t: &CMatrix) -> Result<PureState> {
    let (d_a, d_b) = psi.dims();
    if s.shape() != (d_a, d_a) || t.shape() != (d_b, d_b) {
        return Err(Error::DimensionMismatch(format!(
            "local maps {:?} and {:?} on a {d_a}x{d_b} state",
            s.shape(),
            t.shape()
        )));
    }
    PureState::normalized(s * psi.coeffs() * t.transpose())
}
