//! Dense complex linear algebra used throughout the crate.
//!
//! Everything here is a thin contract layer over `nalgebra`: inputs are
//! validated (finite, square, Hermitian), outputs are sorted in descending
//! order, and the SVD is completed to full unitary factors so callers can
//! work with complete local bases.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative tolerance for Hermiticity checks and eigen-residuals.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Relative threshold below which a singular value / metric eigenvalue counts as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

const SVD_EPS: f64 = 1e-15;
const SVD_MAX_ITERS: usize = 10_000;

/// Eigenpairs of a Hermitian matrix (or of a generalized Hermitian pencil),
/// eigenvalues in descending order, eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl HermitianEig {
    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn vector(&self, i: usize) -> CVector {
        self.eigenvectors.column(i).into_owned()
    }
}

/// Full singular value decomposition `A = left * diag(singular_values) * right^†`.
///
/// `left` is `rows x rows` and `right` is `cols x cols`; only the first
/// `min(rows, cols)` columns of each pair with a singular value.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub left: CMatrix,
    pub singular_values: Vec<f64>,
    pub right: CMatrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> CMatrix {
        let (m, n) = (self.left.nrows(), self.right.nrows());
        let mut sigma = CMatrix::zeros(m, n);
        for (k, &s) in self.singular_values.iter().enumerate() {
            sigma[(k, k)] = Complex64::new(s, 0.0);
        }
        &self.left * sigma * self.right.adjoint()
    }
}

pub fn ensure_finite(a: &CMatrix) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn ensure_square(a: &CMatrix, what: &str) -> Result<()> {
    if a.nrows() == a.ncols() && a.nrows() > 0 {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "{what} must be square and nonempty, got {}x{}",
            a.nrows(),
            a.ncols()
        )))
    }
}

/// Frobenius norm of `A - A^†`.
pub fn hermitian_deviation(a: &CMatrix) -> f64 {
    (a - a.adjoint()).norm()
}

/// Checks `||A - A^†|| <= tol * ||A||` (Frobenius norms).
pub fn ensure_hermitian(a: &CMatrix, tol: f64) -> Result<()> {
    ensure_square(a, "matrix")?;
    ensure_finite(a)?;
    let deviation = hermitian_deviation(a);
    let allowed = tol * a.norm();
    if deviation <= allowed {
        Ok(())
    } else {
        Err(Error::NotHermitian { deviation, allowed })
    }
}

fn sorted_descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    order
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues descending.
pub fn hermitian_eig(a: &CMatrix, tol: f64) -> Result<HermitianEig> {
    ensure_hermitian(a, tol)?;
    Ok(hermitian_eig_unchecked(a))
}

/// Skips validation; the Hermitian part of `a` is decomposed.
pub(crate) fn hermitian_eig_unchecked(a: &CMatrix) -> HermitianEig {
    let sym = (a + a.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(sym);
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let order = sorted_descending(&values);
    let n = a.nrows();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    HermitianEig {
        eigenvalues: order.iter().map(|&i| values[i]).collect(),
        eigenvectors: vectors,
    }
}

/// Largest eigenvalue of the Hermitian part of a small matrix, no vectors.
pub(crate) fn max_eigenvalue_unchecked(a: &CMatrix) -> f64 {
    match a.nrows() {
        1 => a[(0, 0)].re,
        _ => {
            let sym = (a + a.adjoint()).scale(0.5);
            sym.symmetric_eigenvalues()
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max)
        }
    }
}

/// Singular value decomposition with unitary factors, singular values descending.
pub fn svd(a: &CMatrix) -> Result<SvdResult> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::DimensionMismatch("svd of an empty matrix".into()));
    }
    ensure_finite(a)?;
    let (m, n) = (a.nrows(), a.ncols());
    let dec = SVD::try_new(a.clone(), true, true, SVD_EPS, SVD_MAX_ITERS)
        .ok_or(Error::NoConvergence)?;
    let u = dec.u.expect("u requested");
    let v = dec.v_t.expect("v_t requested").adjoint();
    let values: Vec<f64> = dec.singular_values.iter().copied().collect();
    let order = sorted_descending(&values);

    let k = values.len();
    let mut u_sorted = CMatrix::zeros(m, k);
    let mut v_sorted = CMatrix::zeros(n, k);
    for (dst, &src) in order.iter().enumerate() {
        u_sorted.set_column(dst, &u.column(src));
        v_sorted.set_column(dst, &v.column(src));
    }
    Ok(SvdResult {
        left: complete_orthonormal_basis(&u_sorted),
        singular_values: order.iter().map(|&i| values[i].max(0.0)).collect(),
        right: complete_orthonormal_basis(&v_sorted),
    })
}

/// Extends orthonormal columns `q` (n x k, k <= n) to an n x n unitary.
///
/// Candidates are the standard basis vectors, orthogonalized twice against
/// everything accepted so far; the candidate with the largest residual wins
/// each round.
pub fn complete_orthonormal_basis(q: &CMatrix) -> CMatrix {
    let n = q.nrows();
    let mut basis: Vec<CVector> = q.column_iter().map(|c| c.into_owned()).collect();
    while basis.len() < n {
        let mut best: Option<(f64, CVector)> = None;
        for e in 0..n {
            let mut v = CVector::zeros(n);
            v[e] = Complex64::new(1.0, 0.0);
            for _ in 0..2 {
                for b in &basis {
                    let proj = b.dotc(&v);
                    v -= b * proj;
                }
            }
            let norm = v.norm();
            if best.as_ref().is_none_or(|(bn, _)| norm > *bn) {
                best = Some((norm, v));
            }
        }
        let (norm, v) = best.expect("n > 0");
        basis.push(v.unscale(norm));
    }
    CMatrix::from_columns(&basis)
}

/// Solves `A v = g B v` on the range of the positive semi-definite metric `B`.
///
/// Both matrices are projected onto the eigenvectors of `B` whose eigenvalues
/// exceed `rank_tol * max_eig(B)`; the projected pencil is whitened and
/// diagonalized. Returned vectors satisfy `v^† B v = 1`; there are as many
/// eigenpairs as the numerical rank of `B`.
pub fn generalized_hermitian_eig(a: &CMatrix, b: &CMatrix, rank_tol: f64) -> Result<HermitianEig> {
    ensure_hermitian(a, DEFAULT_TOL)?;
    ensure_hermitian(b, DEFAULT_TOL)?;
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "pencil matrices differ in shape: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    generalized_hermitian_eig_unchecked(a, b, rank_tol)
}

pub(crate) fn generalized_hermitian_eig_unchecked(
    a: &CMatrix,
    b: &CMatrix,
    rank_tol: f64,
) -> Result<HermitianEig> {
    let metric = hermitian_eig_unchecked(b);
    let b_norm = metric
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let lowest = *metric.eigenvalues.last().expect("nonempty");
    if lowest < -rank_tol * b_norm {
        return Err(Error::MetricNotPsd(lowest));
    }
    let top = metric.eigenvalues[0];
    let cutoff = rank_tol * top;
    let kept: Vec<usize> = (0..metric.eigenvalues.len())
        .filter(|&i| top > 0.0 && metric.eigenvalues[i] > cutoff)
        .collect();
    if kept.is_empty() {
        return Err(Error::DegenerateMetric);
    }

    let n = a.nrows();
    let mut whiten = CMatrix::zeros(n, kept.len());
    for (j, &i) in kept.iter().enumerate() {
        let scale = 1.0 / metric.eigenvalues[i].sqrt();
        whiten.set_column(j, &metric.eigenvectors.column(i).scale(scale));
    }
    let reduced = whiten.adjoint() * a * &whiten;
    let inner = hermitian_eig_unchecked(&reduced);
    Ok(HermitianEig {
        eigenvalues: inner.eigenvalues,
        eigenvectors: whiten * inner.eigenvectors,
    })
}

/// Row-major real and imaginary parts, the layout of every matrix in the JSON files.
pub fn matrix_to_parts(m: &CMatrix) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let re = m.row_iter().map(|r| r.iter().map(|z| z.re).collect()).collect();
    let im = m.row_iter().map(|r| r.iter().map(|z| z.im).collect()).collect();
    (re, im)
}

pub fn matrix_from_parts(
    rows: usize,
    cols: usize,
    re: &[Vec<f64>],
    im: &[Vec<f64>],
) -> Result<CMatrix> {
    let shape_ok = |parts: &[Vec<f64>]| parts.len() == rows && parts.iter().all(|r| r.len() == cols);
    if !shape_ok(re) || !shape_ok(im) {
        return Err(Error::DimensionMismatch(format!(
            "expected {rows}x{cols} `re` and `im` arrays"
        )));
    }
    let m = CMatrix::from_fn(rows, cols, |i, j| Complex64::new(re[i][j], im[i][j]));
    ensure_finite(&m)?;
    Ok(m)
}
