//! Seeded random matrices and states for restarts and tests.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::bipartite::PureState;
use crate::numerics::CMatrix;

/// Entries drawn i.i.d. from the complex standard normal (unit variance per component).
pub fn complex_normal_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    DMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// `(A + A^†) / 2` for a complex Gaussian `A`.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let a = complex_normal_matrix(rng, n, n);
    (&a + a.adjoint()).scale(0.5)
}

/// `A A^† / n` for a complex Gaussian `A`: Hermitian and positive semi-definite.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let a = complex_normal_matrix(rng, n, n);
    (&a * a.adjoint()).unscale(n as f64)
}

/// Haar-distributed unitary via QR of a Gaussian matrix with the phase of `R`'s diagonal removed.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let qr = complex_normal_matrix(rng, n, n).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        let col = q.column(j) * phase;
        q.set_column(j, &col);
    }
    q
}

/// Normalized `sum_{k<r} |x_k, y_k>` with Gaussian, non-orthogonal local vectors.
pub fn random_rank_r_state<R: Rng + ?Sized>(rng: &mut R, d_a: usize, d_b: usize, r: usize) -> PureState {
    let x = complex_normal_matrix(rng, d_a, r);
    let y = complex_normal_matrix(rng, d_b, r);
    PureState::normalized(&x * y.transpose()).expect("Gaussian product terms vanish with probability 0")
}
