//! Schmidt number witnesses for bipartite quantum states.
//!
//! The central quantity is `f_r(L)`, the largest expectation value a Hermitian
//! test operator `L` can reach over states whose Schmidt number is at most `r`.
//! A measured `<L>` above `f_r(L)` certifies Schmidt number greater than `r`.
//!
//! * [`numerics`]: Hermitian / generalized eigenproblems and SVD on dense complex matrices.
//! * [`bipartite`]: pure states as coefficient matrices, Schmidt decomposition, local maps.
//! * [`operators`]: projector, Schmidt-diagonal (gamma) and dense test operators.
//! * [`schmidt_number`]: closed forms for `f_r`, the alternating r-SE solver, witness verdicts.
//! * [`tmsv`]: phase-randomized two-mode squeezed vacuum analysis.

pub mod bipartite;
pub mod error;
pub mod numerics;
pub mod operators;
pub mod random;
pub mod schmidt_number;
pub mod tmsv;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use numerics::{CMatrix, CVector};
