//! Dense matrix algebra for the small matrices that appear in certificate checks.
//!
//! Symmetric spectra come from cyclic Jacobi ([`sym_eig`]); eigenvalues of
//! general square matrices (used only for stability diagnostics) come from
//! Hessenberg reduction plus shifted QR ([`eigenvalues`]).

mod cholesky;
mod dense;
mod general;
mod sym;

pub use cholesky::Cholesky;
pub use dense::{dot, norm2, Matrix};
pub use general::{eigenvalues, Eigenvalue};
pub use sym::{
    definiteness_margin, lambda_max, lambda_min, sym_eig, sym_eig_with, Spectrum, SymMatrix,
    DEFAULT_DEFINITENESS_TOL, DEFAULT_MAX_SWEEPS, SYMMETRY_TOL,
};
