//! The two-speed example plant with a deadzone in the boundary dynamics, and
//! its published observer certificate.

use crate::matops::Matrix;

use super::certificate::Certificate;
use super::nonlinearity::Nonlinearity;
use super::system::PdeOdeSystem;

/// `Λ = diag(3/2, 2)`, `A = [[-1, 2], [2.05, -4]]` (not Hurwitz), `B = (0, 1/2)ᵀ`,
/// `Z = (1 1)`, `C = I`, `M = (1 1)`, unit deadzone, `ℓ = 1`.
pub fn system() -> PdeOdeSystem {
    PdeOdeSystem::new(
        vec![1.5, 2.0],
        Matrix::from_rows(&[[-1.0, 2.0], [2.05, -4.0]]).unwrap(),
        Matrix::from_rows(&[[0.0], [0.5]]).unwrap(),
        Matrix::identity(2),
        Matrix::from_rows(&[[1.0, 1.0]]).unwrap(),
        Matrix::from_rows(&[[1.0, 1.0]]).unwrap(),
        Nonlinearity::deadzone(1.0),
        1.0,
    )
    .expect("reference system is valid")
}

pub fn published_certificate() -> Certificate {
    Certificate {
        p1: vec![11.76, 16.24],
        p2: Matrix::from_rows(&[[-6.904, -7.157], [-4.254, -2.427]]).unwrap(),
        p3: Matrix::from_rows(&[[14.4, 4.976], [4.976, 7.52]]).unwrap(),
        l_gain: Matrix::from_rows(&[[0.4593], [0.2025]]).unwrap(),
        mu: 0.4,
        iota: 3.335,
    }
}
