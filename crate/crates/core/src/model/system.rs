use crate::error::{Error, Result};
use crate::matops::{self, dot, Matrix};

use super::nonlinearity::{eval_psi, Nonlinearity};

/// Slack for rounding in [`rho_bound_holds`].
pub const RHO_BOUND_SLACK: f64 = 1e-12;

/// Transport PDEs `∂t x + Λ ∂z x = 0` on `z ∈ [0, 1]` with left boundary
/// driven by the ODE `χ' = Aχ + BΨ(Zχ)` through `x(t, 0) = Cχ`, measured at
/// the right boundary as `y = M x(t, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PdeOdeSystem {
    lambda: Vec<f64>,
    a_mat: Matrix,
    b_mat: Matrix,
    c_mat: Matrix,
    z_mat: Matrix,
    m_mat: Matrix,
    psi: Nonlinearity,
    ell: f64,
}

fn check_shape(field: &str, m: &Matrix, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::dim(
            field,
            format!("{rows}x{cols}"),
            format!("{}x{}", m.rows(), m.cols()),
        ));
    }
    Ok(())
}

impl PdeOdeSystem {
    /// Validates dimensions, positivity of the speeds, and `ell >= Lip(psi)`.
    /// Dimensions are inferred: `n_x` from `lambda`, `n_χ` from `A`, `n_z`
    /// from `Z`, `n_y` from `M`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        lambda: Vec<f64>,
        a_mat: Matrix,
        b_mat: Matrix,
        c_mat: Matrix,
        z_mat: Matrix,
        m_mat: Matrix,
        psi: Nonlinearity,
        ell: f64,
    ) -> Result<Self> {
        let n_x = lambda.len();
        if n_x == 0 {
            return Err(Error::dim("lambda", "at least 1 entry", 0));
        }
        if let Some(bad) = lambda.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::Invariant(format!(
                "transport speeds must be strictly positive, got {bad}"
            )));
        }
        let n_chi = a_mat.rows();
        if n_chi == 0 {
            return Err(Error::dim("A", "at least 1x1", "0x0"));
        }
        check_shape("A", &a_mat, n_chi, n_chi)?;
        let n_z = z_mat.rows();
        check_shape("Z", &z_mat, n_z, n_chi)?;
        // componentwise nonlinearity: n_l = n_z
        check_shape("B", &b_mat, n_chi, n_z)?;
        check_shape("C", &c_mat, n_x, n_chi)?;
        let n_y = m_mat.rows();
        check_shape("M", &m_mat, n_y, n_x)?;
        if !(ell > 0.0 && ell.is_finite()) {
            return Err(Error::Invariant(format!(
                "Lipschitz bound ell must be positive, got {ell}"
            )));
        }
        if ell < psi.lipschitz() {
            return Err(Error::Invariant(format!(
                "ell = {ell} is below the Lipschitz constant {} of the nonlinearity",
                psi.lipschitz()
            )));
        }
        Ok(PdeOdeSystem {
            lambda,
            a_mat,
            b_mat,
            c_mat,
            z_mat,
            m_mat,
            psi,
            ell,
        })
    }

    pub fn n_x(&self) -> usize {
        self.lambda.len()
    }
    pub fn n_chi(&self) -> usize {
        self.a_mat.rows()
    }
    pub fn n_z(&self) -> usize {
        self.z_mat.rows()
    }
    pub fn n_l(&self) -> usize {
        self.b_mat.cols()
    }
    pub fn n_y(&self) -> usize {
        self.m_mat.rows()
    }
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }
    pub fn lambda_mat(&self) -> Matrix {
        Matrix::from_diag(&self.lambda)
    }
    pub fn max_speed(&self) -> f64 {
        self.lambda.iter().cloned().fold(0.0, f64::max)
    }
    pub fn a(&self) -> &Matrix {
        &self.a_mat
    }
    pub fn b(&self) -> &Matrix {
        &self.b_mat
    }
    pub fn c(&self) -> &Matrix {
        &self.c_mat
    }
    pub fn z(&self) -> &Matrix {
        &self.z_mat
    }
    pub fn m(&self) -> &Matrix {
        &self.m_mat
    }
    pub fn psi(&self) -> &Nonlinearity {
        &self.psi
    }
    pub fn ell(&self) -> f64 {
        self.ell
    }

    /// ODE vector field `Aχ + BΨ(Zχ)`.
    pub fn ode_rhs(&self, chi: &[f64]) -> Vec<f64> {
        let nl = eval_psi(&self.psi, &self.z_mat.matvec(chi));
        let bn = self.b_mat.matvec(&nl);
        self.a_mat
            .matvec(chi)
            .into_iter()
            .zip(bn)
            .map(|(a, b)| a + b)
            .collect()
    }
}

/// `ρ(χ, η) = Ψ(Zχ) − Ψ(Z(χ − η))`
pub fn rho(sys: &PdeOdeSystem, chi: &[f64], eta: &[f64]) -> Vec<f64> {
    let diff: Vec<f64> = chi.iter().zip(eta).map(|(c, e)| c - e).collect();
    let a = eval_psi(sys.psi(), &sys.z().matvec(chi));
    let b = eval_psi(sys.psi(), &sys.z().matvec(&diff));
    a.into_iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `ρᵀρ − ℓ² ηᵀZᵀZη <= 0`, up to [`RHO_BOUND_SLACK`].
pub fn rho_bound_holds(sys: &PdeOdeSystem, chi: &[f64], eta: &[f64]) -> bool {
    let r = rho(sys, chi, eta);
    let ze = sys.z().matvec(eta);
    dot(&r, &r) - sys.ell() * sys.ell() * dot(&ze, &ze) <= RHO_BOUND_SLACK
}

/// Whether every eigenvalue of `a` has strictly negative real part.
///
/// Sides 1 and 2 are decided in closed form (sign of the entry; trace < 0 and
/// det > 0). Larger matrices go through Hessenberg + shifted QR and use the
/// threshold `-1e-8` on the spectral abscissa.
pub fn is_hurwitz(a: &Matrix) -> bool {
    assert!(a.is_square(), "is_hurwitz needs a square matrix");
    match a.rows() {
        0 => true,
        1 => a[(0, 0)] < 0.0,
        2 => {
            let tr = a[(0, 0)] + a[(1, 1)];
            let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
            tr < 0.0 && det > 0.0
        }
        _ => match matops::eigenvalues(a) {
            Ok(ev) => ev.iter().all(|&(re, _)| re < -1e-8),
            Err(e) => {
                log::warn!("stability check failed to converge: {e}");
                false
            }
        },
    }
}
