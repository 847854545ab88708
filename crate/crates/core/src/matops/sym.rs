use crate::error::{Error, Result};

use super::dense::Matrix;

/// Relative asymmetry accepted (and removed) by [`SymMatrix::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Default absolute tolerance for definiteness verdicts.
pub const DEFAULT_DEFINITENESS_TOL: f64 = 1e-9;

/// Sweep budget for the cyclic Jacobi iteration.
pub const DEFAULT_MAX_SWEEPS: usize = 100;

/// Off-diagonal reduction target, relative to the Frobenius norm.
const OFF_DIAG_TOL: f64 = 1e-12;

/// A real symmetric matrix. Construction symmetrizes the input and rejects it
/// when the correction exceeds [`SYMMETRY_TOL`] relative to its norm.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotSquare {
                rows: m.rows(),
                cols: m.cols(),
            });
        }
        if m.rows() == 0 {
            return Err(Error::Invariant("symmetric matrix must have side >= 1".into()));
        }
        let sym = Matrix::from_fn(m.rows(), m.cols(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
        let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);
        let asymmetry = (&m - &sym).frobenius_norm() / scale;
        if asymmetry > SYMMETRY_TOL {
            return Err(Error::NotSymmetric { asymmetry });
        }
        Ok(SymMatrix(sym))
    }

    /// Symmetrizes without the asymmetry check. Used where the input is
    /// symmetric by construction up to rounding.
    pub(crate) fn symmetrize(m: &Matrix) -> Self {
        assert!(m.is_square() && m.rows() > 0);
        SymMatrix(Matrix::from_fn(m.rows(), m.cols(), |i, j| {
            0.5 * (m[(i, j)] + m[(j, i)])
        }))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(Matrix::identity(n))
    }

    pub fn from_diag(d: &[f64]) -> Self {
        SymMatrix(Matrix::from_diag(d))
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// `vᵀ S v`
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        super::dense::dot(v, &self.0.matvec(v))
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &other.0)
    }
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal; column `i` pairs with `eigenvalues[i]`.
    pub eigenvectors: Matrix,
}

impl Spectrum {
    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }

    pub fn eigenvector(&self, i: usize) -> Vec<f64> {
        let q = &self.eigenvectors;
        (0..q.rows()).map(|k| q[(k, i)]).collect()
    }
}

fn off_diag_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Full spectrum by cyclic Jacobi rotations.
pub fn sym_eig(s: &SymMatrix) -> Result<Spectrum> {
    sym_eig_with(s, DEFAULT_MAX_SWEEPS)
}

pub fn sym_eig_with(s: &SymMatrix, max_sweeps: usize) -> Result<Spectrum> {
    let n = s.n();
    let mut a = s.matrix().clone();
    let mut v = Matrix::identity(n);
    let target = OFF_DIAG_TOL * a.frobenius_norm();

    let mut converged = off_diag_norm(&a) <= target;
    let mut sweep = 0;
    while !converged {
        if sweep == max_sweeps {
            return Err(Error::NoConvergence { sweeps: max_sweeps });
        }
        sweep += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
        converged = off_diag_norm(&a) <= target;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let eigenvalues = order.iter().map(|&i| a[(i, i)]).collect();
    let eigenvectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

pub fn lambda_min(s: &SymMatrix) -> Result<f64> {
    Ok(sym_eig(s)?.min())
}

pub fn lambda_max(s: &SymMatrix) -> Result<f64> {
    Ok(sym_eig(s)?.max())
}

/// Smallest eigenvalue. Positive definite iff the margin exceeds the
/// tolerance; negative definite iff `lambda_max < -tol`.
pub fn definiteness_margin(s: &SymMatrix) -> Result<f64> {
    lambda_min(s)
}
