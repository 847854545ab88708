use crate::error::{Error, Result};
use crate::matops::{Matrix, SymMatrix};

use super::system::PdeOdeSystem;

/// Candidate solution of the observer design conditions: the Lyapunov
/// weights `P1` (positive diagonal), `P2`, `P3` (symmetric), the injection
/// gain `L`, the exponential weight `mu > 0` and the multiplier `iota >= 0`.
///
/// The struct does not enforce its invariants so that structurally invalid
/// candidates can still be inspected; see [`Certificate::structural_issues`].
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    /// Diagonal entries of `P1`.
    pub p1: Vec<f64>,
    pub p2: Matrix,
    pub p3: Matrix,
    pub l_gain: Matrix,
    pub mu: f64,
    pub iota: f64,
}

impl Certificate {
    pub fn p1_mat(&self) -> Matrix {
        Matrix::from_diag(&self.p1)
    }

    pub fn n_x(&self) -> usize {
        self.p1.len()
    }

    pub fn n_chi(&self) -> usize {
        self.p3.rows()
    }

    /// Human-readable violations of the certificate invariants; empty when
    /// the certificate is structurally admissible.
    pub fn structural_issues(&self) -> Vec<String> {
        let mut issues = Vec::new();
        if let Some(d) = self.p1.iter().find(|&&d| !(d > 0.0 && d.is_finite())) {
            issues.push(format!("P1 entries must be strictly positive, got {d}"));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            issues.push(format!("mu must be strictly positive, got {}", self.mu));
        }
        if !(self.iota >= 0.0 && self.iota.is_finite()) {
            issues.push(format!("iota must be nonnegative, got {}", self.iota));
        }
        if !self.p3.is_square() {
            issues.push("P3 must be square".into());
        } else if self.p3.rows() > 0 && SymMatrix::new(self.p3.clone()).is_err() {
            issues.push("P3 must be symmetric".into());
        }
        issues
    }

    pub fn is_structurally_valid(&self) -> bool {
        self.structural_issues().is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        match self.structural_issues().into_iter().next() {
            None => Ok(()),
            Some(msg) => Err(Error::Invariant(msg)),
        }
    }

    /// Checks every shape against the plant.
    pub fn check_dims(&self, sys: &PdeOdeSystem) -> Result<()> {
        let (nx, nc, ny) = (sys.n_x(), sys.n_chi(), sys.n_y());
        if self.p1.len() != nx {
            return Err(Error::dim("P1", nx, self.p1.len()));
        }
        let check = |field: &str, m: &Matrix, r: usize, c: usize| {
            if m.shape() != (r, c) {
                Err(Error::dim(
                    field,
                    format!("{r}x{c}"),
                    format!("{}x{}", m.rows(), m.cols()),
                ))
            } else {
                Ok(())
            }
        };
        check("P2", &self.p2, nc, nx)?;
        check("P3", &self.p3, nc, nc)?;
        check("L", &self.l_gain, nc, ny)?;
        Ok(())
    }

    /// Multiplies `P1, P2, P3, iota` by `s`; `L` and `mu` are unchanged.
    pub fn scaled(&self, s: f64) -> Certificate {
        Certificate {
            p1: self.p1.iter().map(|v| v * s).collect(),
            p2: self.p2.scale(s),
            p3: self.p3.scale(s),
            l_gain: self.l_gain.clone(),
            mu: self.mu,
            iota: self.iota * s,
        }
    }
}
