//! Certificate matrices, feasibility verdicts and guaranteed decay constants.
//!
//! With `w = [ε(z); ε(1); η; ρ]`, the Lyapunov weight is
//! `G(z) = [[e^{-μz} P1, P2ᵀ], [P2, P3]]` and the dissipation form is
//! `Q(z) = [[M(z) + ι ℓ² diag(0, 0, ZᵀZ), Γ], [Γᵀ, -ιI]]` with
//! `Γ = (P2ᵀB; 0; P3B)`. The matrix `K` is `Q` with the exponential weight of
//! the first diagonal block frozen at `e^{-μ}`; since `e^{-μz} >= e^{-μ}`,
//! `Q(z) ⪯ K` on `[0, 1]`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matops::{lambda_max, lambda_min, Matrix, SymMatrix, DEFAULT_DEFINITENESS_TOL};
use crate::model::{Certificate, PdeOdeSystem};

pub const DEFAULT_TOL: f64 = DEFAULT_DEFINITENESS_TOL;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub feasible: bool,
    /// `λ_min` of the boundary matrix `[[P1 e^{-μ}, P2ᵀ], [P2, P3]]`.
    pub boundary_margin: f64,
    /// `λ_max(K)`.
    pub k_margin: f64,
    pub structural_ok: bool,
    pub tolerance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayEstimate {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub kappa: f64,
    /// Guaranteed exponential rate of the error distance (1/time).
    pub lambda_rate: f64,
}

impl DecayEstimate {
    pub fn from_alphas(alpha1: f64, alpha2: f64, alpha3: f64) -> Self {
        DecayEstimate {
            alpha1,
            alpha2,
            alpha3,
            kappa: (alpha2 / alpha1).sqrt(),
            lambda_rate: alpha3 / (2.0 * alpha2),
        }
    }

    /// `κ e^{-λ t}`
    pub fn envelope(&self, t: f64) -> f64 {
        self.kappa * (-self.lambda_rate * t).exp()
    }
}

/// `Xᵀ diag(d) X`, filled symmetrically.
fn congruence_diag(x: &Matrix, d: &[f64]) -> Matrix {
    let n = x.cols();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v: f64 = (0..x.rows()).map(|k| x[(k, i)] * d[k] * x[(k, j)]).sum();
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

fn weighted_g(cert: &Certificate, weight: f64) -> SymMatrix {
    let (nx, nc) = (cert.n_x(), cert.n_chi());
    let mut g = Matrix::zeros(nx + nc, nx + nc);
    g.set_block(0, 0, &Matrix::from_diag(&cert.p1).scale(weight));
    g.set_sym_block(nx, 0, &cert.p2);
    g.set_block(nx, nx, &cert.p3);
    SymMatrix::symmetrize(&g)
}

/// `G(z)`
pub fn build_g(cert: &Certificate, z: f64) -> SymMatrix {
    weighted_g(cert, (-cert.mu * z).exp())
}

/// `[[P1 e^{-μ}, P2ᵀ], [P2, P3]]`, required positive definite.
pub fn build_boundary_matrix(cert: &Certificate) -> SymMatrix {
    weighted_g(cert, (-cert.mu).exp())
}

/// Side `2 n_x + n_χ`, in the coordinates `(ε(z), ε(1), η)`.
fn assemble_m(sys: &PdeOdeSystem, cert: &Certificate, first_weight: f64) -> Matrix {
    let (nx, nc) = (sys.n_x(), sys.n_chi());
    let side = 2 * nx + nc;
    let lam = sys.lambda();
    let emu = (-cert.mu).exp();
    let p2t = cert.p2.transpose();
    let lm = &cert.l_gain * sys.m();

    let mut m = Matrix::zeros(side, side);
    let d11: Vec<f64> = (0..nx)
        .map(|i| -first_weight * cert.mu * lam[i] * cert.p1[i])
        .collect();
    m.set_block(0, 0, &Matrix::from_diag(&d11));
    m.set_sym_block(0, nx, &-&(&p2t * &lm));
    m.set_sym_block(0, 2 * nx, &(&p2t * sys.a()));

    let d22: Vec<f64> = (0..nx).map(|i| -lam[i] * cert.p1[i] * emu).collect();
    m.set_block(nx, nx, &Matrix::from_diag(&d22));
    let b23 = &-&(&sys.lambda_mat() * &p2t) - &(&lm.transpose() * &cert.p3);
    m.set_sym_block(nx, 2 * nx, &b23);

    let inner = &(&cert.p3 * sys.a()) + &(&(&cert.p2 * &sys.lambda_mat()) * sys.c());
    let lp1: Vec<f64> = (0..nx).map(|i| lam[i] * cert.p1[i]).collect();
    let b33 = &inner.he() + &congruence_diag(sys.c(), &lp1);
    m.set_block(2 * nx, 2 * nx, &b33);
    m
}

/// `M(z)` of the inner-product identity, side `2 n_x + n_χ`. The `(2,2)`
/// block is the constant `-Λ P1 e^{-μ}` produced by the boundary term of the
/// integration by parts.
pub fn build_m(sys: &PdeOdeSystem, cert: &Certificate, z: f64) -> SymMatrix {
    SymMatrix::symmetrize(&assemble_m(sys, cert, (-cert.mu * z).exp()))
}

/// `Γ = (P2ᵀB; 0; P3B)`, shape `(2 n_x + n_χ) × n_l`.
pub fn build_gamma(sys: &PdeOdeSystem, cert: &Certificate) -> Matrix {
    let (nx, nc, nl) = (sys.n_x(), sys.n_chi(), sys.n_l());
    let mut g = Matrix::zeros(2 * nx + nc, nl);
    g.set_block(0, 0, &(&cert.p2.transpose() * sys.b()));
    g.set_block(2 * nx, 0, &(&cert.p3 * sys.b()));
    g
}

fn assemble_q(sys: &PdeOdeSystem, cert: &Certificate, first_weight: f64) -> SymMatrix {
    let (nx, nc, nl) = (sys.n_x(), sys.n_chi(), sys.n_l());
    let side = 2 * nx + nc + nl;
    let mut q = Matrix::zeros(side, side);
    let mut m = assemble_m(sys, cert, first_weight);
    let ell2 = sys.ell() * sys.ell();
    let ztz = congruence_diag(sys.z(), &vec![cert.iota * ell2; sys.n_z()]);
    for i in 0..nc {
        for j in 0..nc {
            m[(2 * nx + i, 2 * nx + j)] += ztz[(i, j)];
        }
    }
    q.set_block(0, 0, &m);
    q.set_sym_block(0, 2 * nx + nc, &build_gamma(sys, cert));
    q.set_block(2 * nx + nc, 2 * nx + nc, &Matrix::identity(nl).scale(-cert.iota));
    SymMatrix::symmetrize(&q)
}

/// `Q(z)`, side `2 n_x + n_χ + n_l`.
pub fn build_q(sys: &PdeOdeSystem, cert: &Certificate, z: f64) -> SymMatrix {
    assemble_q(sys, cert, (-cert.mu * z).exp())
}

/// `K`, required negative definite.
pub fn build_k(sys: &PdeOdeSystem, cert: &Certificate) -> SymMatrix {
    assemble_q(sys, cert, (-cert.mu).exp())
}

pub fn verify(sys: &PdeOdeSystem, cert: &Certificate, tol: f64) -> Result<VerificationReport> {
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(Error::Config(format!("tolerance must be nonnegative, got {tol}")));
    }
    cert.check_dims(sys)?;
    let structural_ok = cert.is_structurally_valid();
    let boundary_margin = lambda_min(&build_boundary_matrix(cert))?;
    let k_margin = lambda_max(&build_k(sys, cert))?;
    Ok(VerificationReport {
        feasible: structural_ok && boundary_margin > tol && k_margin < -tol,
        boundary_margin,
        k_margin,
        structural_ok,
        tolerance: tol,
    })
}

/// Decay constants of a feasible certificate.
pub fn decay_estimate(sys: &PdeOdeSystem, cert: &Certificate) -> Result<DecayEstimate> {
    let report = verify(sys, cert, DEFAULT_TOL)?;
    if !report.feasible {
        return Err(Error::Infeasible(format!(
            "boundary margin {:e}, K margin {:e}, structural {}",
            report.boundary_margin, report.k_margin, report.structural_ok
        )));
    }
    let alpha1 = report.boundary_margin;
    let alpha2 = lambda_max(&build_g(cert, 0.0))?;
    let alpha3 = report.k_margin.abs();
    Ok(DecayEstimate::from_alphas(alpha1, alpha2, alpha3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference;
    use approx::assert_relative_eq;

    fn paper() -> (PdeOdeSystem, Certificate) {
        (reference::system(), reference::published_certificate())
    }

    #[test]
    fn g_endpoints() {
        let (_, cert) = paper();
        let g0 = build_g(&cert, 0.0);
        assert_eq!(g0.get(0, 0), 11.76);
        assert_eq!(g0.get(1, 1), 16.24);
        assert_eq!(g0.get(2, 0), -6.904);
        assert_eq!(g0.get(0, 2), -6.904);
        assert_eq!(build_g(&cert, 1.0), build_boundary_matrix(&cert));
        let g = build_g(&cert, 0.5);
        assert_relative_eq!(g.get(0, 0), 11.76 * (-0.2f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(g.get(1, 1), 16.24 * (-0.2f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn boundary_matrix_entries() {
        let (_, cert) = paper();
        let b = build_boundary_matrix(&cert);
        assert_relative_eq!(b.get(0, 0), 11.76 * (-0.4f64).exp(), max_relative = 1e-15);
        let trivial = Certificate {
            p1: vec![1.0, 1.0],
            p2: Matrix::zeros(2, 2),
            p3: Matrix::identity(2),
            l_gain: Matrix::zeros(2, 1),
            mu: 0.0,
            iota: 0.0,
        };
        assert_eq!(build_boundary_matrix(&trivial), SymMatrix::identity(4));
    }

    #[test]
    fn m_first_block_and_zero_gain_case() {
        let (sys, cert) = paper();
        let m = build_m(&sys, &cert, 0.0);
        assert_relative_eq!(m.get(0, 0), -0.4 * 1.5 * 11.76, max_relative = 1e-15);
        assert_relative_eq!(m.get(1, 1), -0.4 * 2.0 * 16.24, max_relative = 1e-15);

        let sys0 = PdeOdeSystem::new(
            sys.lambda().to_vec(),
            sys.a().clone(),
            sys.b().clone(),
            Matrix::zeros(2, 2),
            sys.z().clone(),
            sys.m().clone(),
            *sys.psi(),
            1.0,
        )
        .unwrap();
        let cert0 = Certificate {
            p2: Matrix::zeros(2, 2),
            l_gain: Matrix::zeros(2, 1),
            ..cert.clone()
        };
        let m = build_m(&sys0, &cert0, 0.3).into_matrix();
        let he = (&cert0.p3 * sys0.a()).he();
        for i in 0..6 {
            for j in 0..6 {
                let expect = match (i, j) {
                    (0, 0) | (1, 1) => {
                        -(-0.4 * 0.3f64).exp() * 0.4 * sys.lambda()[i] * cert.p1[i]
                    }
                    (2, 2) | (3, 3) => -sys.lambda()[i - 2] * cert.p1[i - 2] * (-0.4f64).exp(),
                    (4..=5, 4..=5) => he[(i - 4, j - 4)],
                    _ => 0.0,
                };
                assert_relative_eq!(m[(i, j)], expect, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn gamma_block() {
        let (sys, cert) = paper();
        let g = build_gamma(&sys, &cert);
        assert_relative_eq!(g[(4, 0)], 2.488, max_relative = 1e-14);
        assert_relative_eq!(g[(5, 0)], 3.76, max_relative = 1e-14);
        assert_eq!(g[(2, 0)], 0.0);
        assert_eq!(g[(3, 0)], 0.0);
        let k = build_k(&sys, &cert);
        assert_eq!(k.get(4, 6), g[(4, 0)]);
        assert_eq!(k.get(6, 6), -3.335);
    }

    #[test]
    fn k_equals_q_at_one_and_no_nonlinearity_channel() {
        let (sys, cert) = paper();
        assert_eq!(build_q(&sys, &cert, 1.0), build_k(&sys, &cert));

        let sys0 = PdeOdeSystem::new(
            sys.lambda().to_vec(),
            sys.a().clone(),
            Matrix::zeros(2, 1),
            sys.c().clone(),
            sys.z().clone(),
            sys.m().clone(),
            *sys.psi(),
            1.0,
        )
        .unwrap();
        let cert0 = Certificate {
            iota: 0.0,
            ..cert.clone()
        };
        let k = build_k(&sys0, &cert0);
        let m1 = build_m(&sys0, &cert0, 1.0);
        for i in 0..7 {
            for j in 0..7 {
                let expect = if i < 6 && j < 6 { m1.get(i, j) } else { 0.0 };
                assert_eq!(k.get(i, j), expect);
            }
        }
    }

    #[test]
    fn built_matrices_are_exactly_symmetric() {
        let (sys, cert) = paper();
        for z in [0.0, 0.37, 1.0] {
            for s in [build_g(&cert, z), build_m(&sys, &cert, z), build_q(&sys, &cert, z)] {
                let m = s.matrix();
                assert_eq!(m, &m.transpose());
                assert_eq!(SymMatrix::new(m.clone()).unwrap(), s);
            }
        }
    }

    #[test]
    fn reference_certificate_constants() {
        let (sys, cert) = paper();
        let r = verify(&sys, &cert, DEFAULT_TOL).unwrap();
        assert!(r.feasible && r.structural_ok);
        // independent dense-eigensolver values
        let d = decay_estimate(&sys, &cert).unwrap();
        assert_relative_eq!(d.alpha1, 1.2802774260041687, max_relative = 1e-10);
        assert_relative_eq!(d.alpha2, 26.71741726583872, max_relative = 1e-10);
        assert_relative_eq!(d.alpha3, 0.008073446976067369, max_relative = 1e-8);
        assert_relative_eq!(d.kappa, 4.568200874368324, max_relative = 1e-10);
        assert_relative_eq!(d.lambda_rate, 0.00015108958503990945, max_relative = 1e-8);
        assert_relative_eq!(r.k_margin, -d.alpha3, max_relative = 1e-15);
    }

    #[test]
    fn negated_gain_is_infeasible() {
        let (sys, mut cert) = paper();
        cert.l_gain = cert.l_gain.scale(-1.0);
        let r = verify(&sys, &cert, DEFAULT_TOL).unwrap();
        assert!(!r.feasible);
        assert!(r.k_margin > 1.0);
    }

    #[test]
    fn tolerance_is_monotone() {
        let (sys, cert) = paper();
        let mut last = true;
        for tol in [0.0, 1e-9, 1e-4, 1e-3, 5e-3, 1e-2, 0.1, 1.0] {
            let f = verify(&sys, &cert, tol).unwrap().feasible;
            assert!(last || !f);
            last = f;
        }
        assert!(!verify(&sys, &cert, 1e-2).unwrap().feasible);
        assert!(verify(&sys, &cert, -1.0).is_err());
    }

    #[test]
    fn q_below_k_on_interval() {
        let (sys, cert) = paper();
        let k = build_k(&sys, &cert);
        for i in 0..=100 {
            let z = i as f64 / 100.0;
            let gap = k.sub(&build_q(&sys, &cert, z));
            assert!(lambda_min(&gap).unwrap() >= -1e-12, "z = {z}");
        }
    }

    #[test]
    fn negative_mu_is_structurally_infeasible() {
        let (sys, mut cert) = paper();
        cert.mu = -0.1;
        let r = verify(&sys, &cert, DEFAULT_TOL).unwrap();
        assert!(!r.structural_ok);
        assert!(!r.feasible);
        assert!(matches!(decay_estimate(&sys, &cert), Err(Error::Infeasible(_))));
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let (sys, mut cert) = paper();
        cert.l_gain = Matrix::zeros(2, 2);
        assert!(matches!(verify(&sys, &cert, DEFAULT_TOL), Err(Error::Dimension { .. })));
    }

    #[test]
    fn scaling_leaves_ratios_unchanged() {
        let (sys, cert) = paper();
        let d1 = decay_estimate(&sys, &cert).unwrap();
        let d2 = decay_estimate(&sys, &cert.scaled(2.0)).unwrap();
        assert_relative_eq!(d1.kappa, d2.kappa, max_relative = 1e-10);
        assert_relative_eq!(d1.lambda_rate, d2.lambda_rate, max_relative = 1e-10);
        assert_relative_eq!(2.0 * d1.alpha3, d2.alpha3, max_relative = 1e-10);
        assert!(d1.kappa >= 1.0);
    }
}
