//! Lyapunov functional, error distance, decay envelopes and a numerical check
//! of the dissipation identity.

use std::io::{BufRead, Write};

use serde::Serialize;

use crate::certify::{self, DecayEstimate};
use crate::error::{Error, Result};
use crate::matops::{dot, Matrix};
use crate::model::{Certificate, PdeOdeSystem};
use crate::sim::{GridState, Trajectory};

pub const DEFAULT_ENVELOPE_SLACK: f64 = 0.1;
pub const MIN_FIT_SAMPLES: usize = 5;
pub const MIN_QUAD_POINTS: usize = 64;
const DOMAIN_TOL: f64 = 1e-12;

fn trapezoid(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    assert!(n >= 2, "quadrature needs at least two nodes");
    let h = 1.0 / (n - 1) as f64;
    let mut sum = 0.0;
    for (j, v) in values.enumerate() {
        sum += if j == 0 || j == n - 1 { 0.5 * v } else { v };
    }
    h * sum
}

/// `∫ [ε; η]ᵀ G(z) [ε; η] dz` by the trapezoid rule on the nodes of `eps`.
pub fn lyapunov_v(cert: &Certificate, eps: &Matrix, eta: &[f64]) -> Result<f64> {
    if eps.rows() != cert.n_x() {
        return Err(Error::dim("eps", cert.n_x(), eps.rows()));
    }
    if eta.len() != cert.n_chi() {
        return Err(Error::dim("eta", cert.n_chi(), eta.len()));
    }
    if eps.cols() < 2 {
        return Err(Error::dim("eps", "at least 2 nodes", eps.cols()));
    }
    let n = eps.cols() - 1;
    let mut w = vec![0.0; cert.n_x() + cert.n_chi()];
    w[cert.n_x()..].copy_from_slice(eta);
    let vals: Vec<f64> = (0..=n)
        .map(|j| {
            for i in 0..cert.n_x() {
                w[i] = eps[(i, j)];
            }
            certify::build_g(cert, j as f64 / n as f64).quad_form(&w)
        })
        .collect();
    Ok(trapezoid(vals.into_iter()))
}

/// `sqrt(‖ε‖²_{L²} + |η|²)`
pub fn l2_distance(eps: &Matrix, eta: &[f64]) -> f64 {
    let sq = (0..eps.cols()).map(|j| (0..eps.rows()).map(|i| eps[(i, j)].powi(2)).sum::<f64>());
    (trapezoid(sq) + dot(eta, eta)).sqrt()
}

pub fn error_distance(state: &GridState) -> f64 {
    l2_distance(&state.eps(), &state.eta())
}

pub fn trajectory_v(traj: &Trajectory, cert: &Certificate) -> Result<Vec<(f64, f64)>> {
    traj.snapshots
        .iter()
        .map(|s| Ok((s.t, lyapunov_v(cert, &s.eps(), &s.eta())?)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub holds: bool,
    /// `max_t dist(t) − (1 + slack) κ e^{−λt} dist(0)`; nonpositive when the
    /// bound holds.
    pub worst_margin: f64,
    pub worst_t: f64,
    pub slack: f64,
}

/// Checks `dist(t) ≤ (1 + slack) κ e^{−λt} dist(t₀)` over `(t, dist)` samples;
/// the first sample is the reference.
pub fn envelope_check(samples: &[(f64, f64)], decay: &DecayEstimate, slack: f64) -> EnvelopeReport {
    let (t0, d0) = samples.first().copied().unwrap_or((0.0, 0.0));
    let mut worst = (f64::NEG_INFINITY, t0);
    for &(t, d) in samples {
        let margin = d - (1.0 + slack) * decay.envelope(t - t0) * d0;
        if margin > worst.0 {
            worst = (margin, t);
        }
    }
    EnvelopeReport {
        holds: worst.0 <= 0.0,
        worst_margin: worst.0,
        worst_t: worst.1,
        slack,
    }
}

pub fn ges_envelope_check(traj: &Trajectory, decay: &DecayEstimate, slack: f64) -> EnvelopeReport {
    let samples: Vec<(f64, f64)> = traj.snapshots.iter().map(|s| (s.t, error_distance(s))).collect();
    envelope_check(&samples, decay, slack)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    /// On `ln V`.
    pub rms_residual: f64,
    pub window: (f64, f64),
}

/// Least squares of `ln V` against `t` over the samples inside `window`
/// (default: all samples); `rate` is minus the slope.
pub fn fit_log_linear(samples: &[(f64, f64)], window: Option<(f64, f64)>) -> Result<DecayFit> {
    let (lo, hi) = match (window, samples.first(), samples.last()) {
        (Some(w), _, _) => w,
        (None, Some(a), Some(b)) => (a.0, b.0),
        _ => (0.0, 0.0),
    };
    if !(lo < hi) {
        return Err(Error::Config(format!("fit window [{lo}, {hi}] is empty")));
    }
    let inside: Vec<(f64, f64)> = samples.iter().copied().filter(|&(t, _)| t >= lo && t <= hi).collect();
    if inside.len() < MIN_FIT_SAMPLES {
        return Err(Error::Config(format!(
            "decay fit needs at least {MIN_FIT_SAMPLES} samples in [{lo}, {hi}], got {}",
            inside.len()
        )));
    }
    if let Some(&(t, value)) = inside.iter().find(|&&(_, v)| !(v > 0.0)) {
        return Err(Error::NonPositiveLyapunov { t, value });
    }
    let n = inside.len() as f64;
    let tm = inside.iter().map(|s| s.0).sum::<f64>() / n;
    let lm = inside.iter().map(|s| s.1.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, v) in &inside {
        sxy += (t - tm) * (v.ln() - lm);
        sxx += (t - tm) * (t - tm);
    }
    let slope = sxy / sxx;
    let intercept = lm - slope * tm;
    let rss: f64 = inside.iter().map(|&(t, v)| (v.ln() - intercept - slope * t).powi(2)).sum();
    Ok(DecayFit {
        rate: -slope,
        intercept,
        rms_residual: (rss / n).sqrt(),
        window: (lo, hi),
    })
}

pub fn decay_fit(traj: &Trajectory, cert: &Certificate, window: Option<(f64, f64)>) -> Result<DecayFit> {
    fit_log_linear(&trajectory_v(traj, cert)?, window)
}

/// A polynomial error profile `ε_i(z) = Σ_k coeffs[i][k] z^k` with lumped
/// error `η` and a free vector `ρ̃` in the nonlinearity slot.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyState {
    pub coeffs: Vec<Vec<f64>>,
    pub eta: Vec<f64>,
    pub rho: Vec<f64>,
}

impl PolyState {
    pub fn eps(&self, z: f64) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.iter().rev().fold(0.0, |acc, &a| acc * z + a)).collect()
    }

    pub fn eps_prime(&self, z: f64) -> Vec<f64> {
        self.coeffs
            .iter()
            .map(|c| {
                c.iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(0.0, |acc, (k, &a)| acc * z + k as f64 * a)
            })
            .collect()
    }
}

/// Composite Simpson on `[0, 1]` with an even number `n` of subintervals.
fn simpson(n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = 1.0 / n as f64;
    let mut sum = f(0.0) + f(1.0);
    for j in 1..n {
        sum += if j % 2 == 1 { 4.0 } else { 2.0 } * f(j as f64 * h);
    }
    sum * h / 3.0
}

/// Relative gap between `2⟨G[ε; η], (−Λε′; Aη − LMε(1) + Bρ̃)⟩` integrated
/// over `[0, 1]` and the integral of the quadratic form `M(z)` plus the
/// coupling column `Γ` evaluated at `(ε(z), ε(1), η, ρ̃)`. The two agree in
/// the continuum whenever `ε(0) = Cη`. `quad_points` is the number of
/// Simpson subintervals, rounded up to even.
pub fn identity_check(sys: &PdeOdeSystem, cert: &Certificate, state: &PolyState, quad_points: usize) -> Result<f64> {
    cert.check_dims(sys)?;
    let (nx, nc, nl) = (sys.n_x(), sys.n_chi(), sys.n_l());
    if state.coeffs.len() != nx {
        return Err(Error::dim("coeffs", nx, state.coeffs.len()));
    }
    if state.eta.len() != nc {
        return Err(Error::dim("eta", nc, state.eta.len()));
    }
    if state.rho.len() != nl {
        return Err(Error::dim("rho", nl, state.rho.len()));
    }
    if quad_points < MIN_QUAD_POINTS {
        return Err(Error::Config(format!(
            "identity check needs at least {MIN_QUAD_POINTS} quadrature points, got {quad_points}"
        )));
    }
    let c_eta = sys.c().matvec(&state.eta);
    let violation = state
        .eps(0.0)
        .iter()
        .zip(&c_eta)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if violation > DOMAIN_TOL {
        return Err(Error::DomainCondition(violation));
    }
    let n = quad_points + quad_points % 2;

    let eps1 = state.eps(1.0);
    let innov = sys.m().matvec(&eps1);
    let lme = cert.l_gain.matvec(&innov);
    let eta_dot: Vec<f64> = {
        let a = sys.a().matvec(&state.eta);
        let b = sys.b().matvec(&state.rho);
        (0..nc).map(|i| a[i] - lme[i] + b[i]).collect()
    };
    let direct = simpson(n, |z| {
        let mut w = state.eps(z);
        w.extend_from_slice(&state.eta);
        let mut dw: Vec<f64> = state.eps_prime(z).iter().zip(sys.lambda()).map(|(d, l)| -l * d).collect();
        dw.extend_from_slice(&eta_dot);
        2.0 * dot(&w, &certify::build_g(cert, z).matrix().matvec(&dw))
    });

    let gamma = certify::build_gamma(sys, cert);
    let side = 2 * nx + nc;
    let quadratic = simpson(n, |z| {
        let mut w = state.eps(z);
        w.extend_from_slice(&eps1);
        w.extend_from_slice(&state.eta);
        let m = certify::build_m(sys, cert, z);
        let gr = gamma.matvec(&state.rho);
        m.quad_form(&w) + 2.0 * dot(&w[..side], &gr)
    });

    let scale = direct.abs().max(quadratic.abs());
    Ok(if scale == 0.0 { 0.0 } else { (direct - quadratic).abs() / scale })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiagRow {
    pub t: f64,
    pub v: f64,
    pub dist: f64,
    /// `κ e^{−λt} dist(0)`
    pub envelope: f64,
}

pub fn diagnostics(traj: &Trajectory, cert: &Certificate, decay: &DecayEstimate) -> Result<Vec<DiagRow>> {
    let d0 = error_distance(&traj.snapshots[0]);
    traj.snapshots
        .iter()
        .map(|s| {
            Ok(DiagRow {
                t: s.t,
                v: lyapunov_v(cert, &s.eps(), &s.eta())?,
                dist: error_distance(s),
                envelope: decay.envelope(s.t) * d0,
            })
        })
        .collect()
}

const DIAG_HEADER: &str = "t,V,dist,envelope";

pub fn write_diagnostics<W: Write>(rows: &[DiagRow], mut w: W) -> Result<()> {
    writeln!(w, "{DIAG_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.t, r.v, r.dist, r.envelope)?;
    }
    Ok(())
}

pub fn read_diagnostics<R: BufRead>(r: R) -> Result<Vec<DiagRow>> {
    let mut rows = Vec::new();
    let mut lines = r.lines();
    match lines.next().transpose()? {
        Some(h) if h.trim() == DIAG_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: format!("expected header {DIAG_HEADER:?}"),
            })
        }
    }
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = k + 2;
        let vals: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                line: lineno,
                column: 1,
                message: e.to_string(),
            })?;
        if vals.len() != 4 {
            return Err(Error::Parse {
                line: lineno,
                column: 1,
                message: format!("expected 4 columns, got {}", vals.len()),
            });
        }
        rows.push(DiagRow {
            t: vals[0],
            v: vals[1],
            dist: vals[2],
            envelope: vals[3],
        });
    }
    Ok(rows)
}
