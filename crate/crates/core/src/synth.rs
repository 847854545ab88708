//! Heuristic search for a feasible certificate, gain included.
//!
//! The conditions are bilinear in `(P2, P3)` and `L`, so there is no convex
//! formulation. For each `μ` on a grid and each random start of `L`, a
//! log-barrier path-following method maximizes a common margin `t` subject to
//! `-K - tI ≻ 0`, `B - tI ≻ 0` (boundary matrix) and `ι - t + δ > 0`, jointly
//! over `(P1, P2, P3, ι, L, t)`. Newton steps use the Gauss-Newton Hessian of
//! the barrier; it is built from finite differences with unit steps, which are
//! exact because both matrices are affine in each single variable. The scale
//! of the `P` blocks is fixed by `tr P1 + tr P3 = n_x + n_χ`, so that `t`
//! cannot grow by scaling alone, and `ι`, `L` are kept inside a box.
//!
//! A cell stops once `f = max(λmax(K) + δ, δ - λmin(B), -ι) < 0`, on stall, or
//! when its iteration budget runs out. Every returned certificate is checked
//! again with [`certify::verify`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::certify::{self, VerificationReport};
use crate::error::{Error, Result};
use crate::matops::{lambda_max, lambda_min, Cholesky, Matrix};
use crate::model::{certificate_json, Certificate, PdeOdeSystem};

const IOTA_CAP: f64 = 1e3;
const GAIN_CAP: f64 = 1e2;
const P1_FLOOR: f64 = 1e-6;
const STALL_REL: f64 = 1e-10;
const NEWTON_TOL: f64 = 1e-6;
const MIN_STEP: f64 = 1e-12;
const ARMIJO: f64 = 0.25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub mu_grid: Vec<f64>,
    pub iota_init: f64,
    /// Newton iterations per `(μ, restart)` cell.
    pub max_outer_iters: usize,
    /// Initial weight of the margin in the barrier objective; doubled each
    /// time the barrier is centered.
    pub step_init: f64,
    pub margin_target: f64,
    pub seed: u64,
    /// Starts of `L` per grid point, the first one included.
    pub restarts: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            mu_grid: (1..=20).map(|k| k as f64 / 10.0).collect(),
            iota_init: 1.0,
            max_outer_iters: 200,
            step_init: 0.1,
            margin_target: 1e-6,
            seed: 0,
            restarts: 5,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.mu_grid.is_empty() {
            return bad("mu_grid is empty".into());
        }
        if let Some(mu) = self.mu_grid.iter().find(|&&m| !(m > 0.0 && m.is_finite())) {
            return bad(format!("mu_grid values must be positive and finite, got {mu}"));
        }
        if self.mu_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("mu_grid must be strictly ascending".into());
        }
        if !(self.iota_init > 0.0 && self.iota_init < IOTA_CAP) {
            return bad(format!("iota_init must lie in (0, {IOTA_CAP}), got {}", self.iota_init));
        }
        if !(self.step_init > 0.0 && self.step_init.is_finite()) {
            return bad(format!("step_init must be positive, got {}", self.step_init));
        }
        if !(self.margin_target > 0.0 && self.margin_target.is_finite()) {
            return bad(format!("margin_target must be positive, got {}", self.margin_target));
        }
        if self.max_outer_iters == 0 || self.restarts == 0 {
            return bad("max_outer_iters and restarts must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthResult {
    pub certificate: Option<Certificate>,
    pub report: VerificationReport,
    pub iterations_used: usize,
    pub mu_selected: Option<f64>,
    /// `(global iteration, best objective so far)`.
    pub history: Vec<(usize, f64)>,
}

impl SynthResult {
    pub fn found(&self) -> bool {
        self.certificate.is_some()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "certificate": self.certificate.as_ref().map(certificate_json),
            "report": self.report,
            "iterations_used": self.iterations_used,
            "mu_selected": self.mu_selected,
            "history": self.history.iter().map(|&(i, v)| serde_json::json!([i, v])).collect::<Vec<_>>(),
        })
    }
}

fn random_gain(n_chi: usize, n_y: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(n_chi, n_y, |_, _| 0.1 * rng.gen_range(-1.0..=1.0))
}

/// `P1 = I`, `P2 = 0`, `P3 = I`, `ι = iota_init`, small random `L`.
pub fn initialize(sys: &PdeOdeSystem, mu: f64, iota_init: f64, rng: &mut impl Rng) -> Certificate {
    Certificate {
        p1: vec![1.0; sys.n_x()],
        p2: Matrix::zeros(sys.n_chi(), sys.n_x()),
        p3: Matrix::identity(sys.n_chi()),
        l_gain: random_gain(sys.n_chi(), sys.n_y(), rng),
        mu,
        iota: iota_init,
    }
}

/// `max(λmax(K) + δ, δ - λmin(B), -ι)`; negative iff the margins exceed `δ`.
pub fn objective(sys: &PdeOdeSystem, cert: &Certificate, delta: f64) -> Result<f64> {
    let k = lambda_max(&certify::build_k(sys, cert))?;
    let b = lambda_min(&certify::build_boundary_matrix(cert))?;
    Ok((k + delta).max(delta - b).max(-cert.iota))
}

/// Decision vector: `P1` diagonal, `P2` row-major, upper triangle of `P3`,
/// `ι`, `L` row-major, then the margin `t`.
struct Layout {
    nx: usize,
    nc: usize,
    ny: usize,
}

impl Layout {
    fn p2(&self) -> usize {
        self.nx
    }
    fn p3(&self) -> usize {
        self.nx + self.nc * self.nx
    }
    fn iota(&self) -> usize {
        self.p3() + self.nc * (self.nc + 1) / 2
    }
    fn gain(&self) -> usize {
        self.iota() + 1
    }
    fn t(&self) -> usize {
        self.gain() + self.nc * self.ny
    }
    fn len(&self) -> usize {
        self.t() + 1
    }

    fn pack(&self, cert: &Certificate, t: f64) -> Vec<f64> {
        let mut y = cert.p1.clone();
        y.extend_from_slice(cert.p2.as_slice());
        for i in 0..self.nc {
            for j in i..self.nc {
                y.push(cert.p3[(i, j)]);
            }
        }
        y.push(cert.iota);
        y.extend_from_slice(cert.l_gain.as_slice());
        y.push(t);
        y
    }

    fn unpack(&self, y: &[f64], mu: f64) -> Certificate {
        let mut p3 = Matrix::zeros(self.nc, self.nc);
        let mut k = self.p3();
        for i in 0..self.nc {
            for j in i..self.nc {
                p3[(i, j)] = y[k];
                p3[(j, i)] = y[k];
                k += 1;
            }
        }
        Certificate {
            p1: y[..self.nx].to_vec(),
            p2: Matrix::from_fn(self.nc, self.nx, |i, j| y[self.p2() + i * self.nx + j]),
            p3,
            l_gain: Matrix::from_fn(self.nc, self.ny, |i, j| y[self.gain() + i * self.ny + j]),
            mu,
            iota: y[self.iota()],
        }
    }

    /// Coefficients of `tr P1 + tr P3`.
    fn trace_row(&self) -> Vec<f64> {
        let mut a = vec![0.0; self.len()];
        a[..self.nx].fill(1.0);
        let mut k = self.p3();
        for i in 0..self.nc {
            a[k] = 1.0;
            k += self.nc - i;
        }
        a
    }
}

struct Barrier<'a> {
    sys: &'a PdeOdeSystem,
    lay: Layout,
    mu: f64,
    delta: f64,
    weight: f64,
}

impl Barrier<'_> {
    fn matrices(&self, y: &[f64]) -> [Matrix; 2] {
        let t = y[self.lay.t()];
        let cert = self.lay.unpack(y, self.mu);
        let k = certify::build_k(self.sys, &cert).into_matrix();
        let b = certify::build_boundary_matrix(&cert).into_matrix();
        let shift = |m: Matrix, sign: f64| {
            let n = m.rows();
            &m.scale(sign) - &Matrix::identity(n).scale(t)
        };
        [shift(k, -1.0), shift(b, 1.0)]
    }

    fn scalars(&self, y: &[f64]) -> Vec<f64> {
        let l = &self.lay;
        let iota = y[l.iota()];
        let mut s = vec![iota - y[l.t()] + self.delta, IOTA_CAP - iota, iota];
        s.extend(y[..l.nx].iter().map(|p| p - P1_FLOOR));
        for &g in &y[l.gain()..l.t()] {
            s.push(GAIN_CAP - g);
            s.push(GAIN_CAP + g);
        }
        s
    }

    fn value(&self, y: &[f64]) -> f64 {
        let mut total = -self.weight * y[self.lay.t()];
        for f in self.matrices(y) {
            match Cholesky::new(&f) {
                Some(ch) => total -= ch.log_det(),
                None => return f64::INFINITY,
            }
        }
        for s in self.scalars(y) {
            if !(s > 0.0) {
                return f64::INFINITY;
            }
            total -= s.ln();
        }
        if total.is_nan() {
            f64::INFINITY
        } else {
            total
        }
    }

    /// Gauss-Newton direction restricted to the trace normalization, and the
    /// squared Newton decrement.
    fn direction(&self, y: &[f64]) -> Option<(Vec<f64>, f64)> {
        let n = y.len();
        let f0 = self.matrices(y);
        let inv: Vec<Matrix> = f0
            .iter()
            .map(|f| Cholesky::new(f).map(|c| c.inverse()))
            .collect::<Option<_>>()?;
        let s0 = self.scalars(y);

        let mut w: Vec<Vec<Matrix>> = vec![Vec::with_capacity(n); f0.len()];
        let mut ds: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut yi = y.to_vec();
        for i in 0..n {
            yi[i] += 1.0;
            for (m, fi) in self.matrices(&yi).into_iter().enumerate() {
                w[m].push(&inv[m] * &(&fi - &f0[m]));
            }
            ds.push(self.scalars(&yi).iter().zip(&s0).map(|(a, b)| a - b).collect());
            yi[i] = y[i];
        }

        let mut g = vec![0.0; n];
        let mut h = Matrix::zeros(n, n);
        for wm in &w {
            for i in 0..n {
                g[i] -= wm[i].trace();
                for j in i..n {
                    let (a, b) = (&wm[i], &wm[j]);
                    let side = a.rows();
                    let mut tr = 0.0;
                    for r in 0..side {
                        for c in 0..side {
                            tr += a[(r, c)] * b[(c, r)];
                        }
                    }
                    h[(i, j)] += tr;
                }
            }
        }
        for i in 0..n {
            for (k, s) in s0.iter().enumerate() {
                g[i] -= ds[i][k] / s;
            }
            for j in i..n {
                let v: f64 = s0.iter().enumerate().map(|(k, s)| ds[i][k] * ds[j][k] / (s * s)).sum();
                h[(i, j)] += v;
            }
        }
        g[self.lay.t()] -= self.weight;
        for i in 0..n {
            for j in 0..i {
                h[(i, j)] = h[(j, i)];
            }
        }

        let scale = h.diag().iter().cloned().fold(1.0, f64::max);
        let mut jitter = 1e-12 * scale;
        let chol = loop {
            let mut hj = h.clone();
            for i in 0..n {
                hj[(i, i)] += jitter;
            }
            if let Some(c) = Cholesky::new(&hj) {
                break c;
            }
            jitter *= 100.0;
            if jitter > scale {
                return None;
            }
        };
        let a = self.lay.trace_row();
        let u = chol.solve(&g);
        let v = chol.solve(&a);
        let nu = -dot(&a, &u) / dot(&a, &v);
        let d: Vec<f64> = u.iter().zip(&v).map(|(u, v)| -(u + nu * v)).collect();
        let lam2 = -dot(&g, &d);
        Some((d, lam2))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    crate::matops::dot(a, b)
}

struct CellOutcome {
    cert: Certificate,
    best_f: f64,
    iterations: usize,
}

/// One `(μ, start)` cell. `trace` receives the objective after every
/// iteration.
fn run_cell(
    sys: &PdeOdeSystem,
    start: &Certificate,
    cfg: &SynthConfig,
    mut trace: impl FnMut(f64),
) -> Result<CellOutcome> {
    let delta = cfg.margin_target;
    let lay = Layout {
        nx: sys.n_x(),
        nc: sys.n_chi(),
        ny: sys.n_y(),
    };
    let k = lambda_max(&certify::build_k(sys, start))?;
    let b = lambda_min(&certify::build_boundary_matrix(start))?;
    let mut bar = Barrier {
        sys,
        lay,
        mu: start.mu,
        delta,
        weight: cfg.step_init,
    };
    // start near the central path of the margin: each barrier term pulls t
    // about 1/weight below the smallest slack
    let barrier_dim = (2 * sys.n_x() + sys.n_chi() + sys.n_l()) + (sys.n_x() + sys.n_chi()) + 1;
    let t0 = (-k).min(b).min(start.iota + delta) - barrier_dim as f64 / bar.weight;
    let mut y = bar.lay.pack(start, t0);

    let mut best_cert = start.clone();
    let mut best_f = objective(sys, start, delta)?;
    for it in 1..=cfg.max_outer_iters {
        let mut centered = true;
        if let Some((d, lam2)) = bar.direction(&y) {
            let v0 = bar.value(&y);
            let mut step = 1.0;
            let mut accepted = false;
            while step > MIN_STEP {
                let cand: Vec<f64> = y.iter().zip(&d).map(|(y, d)| y + step * d).collect();
                if bar.value(&cand) <= v0 - ARMIJO * step * lam2 {
                    y = cand;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            centered = !accepted || lam2 < NEWTON_TOL;
        }
        if centered {
            bar.weight *= 2.0;
        }

        let cert = bar.lay.unpack(&y, start.mu);
        let f = objective(sys, &cert, delta)?;
        if f < best_f {
            best_f = f;
            best_cert = cert;
        }
        trace(best_f);
        if best_f < 0.0 {
            return Ok(CellOutcome {
                cert: best_cert,
                best_f,
                iterations: it,
            });
        }
        // the incumbent may sit still for long stretches while the barrier
        // recenters, so stall means the path itself has converged: the
        // remaining gap to the cell's optimal margin is about dim / weight
        let t = y[bar.lay.t()];
        let gap = (barrier_dim + bar.scalars(&y).len()) as f64 / bar.weight;
        if gap <= STALL_REL * t.abs().max(1.0) {
            log::debug!("mu = {}: stalled at f = {best_f:e} after {it} iterations", start.mu);
            return Ok(CellOutcome {
                cert: best_cert,
                best_f,
                iterations: it,
            });
        }
    }
    Ok(CellOutcome {
        cert: best_cert,
        best_f,
        iterations: cfg.max_outer_iters,
    })
}

/// Sweeps `mu_grid` in ascending order and returns the first certificate
/// whose margins beat `margin_target`; otherwise the best attempt's report.
pub fn synthesize(sys: &PdeOdeSystem, cfg: &SynthConfig) -> Result<SynthResult> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = Vec::new();
    let mut iterations = 0usize;
    let mut incumbent = f64::INFINITY;
    let mut best: Option<Certificate> = None;

    for &mu in &cfg.mu_grid {
        let first = initialize(sys, mu, cfg.iota_init, &mut rng);
        for restart in 0..cfg.restarts {
            let start = if restart == 0 {
                first.clone()
            } else {
                Certificate {
                    l_gain: random_gain(sys.n_chi(), sys.n_y(), &mut rng),
                    ..first.clone()
                }
            };
            let base = iterations;
            let mut local = 0usize;
            let out = run_cell(sys, &start, cfg, |f| {
                local += 1;
                incumbent = incumbent.min(f);
                history.push((base + local, incumbent));
            })?;
            iterations += out.iterations;
            log::debug!("mu = {mu}, restart {restart}: f = {:e} in {} iterations", out.best_f, out.iterations);
            if best.is_none() || out.best_f <= incumbent {
                best = Some(out.cert.clone());
            }
            if out.best_f < 0.0 {
                let report = certify::verify(sys, &out.cert, certify::DEFAULT_TOL)?;
                let clears = report.feasible
                    && report.k_margin < -cfg.margin_target
                    && report.boundary_margin > cfg.margin_target;
                if clears {
                    log::info!("certificate found at mu = {mu} after {iterations} iterations");
                    return Ok(SynthResult {
                        certificate: Some(out.cert),
                        report,
                        iterations_used: iterations,
                        mu_selected: Some(mu),
                        history,
                    });
                }
                log::warn!("optimizer margin not confirmed by verification at mu = {mu}");
            }
        }
    }

    let best = best.expect("at least one cell runs");
    let report = certify::verify(sys, &best, certify::DEFAULT_TOL)?;
    log::info!("no certificate found; best objective {incumbent:e}");
    Ok(SynthResult {
        certificate: None,
        report,
        iterations_used: iterations,
        mu_selected: None,
        history,
    })
}
