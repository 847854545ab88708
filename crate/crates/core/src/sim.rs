//! Finite-volume simulation of the plant and observer interconnection.
//!
//! Each step is a Lie splitting: both ODEs advance by RK4 with the boundary
//! outputs `y = M x(·, 1)`, `ŷ = M x̂(·, 1)` frozen, then both transport fields
//! advance by the selected scheme, then node 0 of each field is overwritten
//! with `Cχ`, `Cχ̂`. All speeds are positive, so the right end is pure outflow.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matops::Matrix;
use crate::model::PdeOdeSystem;

pub const PAPER_EXAMPLE: &str = "paper-example";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    Upwind,
    /// Two-step (Richtmyer) Lax-Friedrichs.
    TwoStepLxf,
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upwind" => Ok(Scheme::Upwind),
            "two-step-lxf" => Ok(Scheme::TwoStepLxf),
            other => Err(Error::Config(format!(
                "unknown scheme {other:?} (expected upwind or two-step-lxf)"
            ))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Upwind => "upwind",
            Scheme::TwoStepLxf => "two-step-lxf",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_cells: usize,
    pub cfl: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub record_every: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_cells: 200,
            cfl: 0.9,
            t_end: 10.0,
            scheme: Scheme::Upwind,
            record_every: 1,
        }
    }
}

impl SimConfig {
    pub const MIN_CELLS: usize = 8;

    pub fn validate(&self) -> Result<()> {
        if self.n_cells < Self::MIN_CELLS {
            return Err(Error::Config(format!(
                "n_cells must be at least {}, got {}",
                Self::MIN_CELLS,
                self.n_cells
            )));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Config(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be nonnegative, got {}", self.t_end)));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        Ok(())
    }

    pub fn nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn dz(&self) -> f64 {
        1.0 / self.n_cells as f64
    }

    pub fn dt(&self, sys: &PdeOdeSystem) -> f64 {
        self.cfl * self.dz() / sys.max_speed()
    }
}

/// Plant and observer state on the uniform grid `z_j = j / n_cells`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridState {
    pub t: f64,
    /// `n_x × nodes`
    pub x: Matrix,
    pub xhat: Matrix,
    pub chi: Vec<f64>,
    pub chihat: Vec<f64>,
}

impl GridState {
    pub fn nodes(&self) -> usize {
        self.x.cols()
    }

    /// `ε = x − x̂`
    pub fn eps(&self) -> Matrix {
        &self.x - &self.xhat
    }

    /// `η = χ − χ̂`
    pub fn eta(&self) -> Vec<f64> {
        self.chi.iter().zip(&self.chihat).map(|(a, b)| a - b).collect()
    }

    fn check(&self, sys: &PdeOdeSystem, nodes: usize) -> Result<()> {
        for (field, m) in [("x", &self.x), ("xhat", &self.xhat)] {
            if m.shape() != (sys.n_x(), nodes) {
                return Err(Error::dim(
                    field,
                    format!("{}x{}", sys.n_x(), nodes),
                    format!("{}x{}", m.rows(), m.cols()),
                ));
            }
        }
        for (field, v) in [("chi", &self.chi), ("chihat", &self.chihat)] {
            if v.len() != sys.n_chi() {
                return Err(Error::dim(field, sys.n_chi(), v.len()));
            }
        }
        Ok(())
    }

    /// Writes `Cχ`, `Cχ̂` into node 0; returns the largest change.
    fn impose_boundary(&mut self, sys: &PdeOdeSystem) -> f64 {
        let b = sys.c().matvec(&self.chi);
        let bh = sys.c().matvec(&self.chihat);
        let mut change: f64 = 0.0;
        for i in 0..sys.n_x() {
            change = change
                .max((self.x[(i, 0)] - b[i]).abs())
                .max((self.xhat[(i, 0)] - bh[i]).abs());
            self.x[(i, 0)] = b[i];
            self.xhat[(i, 0)] = bh[i];
        }
        change
    }
}

/// Initial data: a named built-in profile or explicit samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitSpec {
    Named(String),
    Samples {
        x: Vec<Vec<f64>>,
        xhat: Vec<Vec<f64>>,
        chi: Vec<f64>,
        chihat: Vec<f64>,
    },
}

impl InitSpec {
    pub fn paper_example() -> Self {
        InitSpec::Named(PAPER_EXAMPLE.into())
    }

    /// Explicit samples from a JSON object with keys `x`, `xhat`, `chi`,
    /// `chihat` (fields as arrays of rows).
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Doc {
            x: Vec<Vec<f64>>,
            xhat: Vec<Vec<f64>>,
            chi: Vec<f64>,
            chihat: Vec<f64>,
        }
        let d: Doc = serde_json::from_str(text)?;
        Ok(InitSpec::Samples {
            x: d.x,
            xhat: d.xhat,
            chi: d.chi,
            chihat: d.chihat,
        })
    }
}

fn sample_field(field: &str, rows: &[Vec<f64>], n_x: usize, nodes: usize) -> Result<Matrix> {
    if rows.len() != n_x {
        return Err(Error::dim(field, format!("{n_x} components"), rows.len()));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != nodes) {
        return Err(Error::dim(field, format!("{nodes} samples"), r.len()));
    }
    Matrix::from_rows(rows)
}

/// Builds the state at `t = 0` and makes node 0 agree with `Cχ`, `Cχ̂`.
pub fn make_initial(sys: &PdeOdeSystem, spec: &InitSpec, n_cells: usize) -> Result<GridState> {
    let nodes = n_cells + 1;
    let mut state = match spec {
        InitSpec::Named(name) if name == PAPER_EXAMPLE => {
            if sys.n_x() != 2 {
                return Err(Error::dim("lambda", 2, sys.n_x()));
            }
            if sys.n_chi() != 2 {
                return Err(Error::dim("A", "2x2", format!("{0}x{0}", sys.n_chi())));
            }
            let tau = std::f64::consts::TAU;
            let x = Matrix::from_fn(2, nodes, |i, j| {
                let z = j as f64 / n_cells as f64;
                if i == 0 {
                    (tau * z).cos()
                } else {
                    -2.0 * (2.0 * tau * z).cos()
                }
            });
            GridState {
                t: 0.0,
                x,
                xhat: Matrix::zeros(2, nodes),
                chi: vec![1.0, -2.0],
                chihat: vec![0.0, 0.0],
            }
        }
        InitSpec::Named(name) => return Err(Error::UnknownProfile(name.clone())),
        InitSpec::Samples { x, xhat, chi, chihat } => {
            let state = GridState {
                t: 0.0,
                x: sample_field("x", x, sys.n_x(), nodes)?,
                xhat: sample_field("xhat", xhat, sys.n_x(), nodes)?,
                chi: chi.clone(),
                chihat: chihat.clone(),
            };
            state.check(sys, nodes)?;
            state
        }
    };
    let change = state.impose_boundary(sys);
    if change > 0.0 {
        log::info!("initial data adjusted at z = 0 by up to {change:e} to match the boundary condition");
    }
    Ok(state)
}

fn rk4(dt: f64, x: &[f64], f: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
    let axpy = |a: f64, k: &[f64]| -> Vec<f64> { x.iter().zip(k).map(|(x, k)| x + a * k).collect() };
    let k1 = f(x);
    let k2 = f(&axpy(0.5 * dt, &k1));
    let k3 = f(&axpy(0.5 * dt, &k2));
    let k4 = f(&axpy(dt, &k3));
    (0..x.len())
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Advances one field row by one step with Courant number `c`; node 0 is
/// left for the caller.
fn transport_row(u: &mut [f64], c: f64, scheme: Scheme, work: &mut Vec<f64>) {
    let n = u.len() - 1;
    match scheme {
        Scheme::Upwind => {
            for j in (1..=n).rev() {
                u[j] -= c * (u[j] - u[j - 1]);
            }
        }
        Scheme::TwoStepLxf => {
            work.clear();
            work.extend((0..n).map(|j| 0.5 * (u[j] + u[j + 1]) - 0.5 * c * (u[j + 1] - u[j])));
            let last = u[n] - c * (u[n] - u[n - 1]);
            for j in 1..n {
                u[j] -= c * (work[j] - work[j - 1]);
            }
            u[n] = last;
        }
    }
}

/// One step of length `dt`; `simulate` uses this for the shortened final
/// step.
pub fn step_by(
    sys: &PdeOdeSystem,
    l_gain: &Matrix,
    state: &GridState,
    scheme: Scheme,
    dt: f64,
) -> GridState {
    let last = state.nodes() - 1;
    let out: Vec<f64> = (0..sys.n_x()).map(|i| state.x[(i, last)]).collect();
    let out_hat: Vec<f64> = (0..sys.n_x()).map(|i| state.xhat[(i, last)]).collect();
    let innov: Vec<f64> = sys
        .m()
        .matvec(&out)
        .iter()
        .zip(sys.m().matvec(&out_hat))
        .map(|(y, yh)| y - yh)
        .collect();
    let inj = l_gain.matvec(&innov);

    let chi = rk4(dt, &state.chi, |c| sys.ode_rhs(c));
    let chihat = rk4(dt, &state.chihat, |c| {
        let mut r = sys.ode_rhs(c);
        for (r, v) in r.iter_mut().zip(&inj) {
            *r += v;
        }
        r
    });

    let nodes = state.nodes();
    let dz = 1.0 / (nodes - 1) as f64;
    let mut x = state.x.clone();
    let mut xhat = state.xhat.clone();
    let mut row = vec![0.0; nodes];
    let mut work = Vec::with_capacity(nodes);
    for field in [&mut x, &mut xhat] {
        for i in 0..sys.n_x() {
            let c = dt / dz * sys.lambda()[i];
            for (j, r) in row.iter_mut().enumerate() {
                *r = field[(i, j)];
            }
            transport_row(&mut row, c, scheme, &mut work);
            for (j, r) in row.iter().enumerate() {
                field[(i, j)] = *r;
            }
        }
    }
    let mut next = GridState {
        t: state.t + dt,
        x,
        xhat,
        chi,
        chihat,
    };
    next.impose_boundary(sys);
    next
}

/// One full step `Δt = cfl Δz / max Λ`.
pub fn step(sys: &PdeOdeSystem, l_gain: &Matrix, state: &GridState, cfg: &SimConfig) -> Result<GridState> {
    cfg.validate()?;
    check_inputs(sys, l_gain, state, cfg)?;
    Ok(step_by(sys, l_gain, state, cfg.scheme, cfg.dt(sys)))
}

fn check_inputs(sys: &PdeOdeSystem, l_gain: &Matrix, state: &GridState, cfg: &SimConfig) -> Result<()> {
    state.check(sys, cfg.nodes())?;
    if l_gain.shape() != (sys.n_chi(), sys.n_y()) {
        return Err(Error::dim(
            "L",
            format!("{}x{}", sys.n_chi(), sys.n_y()),
            format!("{}x{}", l_gain.rows(), l_gain.cols()),
        ));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<GridState>,
    pub config: SimConfig,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &GridState {
        self.snapshots.last().expect("trajectory holds the initial state")
    }

    /// Long format `t,field,component,node,value`. The ODE states are
    /// written as fields `chi`, `chihat` with node 0.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,field,component,node,value")?;
        for s in &self.snapshots {
            for (name, m) in [("x", &s.x), ("xhat", &s.xhat)] {
                for i in 0..m.rows() {
                    for j in 0..m.cols() {
                        writeln!(w, "{},{name},{i},{j},{}", s.t, m[(i, j)])?;
                    }
                }
            }
            for (name, v) in [("chi", &s.chi), ("chihat", &s.chihat)] {
                for (i, v) in v.iter().enumerate() {
                    writeln!(w, "{},{name},{i},0,{v}", s.t)?;
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let snaps: Vec<_> = self
            .snapshots
            .iter()
            .map(|s| {
                serde_json::json!({
                    "t": s.t,
                    "x": s.x.to_rows(),
                    "xhat": s.xhat.to_rows(),
                    "chi": s.chi,
                    "chihat": s.chihat,
                })
            })
            .collect();
        serde_json::json!({ "config": self.config, "snapshots": snaps })
    }
}

/// Steps from `init` to `t_end`, recording every `record_every` steps and the
/// final state. The last step is shortened to land on `t_end`.
pub fn simulate(sys: &PdeOdeSystem, l_gain: &Matrix, init: &GridState, cfg: &SimConfig) -> Result<Trajectory> {
    cfg.validate()?;
    check_inputs(sys, l_gain, init, cfg)?;
    if init.t != 0.0 {
        return Err(Error::Config(format!("initial state must be at t = 0, got {}", init.t)));
    }
    let dt = cfg.dt(sys);
    let ratio = cfg.t_end / dt;
    let n_steps = if cfg.t_end == 0.0 {
        0
    } else {
        // a trailing sliver below 1e-9 dt is merged into the previous step
        (ratio - 1e-9).ceil().max(1.0) as usize
    };
    log::debug!("simulating {n_steps} steps of {dt:e} with {}", cfg.scheme);

    let mut snapshots = vec![init.clone()];
    let mut state = init.clone();
    for k in 1..=n_steps {
        let t_next = if k == n_steps { cfg.t_end } else { k as f64 * dt };
        let mut next = step_by(sys, l_gain, &state, cfg.scheme, t_next - state.t);
        next.t = t_next;
        state = next;
        if !state.chi.iter().chain(&state.chihat).all(|v| v.is_finite()) {
            return Err(Error::Invariant(format!("state became non-finite at t = {}", state.t)));
        }
        if k % cfg.record_every == 0 || k == n_steps {
            snapshots.push(state.clone());
        }
    }
    Ok(Trajectory { snapshots, config: *cfg })
}

/// Exact solution of `∂t x + Λ ∂z x = 0` at `(t, z)`: component `i` is
/// `init(i, z − Λ_i t)` while that foot lies in the domain, otherwise the
/// boundary value `boundary(i, t − z / Λ_i)`.
pub fn characteristics_oracle(
    speeds: &[f64],
    boundary: impl Fn(usize, f64) -> f64,
    init: impl Fn(usize, f64) -> f64,
    t: f64,
    z: f64,
) -> Vec<f64> {
    speeds
        .iter()
        .enumerate()
        .map(|(i, &lam)| {
            let foot = z - lam * t;
            if (0.0..=1.0).contains(&foot) {
                init(i, foot)
            } else {
                boundary(i, t - z / lam)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{reference, Nonlinearity};
    use std::f64::consts::TAU;

    /// One speed, boundary pinned to zero through `C = 0`.
    fn pure_transport(speed: f64) -> PdeOdeSystem {
        let z = |r, c| Matrix::zeros(r, c);
        PdeOdeSystem::new(vec![speed], z(1, 1), z(1, 1), z(1, 1), z(1, 1), z(1, 1), Nonlinearity::zero(), 1e-12)
            .unwrap()
    }

    fn samples(sys: &PdeOdeSystem, n_cells: usize, f: impl Fn(f64) -> f64) -> GridState {
        let row: Vec<f64> = (0..=n_cells).map(|j| f(j as f64 / n_cells as f64)).collect();
        let spec = InitSpec::Samples {
            x: vec![row.clone()],
            xhat: vec![row],
            chi: vec![0.0; sys.n_chi()],
            chihat: vec![0.0; sys.n_chi()],
        };
        make_initial(sys, &spec, n_cells).unwrap()
    }

    #[test]
    fn paper_initial_condition() {
        let sys = reference::system();
        let s = make_initial(&sys, &InitSpec::paper_example(), 8).unwrap();
        assert_eq!((s.x[(0, 0)], s.x[(1, 0)]), (1.0, -2.0));
        assert_eq!(s.x[(0, 4)], -1.0);
        assert_eq!(s.chi, vec![1.0, -2.0]);
        assert_eq!(s.xhat, Matrix::zeros(2, 9));
        assert!(matches!(
            make_initial(&sys, &InitSpec::Named("nope".into()), 8),
            Err(Error::UnknownProfile(_))
        ));
    }

    #[test]
    fn explicit_samples() {
        let sys = reference::system();
        let zero = InitSpec::Samples {
            x: vec![vec![0.0; 9]; 2],
            xhat: vec![vec![0.0; 9]; 2],
            chi: vec![0.0; 2],
            chihat: vec![0.0; 2],
        };
        let s = make_initial(&sys, &zero, 8).unwrap();
        assert_eq!(s.x, Matrix::zeros(2, 9));
        let short = InitSpec::Samples {
            x: vec![vec![0.0; 8]; 2],
            xhat: vec![vec![0.0; 9]; 2],
            chi: vec![0.0; 2],
            chihat: vec![0.0; 2],
        };
        assert!(matches!(make_initial(&sys, &short, 8), Err(Error::Dimension { .. })));
        let parsed = InitSpec::from_json(r#"{"x": [[1,2]], "xhat": [[0,0]], "chi": [1], "chihat": [0]}"#).unwrap();
        assert!(matches!(parsed, InitSpec::Samples { .. }));
    }

    #[test]
    fn inconsistent_boundary_is_repaired() {
        let sys = reference::system();
        let spec = InitSpec::Samples {
            x: vec![vec![5.0; 9]; 2],
            xhat: vec![vec![0.0; 9]; 2],
            chi: vec![1.0, 2.0],
            chihat: vec![0.0; 2],
        };
        let s = make_initial(&sys, &spec, 8).unwrap();
        assert_eq!((s.x[(0, 0)], s.x[(1, 0)]), (1.0, 2.0));
        assert_eq!(s.x[(0, 1)], 5.0);
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::default().validate().is_ok());
        for cfg in [
            SimConfig { n_cells: 4, ..Default::default() },
            SimConfig { cfl: 1.5, ..Default::default() },
            SimConfig { cfl: 0.0, ..Default::default() },
            SimConfig { t_end: -1.0, ..Default::default() },
            SimConfig { record_every: 0, ..Default::default() },
        ] {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        }
        assert_eq!("two-step-lxf".parse::<Scheme>().unwrap(), Scheme::TwoStepLxf);
        assert!("lax".parse::<Scheme>().is_err());
    }

    #[test]
    fn unit_courant_upwind_is_a_shift() {
        let sys = pure_transport(1.0);
        let cfg = SimConfig { n_cells: 16, cfl: 1.0, ..Default::default() };
        let s0 = samples(&sys, 16, |z| (z * 7.0).sin());
        let s1 = step(&sys, &Matrix::zeros(1, 1), &s0, &cfg).unwrap();
        assert_eq!(s1.x[(0, 0)], 0.0);
        for j in 1..=16 {
            assert!((s1.x[(0, j)] - s0.x[(0, j - 1)]).abs() <= 1e-15);
        }
    }

    #[test]
    fn zero_gain_observer_tracks_identical_data() {
        let sys = reference::system();
        let spec = InitSpec::Samples {
            x: vec![(0..=20).map(|j| (j as f64 * 0.3).cos()).collect(); 2],
            xhat: vec![(0..=20).map(|j| (j as f64 * 0.3).cos()).collect(); 2],
            chi: vec![1.0, 1.0],
            chihat: vec![1.0, 1.0],
        };
        let init = make_initial(&sys, &spec, 20).unwrap();
        for scheme in [Scheme::Upwind, Scheme::TwoStepLxf] {
            let cfg = SimConfig { n_cells: 20, t_end: 2.0, scheme, ..Default::default() };
            let traj = simulate(&sys, &Matrix::zeros(2, 1), &init, &cfg).unwrap();
            for s in &traj.snapshots {
                assert_eq!(s.x, s.xhat);
                assert_eq!(s.chi, s.chihat);
            }
        }
    }

    #[test]
    fn boundary_invariant_and_time_grid() {
        let sys = reference::system();
        let cert = reference::published_certificate();
        let init = make_initial(&sys, &InitSpec::paper_example(), 32).unwrap();
        let cfg = SimConfig { n_cells: 32, t_end: 1.234, record_every: 3, scheme: Scheme::TwoStepLxf, ..Default::default() };
        let traj = simulate(&sys, &cert.l_gain, &init, &cfg).unwrap();
        assert_eq!(traj.snapshots[0], init);
        assert_eq!(traj.last().t, 1.234);
        assert!(traj.times().windows(2).all(|w| w[0] < w[1]));
        for s in &traj.snapshots {
            let b = sys.c().matvec(&s.chi);
            let bh = sys.c().matvec(&s.chihat);
            for i in 0..2 {
                assert_eq!(s.x[(i, 0)], b[i]);
                assert_eq!(s.xhat[(i, 0)], bh[i]);
            }
        }
    }

    #[test]
    fn zero_horizon_keeps_initial_state() {
        let sys = reference::system();
        let init = make_initial(&sys, &InitSpec::paper_example(), 8).unwrap();
        let cfg = SimConfig { n_cells: 8, t_end: 0.0, ..Default::default() };
        let traj = simulate(&sys, &Matrix::zeros(2, 1), &init, &cfg).unwrap();
        assert_eq!(traj.snapshots, vec![init]);
    }

    #[test]
    fn oracle_examples() {
        let init = |_: usize, z: f64| (TAU * z).sin();
        let zero = |_: usize, _: f64| 0.0;
        assert_eq!(characteristics_oracle(&[1.0], zero, init, 0.0, 0.3), vec![(TAU * 0.3).sin()]);
        let v = characteristics_oracle(&[1.0], zero, init, 0.25, 0.75);
        assert!(v[0].abs() < 1e-15);
        let flushed = characteristics_oracle(&[2.0, 4.0], |_, _| 3.0, init, 0.6, 0.9);
        assert_eq!(flushed, vec![3.0, 3.0]);
    }

    #[test]
    fn upwind_matches_oracle_at_unit_courant() {
        let sys = pure_transport(1.0);
        let n = 40;
        let bump = |z: f64| if (0.1..0.4).contains(&z) { (10.0 * (z - 0.1)).sin().powi(2) } else { 0.0 };
        let init = samples(&sys, n, bump);
        let cfg = SimConfig { n_cells: n, cfl: 1.0, t_end: 0.25, ..Default::default() };
        let last = simulate(&sys, &Matrix::zeros(1, 1), &init, &cfg).unwrap().last().clone();
        for j in 0..=n {
            let z = j as f64 / n as f64;
            let exact = characteristics_oracle(&[1.0], |_, _| 0.0, |_, z| bump(z), 0.25, z)[0];
            assert!((last.x[(0, j)] - exact).abs() <= 1e-12, "node {j}");
        }
    }

    #[test]
    fn csv_and_json_export() {
        let sys = reference::system();
        let init = make_initial(&sys, &InitSpec::paper_example(), 8).unwrap();
        let cfg = SimConfig { n_cells: 8, t_end: 0.1, ..Default::default() };
        let traj = simulate(&sys, &Matrix::zeros(2, 1), &init, &cfg).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,field,component,node,value"));
        assert_eq!(lines.next(), Some("0,x,0,0,1"));
        assert_eq!(text.lines().count(), 1 + traj.snapshots.len() * (2 * 2 * 9 + 4));
        let j = traj.to_json();
        assert_eq!(j["snapshots"].as_array().unwrap().len(), traj.snapshots.len());
        assert_eq!(j["config"]["scheme"], "upwind");
    }
}
