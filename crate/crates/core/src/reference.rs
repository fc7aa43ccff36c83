//! Deterministic front-fixing solver used as the comparison oracle.
//!
//! With `y = z/h(τ)` the moving interval `(0, h)` becomes `(0, 1)` and the
//! problem reads
//!
//! ```text
//! u_τ = u_yy / h² + (y·h'/h)·u_y                       0 < y < 1
//! −u_y(τ,0) / h = Bi·(f(τ) − H·u(τ,0))     (or u(τ,0) = u_D)
//! −u_y(τ,1) / h = h'·u(τ,1)
//! h' = A0·(u(τ,1) − σ̃(h))
//! ```
//!
//! Space: second-order central differences on `E` uniform cells; the two
//! flux conditions are imposed through ghost nodes, which keeps the scheme
//! second order at the boundaries. Time: `h` takes an explicit Euler step
//! from the old state, then `u` takes a backward Euler step with the new
//! `h` and the frozen speed `h'`, so each step is one tridiagonal solve.

use std::time::Instant;

use crate::error::SolverError;
use crate::model::DimensionlessProblem;
use crate::observables::trapezoid;
use crate::rwm::{problem_echo, problem_hash, snapshot_plan, LeftBoundary};
use crate::trace::{Diagnostics, Snapshot, SolutionTrace, SolverKind};

/// The problem posed on the fixed interval `y ∈ (0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformedProblem {
    pub problem: DimensionlessProblem,
    pub left: LeftBoundary,
}

pub fn transform_problem(problem: &DimensionlessProblem, left: &LeftBoundary) -> TransformedProblem {
    TransformedProblem {
        problem: problem.clone(),
        left: left.clone(),
    }
}

impl TransformedProblem {
    /// `h' = A0·(u(τ,1) − σ̃(h))`
    pub fn front_speed(&self, h: f64, u_front: f64) -> f64 {
        self.problem.a0 * (u_front - self.problem.sigma_tilde(h))
    }

    /// Right-hand side of the transformed diffusion equation.
    pub fn pde_rhs(&self, y: f64, h: f64, h_dot: f64, u_y: f64, u_yy: f64) -> f64 {
        u_yy / (h * h) + y * h_dot / h * u_y
    }

    /// `−u_y/h − h'·u` at `y = 1`; zero when the front condition holds.
    pub fn right_residual(&self, h: f64, h_dot: f64, u_y: f64, u: f64) -> f64 {
        -u_y / h - h_dot * u
    }

    /// Residual of the fixed-boundary condition at `y = 0`.
    pub fn left_residual(&self, tau: f64, h: f64, u_y: f64, u: f64) -> f64 {
        match &self.left {
            LeftBoundary::Dirichlet { u_d } => u - u_d,
            LeftBoundary::Robin => {
                let p = &self.problem;
                -u_y / h - p.bi * (p.forcing.eval(tau) - p.henry * u)
            }
        }
    }

    /// `u(0, y) = u0(y·h0)`
    pub fn initial(&self, y: f64) -> Option<f64> {
        self.problem.u0.eval(y * self.problem.h0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceMesh {
    pub elements: usize,
    pub dt: f64,
    pub snapshot_times: Vec<f64>,
    pub record_every: usize,
}

impl ReferenceMesh {
    pub fn new(elements: usize, dt: f64) -> Self {
        ReferenceMesh {
            elements,
            dt,
            snapshot_times: Vec::new(),
            record_every: 1,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.elements < 2 {
            return Err(SolverError::Numerics(format!(
                "reference mesh needs at least 2 elements, got {}",
                self.elements
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SolverError::Numerics(format!(
                "reference time step must be > 0, got {}",
                self.dt
            )));
        }
        if self.record_every == 0 {
            return Err(SolverError::Numerics("record_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// Thomas algorithm for `a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i`.
fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64], scratch: &mut [f64]) {
    let n = d.len();
    scratch[0] = c[0] / b[0];
    d[0] /= b[0];
    for i in 1..n {
        let m = b[i] - a[i] * scratch[i - 1];
        scratch[i] = c[i] / m;
        d[i] = (d[i] - a[i] * d[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        d[i] -= scratch[i] * d[i + 1];
    }
}

pub fn solve_reference(
    tp: &TransformedProblem,
    mesh: &ReferenceMesh,
) -> Result<SolutionTrace, SolverError> {
    let problem = &tp.problem;
    problem.validate()?;
    tp.left.validate()?;
    mesh.validate()?;
    let started = Instant::now();

    let e = mesh.elements;
    let dy = 1.0 / e as f64;
    let ys: Vec<f64> = (0..=e).map(|i| i as f64 * dy).collect();
    let mut u = Vec::with_capacity(e + 1);
    for (i, &y) in ys.iter().enumerate() {
        let v = tp
            .initial(y)
            .filter(|v| v.is_finite())
            .ok_or(SolverError::UndefinedInitialData {
                node: i,
                z: y * problem.h0,
            })?;
        u.push(v);
    }

    let final_time = problem.final_time;
    let steps = if final_time > 0.0 {
        let ratio = final_time / mesh.dt;
        let whole = ratio.round();
        if (ratio - whole).abs() <= 1e-9 * whole.max(1.0) {
            whole as usize
        } else {
            ratio.ceil() as usize
        }
    } else {
        0
    };
    let dt = if steps > 0 { final_time / steps as f64 } else { mesh.dt };
    for &t in &mesh.snapshot_times {
        if !(t >= 0.0 && t <= final_time) {
            return Err(SolverError::Numerics(format!(
                "snapshot time {t} lies outside [0, {final_time}]"
            )));
        }
    }
    let plan = snapshot_plan(&mesh.snapshot_times, dt, steps);
    let mut plan_iter = plan.iter().peekable();

    let mut trace = SolutionTrace {
        solver: SolverKind::Reference,
        tau: Vec::new(),
        front: Vec::new(),
        mass: Vec::new(),
        left: Vec::new(),
        snapshots: Vec::new(),
        diagnostics: Diagnostics::default(),
        wall_time: 0.0,
        final_time,
        seed: None,
        problem_hash: problem_hash(problem, &tp.left),
        config_echo: problem_echo(problem, &tp.left),
        scales: problem.scales,
        dimensional: false,
    };

    let (mut a, mut b, mut c) = (vec![0.0; e + 1], vec![0.0; e + 1], vec![0.0; e + 1]);
    let mut rhs = vec![0.0; e + 1];
    let mut scratch = vec![0.0; e + 1];
    let mut h = problem.h0;
    let mut reached_end = false;

    let mut j = 0;
    loop {
        let tau = j as f64 * dt;
        let stop = j == steps || reached_end;
        if j % mesh.record_every == 0 || stop {
            trace.tau.push(tau);
            trace.front.push(h);
            trace.mass.push(h * trapezoid(&u, dy));
            trace.left.push(u[0]);
        }
        while let Some(&&(js, requested)) = plan_iter.peek() {
            if js != j {
                break;
            }
            trace.snapshots.push(Snapshot {
                requested,
                tau,
                h,
                z: ys.iter().map(|y| y * h).collect(),
                u: u.clone(),
            });
            plan_iter.next();
        }
        if stop {
            break;
        }

        let h_dot = tp.front_speed(h, u[e]);
        let h_new = h + dt * h_dot;
        let tau_new = tau + dt;
        let diff = dt / (h_new * h_new * dy * dy);
        let adv = dt * h_dot / (2.0 * h_new * dy);

        for i in 1..e {
            a[i] = -diff + adv * ys[i];
            b[i] = 1.0 + 2.0 * diff;
            c[i] = -diff - adv * ys[i];
            rhs[i] = u[i];
        }
        // y = 1: ghost u_{E+1} = u_{E-1} − g·u_E with g = 2·dy·h·h'.
        let g = 2.0 * dy * h_new * h_dot;
        a[e] = -2.0 * diff;
        b[e] = 1.0 + 2.0 * diff + diff * g + adv * g;
        c[e] = 0.0;
        rhs[e] = u[e];
        match &tp.left {
            LeftBoundary::Dirichlet { u_d } => {
                a[0] = 0.0;
                b[0] = 1.0;
                c[0] = 0.0;
                rhs[0] = *u_d;
            }
            LeftBoundary::Robin => {
                // ghost u_{-1} = u_1 + q·(f − H·u_0) with q = 2·dy·h·Bi.
                let q = 2.0 * dy * h_new * problem.bi;
                a[0] = 0.0;
                b[0] = 1.0 + 2.0 * diff + diff * q * problem.henry;
                c[0] = -2.0 * diff;
                rhs[0] = u[0] + diff * q * problem.forcing.eval(tau_new);
            }
        }
        solve_tridiagonal(&a, &b, &c, &mut rhs, &mut scratch);
        std::mem::swap(&mut u, &mut rhs);
        h = h_new;
        j += 1;

        if !h.is_finite() || u.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::BlowUp { step: j });
        }
        if h >= problem.length {
            reached_end = true;
        }
    }

    trace.diagnostics.steps = j;
    trace.diagnostics.reached_end = reached_end;
    trace.diagnostics.realized_condition_ok = true;
    trace.wall_time = started.elapsed().as_secs_f64();
    Ok(trace)
}

/// `|h_dt(T) − h_{dt/2}(T)|`, a check that the explicit front update is
/// resolved at the chosen step.
pub fn step_halving_gap(tp: &TransformedProblem, mesh: &ReferenceMesh) -> Result<f64, SolverError> {
    let coarse = ReferenceMesh {
        snapshot_times: Vec::new(),
        record_every: usize::MAX,
        ..mesh.clone()
    };
    let fine = ReferenceMesh {
        dt: mesh.dt / 2.0,
        ..coarse.clone()
    };
    let a = solve_reference(tp, &coarse)?;
    let b = solve_reference(tp, &fine)?;
    Ok((a.final_front() - b.final_front()).abs())
}
