//! Finite-difference generation of the eight PDE classes.
//!
//! Interior nodes evolve under `e·u_tt + d·u_t − c·∇²u + B·∇u = 0` with the
//! four walls held at their Dirichlet values. `∇²` uses the 5-point stencil,
//! `B·∇u` is first-order upwind. Parabolic problems (`e = 0`) use forward
//! Euler, hyperbolic ones (`e = 1`) use leapfrog with the damping term
//! averaged over the two outer levels. Steady problems are relaxed with SOR.

mod table;

pub use table::{
    enumerate_specs, generate_dataset, generate_dataset_with, generate_samples, GenerateError,
    SampleSpec,
};

use crate::types::{GridField, PdeSpec, SpecError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Upper bound on internal sub-steps per stored step.
    pub substeps_max: usize,
    /// Convergence threshold on the largest Gauss-Seidel correction.
    pub steady_tol: f64,
    pub steady_iter_max: usize,
    /// Fraction of the stability limit used when choosing sub-steps, in (0, 1).
    pub cfl_safety: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            substeps_max: 10_000,
            steady_tol: 1e-12,
            steady_iter_max: 200_000,
            cfl_safety: 0.9,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    InvalidSpec(#[from] SpecError),
    #[error("invalid solver config: {0}")]
    InvalidConfig(&'static str),
    #[error("{0}")]
    WrongKind(&'static str),
    #[error("stability needs {required} sub-steps per output step, cap is {max}")]
    Unstable { required: usize, max: usize },
    #[error("state became non-finite at output step {step}")]
    NonFinite { step: usize },
    #[error("relaxation stalled at residual {residual:e} after {iterations} sweeps")]
    NotConverged { residual: f64, iterations: usize },
}

impl SolverConfig {
    fn validate(&self) -> Result<(), SolverError> {
        if self.substeps_max < 1 {
            return Err(SolverError::InvalidConfig("substeps_max must be >= 1"));
        }
        if !(self.steady_tol > 0.0) {
            return Err(SolverError::InvalidConfig("steady_tol must be > 0"));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety < 1.0) {
            return Err(SolverError::InvalidConfig("cfl_safety must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// First frame: walls at their Dirichlet values, interior at `ic`.
/// Corner nodes take the mean of their two walls.
pub fn initial_frame(spec: &PdeSpec) -> Vec<f64> {
    let (ny, nx) = (spec.ny, spec.nx);
    let [x_min, y_min, y_max, x_max] = spec.bc;
    let mut u = vec![spec.ic; ny * nx];
    for y in 0..ny {
        u[y * nx] = x_min;
        u[y * nx + nx - 1] = x_max;
    }
    for x in 0..nx {
        u[x] = y_min;
        u[(ny - 1) * nx + x] = y_max;
    }
    u[0] = 0.5 * (x_min + y_min);
    u[nx - 1] = 0.5 * (x_max + y_min);
    u[(ny - 1) * nx] = 0.5 * (x_min + y_max);
    u[ny * nx - 1] = 0.5 * (x_max + y_max);
    u
}

/// Discrete spatial operator `c·∇²u − B·∇u` with upwinded convection.
#[derive(Debug, Clone, Copy)]
struct Operator {
    ny: usize,
    nx: usize,
    c_h2: f64,
    bx_h: f64,
    by_h: f64,
    bx_pos: bool,
    by_pos: bool,
}

impl Operator {
    fn new(spec: &PdeSpec) -> Self {
        let h = spec.h();
        Self {
            ny: spec.ny,
            nx: spec.nx,
            c_h2: spec.c / (h * h),
            bx_h: spec.bx / h,
            by_h: spec.by / h,
            bx_pos: spec.bx >= 0.0,
            by_pos: spec.by >= 0.0,
        }
    }

    #[inline]
    fn apply_at(&self, u: &[f64], y: usize, x: usize) -> f64 {
        let nx = self.nx;
        let k = y * nx + x;
        let (w, e, s, n) = (u[k - 1], u[k + 1], u[k - nx], u[k + nx]);
        let lap = self.c_h2 * (w + e + s + n - 4.0 * u[k]);
        let dx = if self.bx_pos { u[k] - w } else { e - u[k] };
        let dy = if self.by_pos { u[k] - s } else { n - u[k] };
        lap - self.bx_h * dx - self.by_h * dy
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        for y in 1..self.ny - 1 {
            for x in 1..self.nx - 1 {
                out[y * self.nx + x] = self.apply_at(u, y, x);
            }
        }
    }
}

/// Smallest sub-step count keeping the explicit scheme stable for `spec`.
pub fn required_substeps(spec: &PdeSpec, safety: f64) -> usize {
    let h = spec.h();
    let dt = spec.dt_sim;
    let bmax = spec.bx.abs().max(spec.by.abs());
    let bsum = spec.bx.abs() + spec.by.abs();
    let mut n: f64 = 1.0;
    if spec.e == 0.0 {
        let k = 1.0 / spec.d.abs();
        let diff = k * spec.c * dt / (h * h);
        let adv = k * bmax * dt / h;
        n = n.max(diff / (0.25 * safety));
        n = n.max(adv / safety);
        // positivity of the forward-Euler update
        n = n.max((4.0 * diff + k * bsum * dt / h) / safety);
    } else {
        let wave = spec.c.sqrt() * dt / h;
        let adv = bmax * dt / h;
        n = n.max(wave / safety);
        n = n.max(adv / safety);
        // leapfrog bound dt²·|λ|max ≤ 4 with a Gershgorin estimate of |λ|max
        let lam = 8.0 * spec.c / (h * h) + 2.0 * bsum / h;
        n = n.max((dt * dt * lam / (4.0 * safety)).sqrt());
    }
    (n - 1e-12).ceil().max(1.0) as usize
}

/// Time-dependent solve on the output grid (`nt` frames, `dt_sim` apart).
pub fn simulate(spec: &PdeSpec, cfg: &SolverConfig) -> Result<GridField, SolverError> {
    spec.validate()?;
    cfg.validate()?;
    if spec.is_steady() {
        return Err(SolverError::WrongKind(
            "simulate needs a time derivative; use solve_steady",
        ));
    }
    if spec.e == 0.0 && spec.d <= 0.0 {
        return Err(SolverError::WrongKind("first-order problem needs d > 0"));
    }
    if spec.d < 0.0 {
        return Err(SolverError::WrongKind(
            "damping coefficient must be non-negative",
        ));
    }
    let substeps = required_substeps(spec, cfg.cfl_safety);
    if substeps > cfg.substeps_max {
        return Err(SolverError::Unstable {
            required: substeps,
            max: cfg.substeps_max,
        });
    }
    let op = Operator::new(spec);
    let dt = spec.dt_sim / substeps as f64;
    let n = spec.ny * spec.nx;
    let mut out = Vec::with_capacity(spec.nt * n);
    let mut u = initial_frame(spec);
    out.extend_from_slice(&u);
    let mut lu = vec![0.0; n];

    if spec.e == 0.0 {
        let k = dt / spec.d;
        for step in 1..spec.nt {
            for _ in 0..substeps {
                op.apply(&u, &mut lu);
                for_interior(spec, |i| u[i] += k * lu[i]);
            }
            check_finite(&u, step)?;
            out.extend_from_slice(&u);
        }
    } else {
        let half_damp = 0.5 * spec.d * dt;
        let dt2 = dt * dt;
        let mut prev = u.clone();
        let mut next = u.clone();
        let mut first = true;
        for step in 1..spec.nt {
            for _ in 0..substeps {
                op.apply(&u, &mut lu);
                if first {
                    // zero initial velocity
                    for_interior(spec, |i| next[i] = u[i] + 0.5 * dt2 * lu[i]);
                    first = false;
                } else {
                    for_interior(spec, |i| {
                        next[i] = (2.0 * u[i] - (1.0 - half_damp) * prev[i] + dt2 * lu[i])
                            / (1.0 + half_damp)
                    });
                }
                std::mem::swap(&mut prev, &mut u);
                std::mem::swap(&mut u, &mut next);
            }
            check_finite(&u, step)?;
            out.extend_from_slice(&u);
        }
    }
    GridField::new(out, spec.nt, spec.ny, spec.nx, spec.dt_sim)
        .map_err(|_| SolverError::NonFinite { step: 0 })
}

#[inline]
fn for_interior(spec: &PdeSpec, mut f: impl FnMut(usize)) {
    for y in 1..spec.ny - 1 {
        for x in 1..spec.nx - 1 {
            f(y * spec.nx + x);
        }
    }
}

fn check_finite(u: &[f64], step: usize) -> Result<(), SolverError> {
    if u.iter().all(|v| v.is_finite() && v.abs() < 1e150) {
        Ok(())
    } else {
        Err(SolverError::NonFinite { step })
    }
}

/// Outcome of a steady relaxation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStats {
    pub iterations: usize,
    pub residual: f64,
    pub omega: f64,
}

/// Solves `−c·∇²u + B·∇u = 0` for the steady frame and reports convergence.
pub fn solve_steady_frame(
    spec: &PdeSpec,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, SteadyStats), SolverError> {
    spec.validate()?;
    cfg.validate()?;
    let n_side = spec.nx.max(spec.ny) as f64;
    let omega_opt = 2.0 / (1.0 + (std::f64::consts::PI / (n_side - 1.0)).sin());
    let mut last = None;
    for omega in [omega_opt, 1.0] {
        match sor(spec, cfg, omega) {
            Ok(r) => return Ok(r),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

fn sor(
    spec: &PdeSpec,
    cfg: &SolverConfig,
    omega: f64,
) -> Result<(Vec<f64>, SteadyStats), SolverError> {
    let (ny, nx) = (spec.ny, spec.nx);
    let h = spec.h();
    let w_diff = spec.c / (h * h);
    let w_bx = spec.bx.abs() / h;
    let w_by = spec.by.abs() / h;
    let diag = 4.0 * w_diff + w_bx + w_by;
    let mut u = initial_frame(spec);
    let mut residual = f64::INFINITY;
    for iter in 1..=cfg.steady_iter_max {
        residual = 0.0;
        for y in 1..ny - 1 {
            for x in 1..nx - 1 {
                let k = y * nx + x;
                let (w, e, s, n) = (u[k - 1], u[k + 1], u[k - nx], u[k + nx]);
                let up_x = if spec.bx >= 0.0 { w } else { e };
                let up_y = if spec.by >= 0.0 { s } else { n };
                let gs = (w_diff * (w + e + s + n) + w_bx * up_x + w_by * up_y) / diag;
                let r = gs - u[k];
                residual = f64::max(residual, r.abs());
                u[k] += omega * r;
            }
        }
        if !residual.is_finite() || residual > 1e100 {
            return Err(SolverError::NotConverged {
                residual,
                iterations: iter,
            });
        }
        if residual < cfg.steady_tol {
            return Ok((
                u,
                SteadyStats {
                    iterations: iter,
                    residual,
                    omega,
                },
            ));
        }
    }
    Err(SolverError::NotConverged {
        residual,
        iterations: cfg.steady_iter_max,
    })
}

/// Steady solve replicated over `nt` identical frames.
pub fn solve_steady(spec: &PdeSpec, cfg: &SolverConfig) -> Result<GridField, SolverError> {
    if !spec.is_steady() {
        return Err(SolverError::WrongKind(
            "solve_steady needs e = d = 0; use simulate",
        ));
    }
    let (frame, _) = solve_steady_frame(spec, cfg)?;
    let mut values = Vec::with_capacity(spec.nt * frame.len());
    for _ in 0..spec.nt {
        values.extend_from_slice(&frame);
    }
    GridField::new(values, spec.nt, spec.ny, spec.nx, spec.dt_sim)
        .map_err(|_| SolverError::NonFinite { step: 0 })
}

/// Dispatches to [`simulate`] or [`solve_steady`].
pub fn solve(spec: &PdeSpec, cfg: &SolverConfig) -> Result<GridField, SolverError> {
    if spec.is_steady() {
        solve_steady(spec, cfg)
    } else {
        simulate(spec, cfg)
    }
}
