//! Coefficient magnitudes once the term set is known: wave speed from the
//! travelling front, damping from the amplitude decay, and least-squares
//! regression of the PDE coefficients on finite-difference derivatives.

use crate::signal::{self, SavitzkyGolay, SignalError, SMOOTH_ORDER, SMOOTH_WINDOW};
use crate::spatial::{minmax_normalized, project_profiles};
use crate::types::{GridField, PdeSpec, TermLabels};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;
use thiserror::Error;

/// Normalized profile level that marks the front edge.
pub const FRONT_LEVEL: f64 = 0.5;
pub const MIN_FRONT_FRAMES: usize = 10;
pub const MIN_DECAY_POINTS: usize = 20;
pub const AMPLITUDE_FLOOR: f64 = 1e-6;
pub const MAX_CONDITION: f64 = 1e10;
/// Half-open window of output steps used for decay fits and regression.
pub const FIT_WINDOW: (usize, usize) = (50, 450);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoeffError {
    #[error("no front crossing found in at least {MIN_FRONT_FRAMES} frames (found {frames})")]
    NoFrontDetected { frames: usize },
    #[error("only {points} amplitude samples above the floor; need {MIN_DECAY_POINTS}")]
    DegenerateAmplitude { points: usize },
    #[error("normal matrix condition number {0:.3e} exceeds {MAX_CONDITION:.0e}")]
    IllConditioned(f64),
    #[error("field of shape {shape:?} too small for {what}")]
    FieldTooSmall {
        shape: (usize, usize, usize),
        what: &'static str,
    },
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Least-squares line `y = intercept + slope·x`.
fn line_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - slope * mx, slope)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontTrack {
    /// Output steps at which the edge was located.
    pub frames: Vec<usize>,
    /// Edge position in cells from the source side.
    pub positions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveSpeed {
    /// Absolute fitted slope, cells per output step.
    pub speed: f64,
    pub slope: f64,
    pub track: FrontTrack,
}

/// First position, scanning from index 0, where `p` drops through `level`,
/// linearly interpolated between grid points.
fn first_crossing(p: &[f64], level: f64) -> Option<f64> {
    p.windows(2).enumerate().find_map(|(g, w)| {
        (w[0] >= level && w[1] < level).then(|| g as f64 + (w[0] - level) / (w[0] - w[1]))
    })
}

/// Front edge along the flow direction, tracked until its motion first
/// reverses.
///
/// Each frame is projected on `v2`, min-max normalized and scanned from the
/// source side (index 0, where the projection is high) for the first drop
/// through [`FRONT_LEVEL`].
pub fn track_front(field: &GridField, spec: &PdeSpec) -> FrontTrack {
    let mut frames = Vec::new();
    let mut positions: Vec<f64> = Vec::new();
    let mut heading = 0.0f64;
    for t in 0..field.nt() {
        let p = minmax_normalized(&project_profiles(field, spec, t).v2);
        let Some(x) = first_crossing(&p, FRONT_LEVEL) else {
            if positions.is_empty() {
                continue;
            }
            break;
        };
        if let Some(&prev) = positions.last() {
            let step = x - prev;
            if heading == 0.0 && step.abs() > 1e-12 {
                heading = step.signum();
            } else if step * heading < -1e-12 {
                break;
            }
        }
        frames.push(t);
        positions.push(x);
    }
    FrontTrack { frames, positions }
}

/// Speed of the leading front in cells per output step.
pub fn wave_speed_estimate(field: &GridField, spec: &PdeSpec) -> Result<WaveSpeed, CoeffError> {
    let track = track_front(field, spec);
    if track.frames.len() < MIN_FRONT_FRAMES {
        return Err(CoeffError::NoFrontDetected {
            frames: track.frames.len(),
        });
    }
    let ts: Vec<f64> = track.frames.iter().map(|&t| t as f64).collect();
    let (_, slope) = line_fit(&ts, &track.positions);
    Ok(WaveSpeed {
        speed: slope.abs(),
        slope,
        track,
    })
}

/// Decay rate `λ` of `A(t) = A₀·e^{−λt}` fitted on `log A` over
/// [`FIT_WINDOW`], using only samples above [`AMPLITUDE_FLOOR`].
pub fn decay_rate(amplitude: &[f64]) -> Result<f64, CoeffError> {
    let (lo, hi) = FIT_WINDOW;
    let hi = hi.min(amplitude.len());
    let (ts, ys): (Vec<f64>, Vec<f64>) = (lo..hi)
        .filter(|&t| amplitude[t] > AMPLITUDE_FLOOR)
        .map(|t| (t as f64, amplitude[t].ln()))
        .unzip();
    if ts.len() < MIN_DECAY_POINTS {
        return Err(CoeffError::DegenerateAmplitude { points: ts.len() });
    }
    Ok(-line_fit(&ts, &ys).1)
}

/// Decay rate of the envelope amplitude of the field's time signal.
pub fn damping_estimate(field: &GridField) -> Result<f64, CoeffError> {
    let prepared = signal::prepare_signal(&signal::delta_signal(field))?;
    decay_rate(&signal::envelopes(&prepared).amplitude)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressOptions {
    /// Savitzky-Golay smoothing of each node's time series before differencing.
    pub smooth_time: bool,
    /// Half-open range of output steps used as equations.
    pub t_range: (usize, usize),
}

impl Default for RegressOptions {
    fn default() -> Self {
        RegressOptions {
            smooth_time: false,
            t_range: FIT_WINDOW,
        }
    }
}

/// Coefficients of `e·u_tt + d·u_t − c·∇²u + bx·u_x + by·u_y = 0` with
/// inactive terms at 0 and one coefficient fixed to 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficients {
    pub e: f64,
    pub d: f64,
    pub c: f64,
    pub bx: f64,
    pub by: f64,
    /// Term whose coefficient was fixed to 1.
    pub normalized: Term,
    pub residual_norm: f64,
    /// Residual relative to the norm of the normalized term's column.
    pub relative_residual: f64,
    pub condition: f64,
    pub equations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    Utt,
    Ut,
    Laplacian,
    Ux,
    Uy,
}

/// Fits the active terms' coefficients by least squares.
///
/// The leading active time derivative is fixed to 1. When its column is
/// identically zero (steady data) the Laplacian is fixed instead, with
/// `c = 1`. `h` is the grid spacing; the field's `dt` is the time step.
pub fn regress_coefficients(
    field: &GridField,
    terms: TermLabels,
    h: f64,
    opts: RegressOptions,
) -> Result<Coefficients, CoeffError> {
    let (nt, ny, nx) = field.shape();
    let (t0, t1) = (
        opts.t_range.0.max(1),
        opts.t_range.1.min(nt.saturating_sub(1)),
    );
    if ny < 3 || nx < 3 || t0 >= t1 {
        return Err(CoeffError::FieldTooSmall {
            shape: field.shape(),
            what: "centered differences",
        });
    }
    let smoothed;
    let u: &[f64] = if opts.smooth_time {
        let sg = SavitzkyGolay::new(SMOOTH_WINDOW, SMOOTH_ORDER).expect("valid window");
        if nt < SMOOTH_WINDOW {
            return Err(CoeffError::FieldTooSmall {
                shape: field.shape(),
                what: "time smoothing",
            });
        }
        let mut out = vec![0.0; field.values().len()];
        let plane = ny * nx;
        for node in 0..plane {
            let series: Vec<f64> = (0..nt).map(|t| field.values()[t * plane + node]).collect();
            let s = sg.smooth(&series).expect("length checked");
            for (t, v) in s.into_iter().enumerate() {
                out[t * plane + node] = v;
            }
        }
        smoothed = out;
        &smoothed
    } else {
        field.values()
    };
    let dt = field.dt();
    let at = |t: usize, y: usize, x: usize| u[(t * ny + y) * nx + x];

    let mut active = Vec::new();
    if terms.has_utt {
        active.push(Term::Utt);
    }
    if terms.has_ut {
        active.push(Term::Ut);
    }
    active.push(Term::Laplacian);
    if terms.has_conv {
        active.push(Term::Ux);
        active.push(Term::Uy);
    }
    // coefficient sign in `e·u_tt + d·u_t − c·∇²u + B·∇u`
    let sign = |t: Term| if t == Term::Laplacian { -1.0 } else { 1.0 };
    let row = |t: usize, y: usize, x: usize, out: &mut [f64]| {
        let c = at(t, y, x);
        for (slot, term) in active.iter().enumerate() {
            out[slot] = match term {
                Term::Utt => (at(t + 1, y, x) - 2.0 * c + at(t - 1, y, x)) / (dt * dt),
                Term::Ut => (at(t + 1, y, x) - at(t - 1, y, x)) / (2.0 * dt),
                Term::Laplacian => {
                    (at(t, y, x + 1) + at(t, y, x - 1) + at(t, y + 1, x) + at(t, y - 1, x)
                        - 4.0 * c)
                        / (h * h)
                }
                Term::Ux => (at(t, y, x + 1) - at(t, y, x - 1)) / (2.0 * h),
                Term::Uy => (at(t, y + 1, x) - at(t, y - 1, x)) / (2.0 * h),
            };
        }
    };
    let for_rows = |f: &mut dyn FnMut(&[f64])| {
        let mut buf = vec![0.0; active.len()];
        for t in t0..t1 {
            for y in 1..ny - 1 {
                for x in 1..nx - 1 {
                    row(t, y, x, &mut buf);
                    f(&buf);
                }
            }
        }
    };

    // full Gram matrix of all active columns
    let k = active.len();
    let mut gram = DMatrix::<f64>::zeros(k, k);
    let mut equations = 0;
    for_rows(&mut |r| {
        equations += 1;
        for i in 0..k {
            for j in 0..k {
                gram[(i, j)] += r[i] * r[j];
            }
        }
    });
    let norms: Vec<f64> = (0..k).map(|i| gram[(i, i)].sqrt()).collect();
    let lead = active
        .iter()
        .position(|t| {
            matches!(t, Term::Utt | Term::Ut)
                && norms[active.iter().position(|s| s == t).unwrap()] > 0.0
        })
        .unwrap_or_else(|| active.iter().position(|t| *t == Term::Laplacian).unwrap());
    // identically zero columns carry no information; their coefficients stay 0
    let free: Vec<usize> = (0..k).filter(|&i| i != lead && norms[i] > 0.0).collect();

    // solve Σ_free sign·coef·col = −col_lead (lead coefficient fixed to 1 in its own units)
    let mut coef = vec![0.0; k];
    coef[lead] = 1.0;
    let mut condition = 1.0;
    if !free.is_empty() {
        let m = free.len();
        let mut n_eq = DMatrix::<f64>::zeros(m, m);
        let mut rhs = DVector::<f64>::zeros(m);
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                n_eq[(a, b)] = gram[(i, j)] / (norms[i] * norms[j]);
            }
            rhs[a] = -gram[(i, lead)] * sign(active[lead]) / norms[i];
        }
        let eig = SymmetricEigen::new(n_eq.clone());
        let (lo, hi) = eig
            .eigenvalues
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
        condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(condition <= MAX_CONDITION) {
            return Err(CoeffError::IllConditioned(condition));
        }
        let z = n_eq
            .cholesky()
            .map(|c| c.solve(&rhs))
            .ok_or(CoeffError::IllConditioned(condition))?;
        for (a, &i) in free.iter().enumerate() {
            // column i enters with sign(i)·coef[i]; z solves for that product in equilibrated units
            coef[i] = z[a] / norms[i] * sign(active[i]);
        }
    }

    // residual of Σ sign·coef·col
    let mut rss = 0.0;
    for_rows(&mut |r| {
        let v: f64 = (0..k).map(|i| sign(active[i]) * coef[i] * r[i]).sum();
        rss += v * v;
    });
    let residual_norm = rss.sqrt();
    let lead_norm = norms[lead];
    let relative_residual = if lead_norm > 0.0 {
        residual_norm / lead_norm
    } else {
        residual_norm
    };

    let mut out = Coefficients {
        e: 0.0,
        d: 0.0,
        c: 0.0,
        bx: 0.0,
        by: 0.0,
        normalized: active[lead],
        residual_norm,
        relative_residual,
        condition,
        equations,
    };
    for (i, term) in active.iter().enumerate() {
        match term {
            Term::Utt => out.e = coef[i],
            Term::Ut => out.d = coef[i],
            Term::Laplacian => out.c = coef[i],
            Term::Ux => out.bx = coef[i],
            Term::Uy => out.by = coef[i],
        }
    }
    Ok(out)
}
