//! Profile projection along the boundary-driven flow direction and the
//! symmetry signal used to detect convection.

use crate::stats;
use crate::types::{GridField, PdeSpec};

/// Column means `ū_x[x]` and row means `ū_y[y]` of frame `t`.
pub fn marginal_profiles(field: &GridField, t: usize) -> (Vec<f64>, Vec<f64>) {
    let (ny, nx) = (field.ny(), field.nx());
    let frame = field.frame(t);
    let mut ux = vec![0.0; nx];
    let mut uy = vec![0.0; ny];
    for y in 0..ny {
        for x in 0..nx {
            let v = frame[y * nx + x];
            ux[x] += v;
            uy[y] += v;
        }
    }
    ux.iter_mut().for_each(|v| *v /= ny as f64);
    uy.iter_mut().for_each(|v| *v /= nx as f64);
    (ux, uy)
}

/// Unit vector of the wall-value differences `(bc1 − bc4, bc2 − bc3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowDirection {
    pub d1: f64,
    pub d2: f64,
    /// Set when all wall differences vanish; the direction is then `(1, 0)`.
    pub degenerate: bool,
}

pub fn flow_direction(spec: &PdeSpec) -> FlowDirection {
    let dcx = spec.bc[0] - spec.bc[3];
    let dcy = spec.bc[1] - spec.bc[2];
    let norm = dcx.hypot(dcy);
    if norm == 0.0 {
        FlowDirection {
            d1: 1.0,
            d2: 0.0,
            degenerate: true,
        }
    } else {
        FlowDirection {
            d1: dcx / norm,
            d2: dcy / norm,
            degenerate: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedProfiles {
    /// Across the flow: `d1·ū_y − d2·ū_x`.
    pub v1: Vec<f64>,
    /// Along the flow: `d1·ū_x + d2·ū_y`.
    pub v2: Vec<f64>,
    pub d1: f64,
    pub d2: f64,
}

/// Relative spread below which a profile counts as flat.
pub const FLAT_PROFILE_TOL: f64 = 1e-9;

/// Min-max normalization; flat profiles (spread ≤ `FLAT_PROFILE_TOL` of
/// their magnitude) map to zeros so rounding noise is not amplified.
pub fn minmax_normalized(xs: &[f64]) -> Vec<f64> {
    let lo = stats::min(xs);
    let hi = stats::max(xs);
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    if hi - lo > FLAT_PROFILE_TOL * scale {
        xs.iter().map(|v| (v - lo) / (hi - lo)).collect()
    } else {
        vec![0.0; xs.len()]
    }
}

/// Projects the marginal profiles of frame `t` onto the flow frame.
/// Requires a square grid.
pub fn project_profiles(field: &GridField, spec: &PdeSpec, t: usize) -> ProjectedProfiles {
    assert_eq!(
        field.nx(),
        field.ny(),
        "profile projection needs a square grid"
    );
    let (ux, uy) = marginal_profiles(field, t);
    let FlowDirection { d1, d2, .. } = flow_direction(spec);
    let v1 = uy.iter().zip(&ux).map(|(y, x)| d1 * y - d2 * x).collect();
    let v2 = ux.iter().zip(&uy).map(|(x, y)| d1 * x + d2 * y).collect();
    ProjectedProfiles { v1, v2, d1, d2 }
}

/// `S[g] = v1[g] − v1[n−1−g]` for the first half of the cross-flow profile.
pub fn symmetry_from_profile(v1: &[f64]) -> Vec<f64> {
    let n = v1.len();
    (0..n / 2).map(|g| v1[g] - v1[n - 1 - g]).collect()
}

/// Symmetry of the min-max normalized cross-flow profile at frame `t`.
pub fn symmetry_signal(field: &GridField, spec: &PdeSpec, t: usize) -> Vec<f64> {
    symmetry_from_profile(&minmax_normalized(&project_profiles(field, spec, t).v1))
}

/// `[mean, std, min, max, mean|S|, std|S|, skew]` of `S`.
pub fn symmetry_stats(s: &[f64]) -> [f64; 7] {
    let abs: Vec<f64> = s.iter().map(|v| v.abs()).collect();
    [
        stats::mean(s),
        stats::std(s),
        stats::min(s),
        stats::max(s),
        stats::mean(&abs),
        stats::std(&abs),
        stats::skew(s),
    ]
}

/// Symmetry statistics on the final frame.
pub fn spatial_features(field: &GridField, spec: &PdeSpec) -> [f64; 7] {
    symmetry_stats(&symmetry_signal(field, spec, field.nt() - 1))
}
