//! Block-matching motion between consecutive frames.
//!
//! For every interior node at time `t`, the 8 neighbours at `t + 1` are
//! searched for the value closest to the node's current value. The zero
//! offset is excluded. Ties go to the shorter offset, then to the
//! lexicographically smaller `(dy, dx)`.

use crate::par::Exec;
use crate::types::GridField;

/// Search offsets `(dy, dx)` in tie-break order.
pub const OFFSETS: [(isize, isize); 8] = [
    (-1, 0),
    (0, -1),
    (0, 1),
    (1, 0),
    (-1, -1),
    (-1, 1),
    (1, -1),
    (1, 1),
];

/// Mean displacement `(vx, vy)` per frame transition, in cells.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionField {
    pub vectors: Vec<(f64, f64)>,
}

/// Offset chosen for node `(y, x)` between `prev` and `next` (row-major frames of width `nx`).
#[inline]
pub fn best_offset(prev: &[f64], next: &[f64], nx: usize, y: usize, x: usize) -> (isize, isize) {
    let v = prev[y * nx + x];
    let mut best = OFFSETS[0];
    let mut best_err = f64::INFINITY;
    for &(dy, dx) in &OFFSETS {
        let yy = (y as isize + dy) as usize;
        let xx = (x as isize + dx) as usize;
        let err = (next[yy * nx + xx] - v).abs();
        if err < best_err {
            best_err = err;
            best = (dy, dx);
        }
    }
    best
}

fn frame_vector(field: &GridField, t: usize) -> (f64, f64) {
    let (ny, nx) = (field.ny(), field.nx());
    let prev = field.frame(t);
    let next = field.frame(t + 1);
    let (mut sx, mut sy) = (0.0, 0.0);
    for y in 1..ny - 1 {
        for x in 1..nx - 1 {
            let (dy, dx) = best_offset(prev, next, nx, y, x);
            sx += dx as f64;
            sy += dy as f64;
        }
    }
    let count = ((ny - 2) * (nx - 2)) as f64;
    (sx / count, sy / count)
}

pub fn motion_vectors(field: &GridField) -> MotionField {
    motion_vectors_with(field, Exec::Sequential)
}

pub fn motion_vectors_with(field: &GridField, exec: Exec) -> MotionField {
    MotionField {
        vectors: exec.map_range(field.nt() - 1, |t| frame_vector(field, t)),
    }
}

/// Time average of the norm of each per-frame mean vector.
pub fn motion_magnitude(mv: &MotionField) -> f64 {
    if mv.vectors.is_empty() {
        return 0.0;
    }
    mv.vectors.iter().map(|(x, y)| x.hypot(*y)).sum::<f64>() / mv.vectors.len() as f64
}
