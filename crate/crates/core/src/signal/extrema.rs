//! Peak and valley detection with a prominence floor.

/// Minimum prominence, as a fraction of the signal range, for an extremum to count.
pub const PROMINENCE_FRACTION: f64 = 0.01;

/// Strict local maxima and minima whose prominence is at least
/// [`PROMINENCE_FRACTION`] of the signal range. Flat plateaus report their
/// midpoint; the first and last samples are never extrema.
pub fn find_extrema(xs: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let peaks = find_peaks(xs);
    let neg: Vec<f64> = xs.iter().map(|v| -v).collect();
    let valleys = find_peaks(&neg);
    (peaks, valleys)
}

fn find_peaks(xs: &[f64]) -> Vec<usize> {
    let n = xs.len();
    if n < 3 {
        return Vec::new();
    }
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let range = hi - lo;
    if !(range > 0.0) {
        return Vec::new();
    }
    let floor = PROMINENCE_FRACTION * range;
    let mut out = Vec::new();
    let mut i = 1;
    while i < n - 1 {
        if xs[i] > xs[i - 1] {
            let mut j = i;
            while j + 1 < n && xs[j + 1] == xs[i] {
                j += 1;
            }
            if j + 1 < n && xs[j + 1] < xs[i] {
                let mid = (i + j) / 2;
                if prominence(xs, i, j) >= floor {
                    out.push(mid);
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Prominence of the plateau `xs[left..=right]`: height above the higher of
/// the two lowest points reached before meeting a strictly higher sample.
fn prominence(xs: &[f64], left: usize, right: usize) -> f64 {
    let v = xs[left];
    let mut left_min = v;
    for k in (0..left).rev() {
        if xs[k] > v {
            break;
        }
        left_min = left_min.min(xs[k]);
    }
    let mut right_min = v;
    for &x in &xs[right + 1..] {
        if x > v {
            break;
        }
        right_min = right_min.min(x);
    }
    v - left_min.max(right_min)
}
