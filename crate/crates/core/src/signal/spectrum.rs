//! Binned magnitude-spectrum features.

use crate::stats;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Frequency bin edges in cycles per stored step.
pub const FFT_BIN_EDGES: [f64; 6] = [0.0, 0.02, 0.04, 0.06, 0.08, 0.1];

/// Forward DFT `X_k = Σ x_n e^{−2πikn/N}` of arbitrary length.
pub fn fft(input: &[Complex64]) -> Vec<Complex64> {
    let mut buf = input.to_vec();
    if buf.is_empty() {
        return buf;
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// One-sided magnitude spectrum of a real signal, `k = 0..=n/2`.
pub fn magnitude_spectrum(xs: &[f64]) -> Vec<f64> {
    let input: Vec<Complex64> = xs.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let out = fft(&input);
    out[..xs.len() / 2 + 1].iter().map(|c| c.norm()).collect()
}

/// `[mean, std, min, max]` of the max-normalized magnitude spectrum of the
/// mean-removed signal, for each of the five bins in [`FFT_BIN_EDGES`].
pub fn fft_features(xs: &[f64]) -> [f64; 20] {
    let mut out = [0.0; 20];
    let n = xs.len();
    if n < 2 {
        return out;
    }
    let m = stats::mean(xs);
    let centered: Vec<f64> = xs.iter().map(|v| v - m).collect();
    let mut mag = magnitude_spectrum(&centered);
    let peak = stats::max(&mag);
    if peak > 0.0 {
        for v in &mut mag {
            *v /= peak;
        }
    } else {
        return out;
    }
    for b in 0..5 {
        let (lo, hi) = (FFT_BIN_EDGES[b], FFT_BIN_EDGES[b + 1]);
        let vals: Vec<f64> = mag
            .iter()
            .enumerate()
            .filter(|(k, _)| {
                let f = *k as f64 / n as f64;
                f >= lo && f < hi
            })
            .map(|(_, &v)| v)
            .collect();
        if vals.is_empty() {
            continue;
        }
        out[4 * b] = stats::mean(&vals);
        out[4 * b + 1] = stats::std(&vals);
        out[4 * b + 2] = stats::min(&vals);
        out[4 * b + 3] = stats::max(&vals);
    }
    out
}
