//! The spatially averaged time signal and the features derived from it.
//!
//! Pipeline: [`delta_signal`] → [`prepare_signal`] (min-max + Savitzky-Golay)
//! → [`stats_features`], [`envelopes`] + [`amplitude_features`],
//! [`fft_features`]. Windows such as `50..450` are half-open indices into
//! the prepared signal.

mod extrema;
mod savgol;
mod spectrum;
mod spline;

pub use extrema::{find_extrema, PROMINENCE_FRACTION};
pub use savgol::{SavgolError, SavitzkyGolay};
pub use spectrum::{fft, fft_features, magnitude_spectrum, FFT_BIN_EDGES};
pub use spline::NaturalSpline;

use crate::stats;
use crate::types::GridField;
use thiserror::Error;

pub const SMOOTH_WINDOW: usize = 21;
pub const SMOOTH_ORDER: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("signal of length {len} is shorter than the {min}-sample smoothing window")]
    TooShort { len: usize, min: usize },
    #[error("signal of length {len} does not cover feature windows ending at {needed}")]
    WindowOutOfRange { len: usize, needed: usize },
}

/// Mean change between consecutive frames, `values[t] = mean(u[t+1] − u[t])`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    pub values: Vec<f64>,
    pub t0_index: usize,
}

impl TimeSignal {
    pub fn new(values: Vec<f64>) -> Self {
        Self {
            values,
            t0_index: 0,
        }
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn delta_signal(field: &GridField) -> TimeSignal {
    let n = (field.ny() * field.nx()) as f64;
    let values = (0..field.nt() - 1)
        .map(|t| {
            let a = field.frame(t);
            let b = field.frame(t + 1);
            b.iter().zip(a).map(|(x, y)| x - y).sum::<f64>() / n
        })
        .collect();
    TimeSignal::new(values)
}

/// Min-max normalizes to `[0, 1]` (an all-equal signal becomes zeros), then
/// applies the window-21, order-3 Savitzky-Golay filter.
pub fn prepare_signal(sig: &TimeSignal) -> Result<TimeSignal, SignalError> {
    if sig.len() < SMOOTH_WINDOW {
        return Err(SignalError::TooShort {
            len: sig.len(),
            min: SMOOTH_WINDOW,
        });
    }
    let lo = stats::min(&sig.values);
    let hi = stats::max(&sig.values);
    let normalized: Vec<f64> = if hi > lo {
        sig.values.iter().map(|v| (v - lo) / (hi - lo)).collect()
    } else {
        vec![0.0; sig.len()]
    };
    let sg =
        SavitzkyGolay::new(SMOOTH_WINDOW, SMOOTH_ORDER).expect("fixed filter parameters are valid");
    let values = sg.smooth(&normalized).expect("length checked above");
    Ok(TimeSignal {
        values,
        t0_index: sig.t0_index,
    })
}

fn window(xs: &[f64], start: usize, end: usize) -> Result<&[f64], SignalError> {
    xs.get(start..end).ok_or(SignalError::WindowOutOfRange {
        len: xs.len(),
        needed: end,
    })
}

/// `[mean, std] over 50..450`, `[min, max, mean, std] over 350..450`, `skew over 50..450`.
pub fn stats_features(sig: &TimeSignal) -> Result<[f64; 7], SignalError> {
    let wide = window(&sig.values, 50, 450)?;
    let late = window(&sig.values, 350, 450)?;
    Ok([
        stats::mean(wide),
        stats::std(wide),
        stats::min(late),
        stats::max(late),
        stats::mean(late),
        stats::std(late),
        stats::skew(wide),
    ])
}

/// Upper and lower spline envelopes and their clipped difference.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopePair {
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub peaks: Vec<usize>,
    pub valleys: Vec<usize>,
}

/// Natural cubic splines through the peaks (valleys) plus both end samples.
/// With no extrema on one side that envelope is the chord between the end
/// samples.
pub fn envelopes(sig: &TimeSignal) -> EnvelopePair {
    let xs = &sig.values;
    let n = xs.len();
    let (peaks, valleys) = find_extrema(xs);
    let curve = |knots: &[usize]| -> Vec<f64> {
        match n {
            0 => Vec::new(),
            1 => xs.clone(),
            _ => {
                let mut idx = Vec::with_capacity(knots.len() + 2);
                idx.push(0);
                idx.extend(knots.iter().copied().filter(|&k| k > 0 && k < n - 1));
                idx.push(n - 1);
                let kx = idx.iter().map(|&i| i as f64).collect();
                let ky = idx.iter().map(|&i| xs[i]).collect();
                let s = NaturalSpline::new(kx, ky);
                (0..n).map(|i| s.eval(i as f64)).collect()
            }
        }
    };
    let mut upper = curve(&peaks);
    let mut lower = curve(&valleys);
    // spline overshoot can cut through the signal at an extremum of the other kind
    for &i in peaks.iter().chain(&valleys) {
        upper[i] = upper[i].max(xs[i]);
        lower[i] = lower[i].min(xs[i]);
    }
    let amplitude = upper
        .iter()
        .zip(&lower)
        .map(|(u, l)| (u - l).max(0.0))
        .collect();
    EnvelopePair {
        upper,
        lower,
        amplitude,
        peaks,
        valleys,
    }
}

/// Eleven amplitude features; ratio features are 0 when their denominator is 0.
pub fn amplitude_features(env: &EnvelopePair) -> Result<[f64; 11], SignalError> {
    let a = &env.amplitude;
    let wide = window(a, 50, 450)?;
    let late = window(a, 350, 450)?;
    let second = window(a, 250, 450)?;
    let first = window(a, 50, 250)?;
    let n = a.len() as f64;
    Ok([
        stats::max(wide),
        stats::argmax(wide) as f64 / n,
        stats::mean(late),
        stats::std(late),
        stats::skew(late),
        stats::mean(second),
        stats::std(second),
        env.peaks.len() as f64,
        env.valleys.len() as f64,
        stats::safe_ratio(stats::mean(second), stats::mean(first)),
        stats::safe_ratio(stats::max(second), stats::max(first)),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(values: Vec<f64>) -> TimeSignal {
        TimeSignal::new(values)
    }

    #[test]
    fn delta_of_constant_and_ramp() {
        let still = GridField::from_fn(5, 3, 4, 1.0, |_, y, x| (y * x) as f64).unwrap();
        assert!(delta_signal(&still).values.iter().all(|&v| v == 0.0));
        let ramp = GridField::from_fn(5, 3, 4, 1.0, |t, _, _| t as f64).unwrap();
        assert_eq!(delta_signal(&ramp).values, vec![1.0; 4]);
    }

    #[test]
    fn prepare_keeps_cubics() {
        let raw: Vec<f64> = (0..499)
            .map(|t| {
                let x = t as f64 / 498.0;
                2.0 * x * x * x - x * x + 0.3 * x
            })
            .collect();
        let lo = stats::min(&raw);
        let hi = stats::max(&raw);
        let out = prepare_signal(&sig(raw.clone())).unwrap();
        for (a, b) in raw.iter().zip(&out.values) {
            assert!(((a - lo) / (hi - lo) - b).abs() < 1e-10);
        }
    }

    #[test]
    fn prepare_zero_and_short() {
        let out = prepare_signal(&sig(vec![0.0; 499])).unwrap();
        assert!(out.values.iter().all(|&v| v == 0.0));
        assert_eq!(
            prepare_signal(&sig(vec![1.0; 20])),
            Err(SignalError::TooShort { len: 20, min: 21 })
        );
    }

    #[test]
    fn stats_of_constant_and_zero() {
        assert_eq!(stats_features(&sig(vec![0.0; 499])).unwrap(), [0.0; 7]);
        assert_eq!(
            stats_features(&sig(vec![0.5; 499])).unwrap(),
            [0.5, 0.0, 0.5, 0.5, 0.5, 0.0, 0.0]
        );
        assert!(matches!(
            stats_features(&sig(vec![0.0; 449])),
            Err(SignalError::WindowOutOfRange { .. })
        ));
    }

    #[test]
    fn stats_of_ramp_match_window_oracle() {
        let values: Vec<f64> = (0..499).map(|t| t as f64 / 498.0).collect();
        let f = stats_features(&sig(values)).unwrap();
        // brute force over the index windows
        let mean_wide = (50..450).map(|t| t as f64 / 498.0).sum::<f64>() / 400.0;
        assert!((f[0] - mean_wide).abs() < 1e-12);
        assert!((mean_wide - 249.5 / 498.0).abs() < 1e-12);
        let var_wide = (50..450)
            .map(|t| (t as f64 / 498.0 - mean_wide).powi(2))
            .sum::<f64>()
            / 400.0;
        assert!((f[1] - var_wide.sqrt()).abs() < 1e-12);
        assert!((f[2] - 350.0 / 498.0).abs() < 1e-15);
        assert!((f[3] - 449.0 / 498.0).abs() < 1e-15);
        assert!((f[4] - 399.5 / 498.0).abs() < 1e-12);
        assert!(f[6].abs() < 1e-10);
    }

    #[test]
    fn envelope_of_decaying_oscillation() {
        let values: Vec<f64> = (0..499)
            .map(|t| {
                let t = t as f64;
                (-t / 100.0).exp() * (t / 5.0).sin()
            })
            .collect();
        let env = envelopes(&sig(values.clone()));
        let expected = 2.0 * (-3.0f64).exp();
        assert!(
            (env.amplitude[300] - expected).abs() < 0.1 * expected,
            "{} vs {}",
            env.amplitude[300],
            expected
        );
        for &p in &env.peaks {
            assert_eq!(env.upper[p], values[p]);
            assert!(env.lower[p] <= values[p]);
        }
        for &v in &env.valleys {
            assert_eq!(env.lower[v], values[v]);
            assert!(env.upper[v] >= values[v]);
        }
    }

    #[test]
    fn envelope_degenerate_cases() {
        let mono: Vec<f64> = (0..100).map(|t| (t as f64 / 99.0).powi(2)).collect();
        let env = envelopes(&sig(mono));
        assert!(env.amplitude.iter().all(|&a| a == 0.0));
        let flat = envelopes(&sig(vec![0.3; 50]));
        assert!(flat
            .upper
            .iter()
            .chain(&flat.lower)
            .all(|&v| (v - 0.3).abs() < 1e-15));
        assert!(flat.amplitude.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn amplitude_features_degenerate_and_constant() {
        let zero = EnvelopePair {
            upper: vec![0.0; 499],
            lower: vec![0.0; 499],
            amplitude: vec![0.0; 499],
            peaks: vec![],
            valleys: vec![],
        };
        let f = amplitude_features(&zero).unwrap();
        assert_eq!(f[0], 0.0);
        assert_eq!(f[9], 0.0);
        assert_eq!(f[10], 0.0);
        let one = EnvelopePair {
            amplitude: vec![1.0; 499],
            ..zero
        };
        let f = amplitude_features(&one).unwrap();
        assert_eq!((f[0], f[3], f[4], f[9], f[10]), (1.0, 0.0, 0.0, 1.0, 1.0));
    }

    #[test]
    fn fft_zero_signal() {
        assert_eq!(fft_features(&[0.0; 499]), [0.0; 20]);
    }

    #[test]
    fn fft_tone_lands_in_third_bin() {
        let xs: Vec<f64> = (0..499)
            .map(|t| (2.0 * std::f64::consts::PI * 0.05 * t as f64).cos())
            .collect();
        let f = fft_features(&xs);
        assert!((f[11] - 1.0).abs() < 1e-12);
        for b in [0, 1, 3, 4] {
            assert!(f[4 * b + 3] < 0.05, "bin {} max {}", b + 1, f[4 * b + 3]);
        }
    }

    #[test]
    fn fft_ignores_offsets() {
        let xs: Vec<f64> = (0..499)
            .map(|t| ((t * 7919) % 101) as f64 / 101.0)
            .collect();
        let shifted: Vec<f64> = xs.iter().map(|v| v + 3.5).collect();
        let a = fft_features(&xs);
        let b = fft_features(&shifted);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
