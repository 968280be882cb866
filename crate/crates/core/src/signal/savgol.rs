//! Savitzky-Golay smoothing via Gram polynomials.
//!
//! Weights for every evaluation offset in the window are precomputed, so
//! the first and last half-windows are smoothed by evaluating the fitted
//! polynomial of the edge window off-center instead of padding.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SavgolError {
    #[error("window length {0} must be odd and at least 3")]
    BadWindow(usize),
    #[error("polynomial order {order} must be below window length {window}")]
    OrderTooHigh { order: usize, window: usize },
    #[error("signal of length {len} is shorter than the window {window}")]
    TooShort { len: usize, window: usize },
}

#[derive(Debug, Clone)]
pub struct SavitzkyGolay {
    half: usize,
    /// `weights[t][i]`: weight of sample `i` when evaluating at offset `t - half`.
    weights: Vec<Vec<f64>>,
}

/// Gram polynomial values `P_k(i)` for `i` in `-m..=m`, `k` in `0..=order`.
fn gram_table(m: usize, order: usize) -> Vec<Vec<f64>> {
    let mf = m as f64;
    let n = 2 * m + 1;
    let mut p = vec![vec![0.0; n]; order + 1];
    for i in 0..n {
        p[0][i] = 1.0;
    }
    for k in 1..=order {
        let kf = k as f64;
        let a = (4.0 * kf - 2.0) / (kf * (2.0 * mf - kf + 1.0));
        let b = ((kf - 1.0) * (2.0 * mf + kf)) / (kf * (2.0 * mf - kf + 1.0));
        for i in 0..n {
            let x = i as f64 - mf;
            let prev2 = if k >= 2 { p[k - 2][i] } else { 0.0 };
            p[k][i] = a * x * p[k - 1][i] - b * prev2;
        }
    }
    p
}

/// Generalized factorial `a·(a−1)·…·(a−b+1)`.
fn gen_fact(a: usize, b: usize) -> f64 {
    ((a + 1 - b)..=a).map(|j| j as f64).product()
}

impl SavitzkyGolay {
    pub fn new(window: usize, order: usize) -> Result<Self, SavgolError> {
        if window < 3 || window.is_multiple_of(2) {
            return Err(SavgolError::BadWindow(window));
        }
        if order >= window {
            return Err(SavgolError::OrderTooHigh { order, window });
        }
        let m = window / 2;
        let p = gram_table(m, order);
        let norm: Vec<f64> = (0..=order)
            .map(|k| (2 * k + 1) as f64 * gen_fact(2 * m, k) / gen_fact(2 * m + k + 1, k + 1))
            .collect();
        let weights = (0..window)
            .map(|t| {
                (0..window)
                    .map(|i| (0..=order).map(|k| norm[k] * p[k][i] * p[k][t]).sum())
                    .collect()
            })
            .collect();
        Ok(Self { half: m, weights })
    }

    pub fn window(&self) -> usize {
        2 * self.half + 1
    }

    /// Weights applied to a window when evaluating at `offset` from its center.
    pub fn weights_at(&self, offset: isize) -> &[f64] {
        &self.weights[(offset + self.half as isize) as usize]
    }

    pub fn smooth(&self, xs: &[f64]) -> Result<Vec<f64>, SavgolError> {
        let w = self.window();
        let m = self.half;
        let n = xs.len();
        if n < w {
            return Err(SavgolError::TooShort { len: n, window: w });
        }
        let dot = |wts: &[f64], start: usize| {
            wts.iter()
                .zip(&xs[start..start + w])
                .map(|(a, b)| a * b)
                .sum::<f64>()
        };
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let v = if i < m {
                dot(&self.weights[i], 0)
            } else if i + m >= n {
                dot(&self.weights[i + w - n], n - w)
            } else {
                dot(&self.weights[m], i - m)
            };
            out.push(v);
        }
        Ok(out)
    }
}
