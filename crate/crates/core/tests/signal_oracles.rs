use nalgebra::{DMatrix, DVector};
use pdeid_core::signal::{
    delta_signal, envelopes, fft, fft_features, find_extrema, prepare_signal, stats_features,
    SavitzkyGolay, TimeSignal,
};
use pdeid_core::GridField;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

/// Least-squares cubic over each (edge-clamped) window, evaluated at the
/// target index; solved by SVD on a scaled Vandermonde matrix.
fn savgol_oracle(xs: &[f64], window: usize, order: usize) -> Vec<f64> {
    let n = xs.len();
    let m = window / 2;
    (0..n)
        .map(|i| {
            let start = i.saturating_sub(m).min(n - window);
            let center = (start + m) as f64;
            let v = DMatrix::from_fn(window, order + 1, |r, k| {
                (((start + r) as f64 - center) / m as f64).powi(k as i32)
            });
            let y = DVector::from_iterator(window, xs[start..start + window].iter().copied());
            let coef = v.svd(true, true).solve(&y, 1e-14).unwrap();
            let s = (i as f64 - center) / m as f64;
            (0..=order).map(|k| coef[k] * s.powi(k as i32)).sum()
        })
        .collect()
}

fn normal_equation_fit(xs: &[f64], window: usize, order: usize) -> Vec<f64> {
    let n = xs.len();
    let m = window / 2;
    (0..n)
        .map(|i| {
            let start = i.saturating_sub(m).min(n - window);
            let center = (start + m) as f64;
            let v = DMatrix::from_fn(window, order + 1, |r, k| {
                (((start + r) as f64 - center) / m as f64).powi(k as i32)
            });
            let y = DVector::from_iterator(window, xs[start..start + window].iter().copied());
            let coef = (v.transpose() * &v)
                .lu()
                .solve(&(v.transpose() * y))
                .unwrap();
            let s = (i as f64 - center) / m as f64;
            (0..=order).map(|k| coef[k] * s.powi(k as i32)).sum()
        })
        .collect()
}

#[test]
fn savgol_matches_least_squares_on_random_signals() {
    let sg = SavitzkyGolay::new(21, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..100 {
        let n = 21 + rng.random_range(0..480);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = sg.smooth(&xs).unwrap();
        let want = normal_equation_fit(&xs, 21, 3);
        let err = got
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-10, "trial {trial} n={n}: {err:e}");
    }
}

#[test]
fn savgol_center_weights_match_oracle() {
    // weights are the filter's response to unit impulses
    let sg = SavitzkyGolay::new(21, 3).unwrap();
    for j in 0..21 {
        let mut e = vec![0.0; 21];
        e[j] = 1.0;
        let oracle = savgol_oracle(&e, 21, 3);
        assert!((sg.weights_at(0)[j] - oracle[10]).abs() <= 1e-12);
        for (off, o) in oracle.iter().enumerate() {
            assert!((sg.weights_at(off as isize - 10)[j] - o).abs() <= 1e-12);
        }
    }
}

#[test]
fn prepare_reproduces_cubics() {
    let raw: Vec<f64> = (0..499)
        .map(|t| {
            let x = t as f64 / 100.0;
            0.3 * x * x * x - 2.0 * x * x + x + 4.0
        })
        .collect();
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let out = prepare_signal(&TimeSignal::new(raw.clone())).unwrap();
    for (o, r) in out.values.iter().zip(&raw) {
        assert!((o - (r - lo) / (hi - lo)).abs() <= 1e-10);
    }
}

fn naive_dft(xs: &[Complex64]) -> Vec<Complex64> {
    let n = xs.len();
    (0..n)
        .map(|k| {
            xs.iter()
                .enumerate()
                .map(|(j, &x)| {
                    let ang = -2.0 * std::f64::consts::PI * ((k * j) % n) as f64 / n as f64;
                    x * Complex64::new(ang.cos(), ang.sin())
                })
                .sum()
        })
        .collect()
}

#[test]
fn fft_matches_naive_dft() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [8, 100, 499] {
        for _ in 0..5 {
            let xs: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let a = fft(&xs);
            let b = naive_dft(&xs);
            let scale = b.iter().map(|c| c.norm()).fold(0.0, f64::max);
            let err = a
                .iter()
                .zip(&b)
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            assert!(err / scale <= 1e-9, "n={n}: {:e}", err / scale);
        }
    }
}

#[test]
fn white_noise_bins_are_comparable() {
    let mut means = [0.0; 5];
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..499).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = fft_features(&xs);
        for b in 0..5 {
            means[b] += f[4 * b] / 100.0;
        }
    }
    let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = means.iter().copied().fold(0.0, f64::max);
    assert!(hi <= 3.0 * lo, "{means:?}");
}

#[test]
fn delta_signal_matches_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let f = GridField::from_fn(4, 3, 3, 1.0, |_, _, _| rng.random_range(-1.0..1.0)).unwrap();
    let sig = delta_signal(&f);
    assert_eq!(sig.len(), 3);
    for t in 0..3 {
        let mut s = 0.0;
        for y in 0..3 {
            for x in 0..3 {
                s += f.at(t + 1, y, x) - f.at(t, y, x);
            }
        }
        assert!((sig.values[t] - s / 9.0).abs() < 1e-15);
    }
}

#[test]
fn stats_of_ramp_match_window_averages() {
    let xs: Vec<f64> = (0..499).map(|t| t as f64 / 498.0).collect();
    let s = stats_features(&TimeSignal::new(xs.clone())).unwrap();
    let mean_wide: f64 = xs[50..450].iter().sum::<f64>() / 400.0;
    let mean_late: f64 = xs[350..450].iter().sum::<f64>() / 100.0;
    assert!((s[0] - mean_wide).abs() < 1e-12);
    assert!((s[2] - xs[350]).abs() < 1e-15 && (s[3] - xs[449]).abs() < 1e-15);
    assert!((s[4] - mean_late).abs() < 1e-12);
    assert!(s[6].abs() < 1e-9);
    assert_eq!(
        stats_features(&TimeSignal::new(vec![0.5; 499])).unwrap(),
        [0.5, 0.0, 0.5, 0.5, 0.5, 0.0, 0.0]
    );
}

#[test]
fn five_period_sine_has_five_peaks_and_valleys() {
    let xs: Vec<f64> = (0..499)
        .map(|t| (2.0 * std::f64::consts::PI * 5.0 * t as f64 / 499.0).sin())
        .collect();
    let (p, v) = find_extrema(&xs);
    assert_eq!((p.len(), v.len()), (5, 5));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn delta_signal_is_linear(
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        seed in 0u64..1000,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = GridField::from_fn(6, 4, 5, 1.0, |_, _, _| rng.random_range(-1.0..1.0)).unwrap();
        let g = GridField::from_fn(6, 4, 5, 1.0, |_, _, _| rng.random_range(-1.0..1.0)).unwrap();
        let combo = GridField::new(
            f.values().iter().zip(g.values()).map(|(x, y)| a * x + b * y).collect(), 6, 4, 5, 1.0,
        ).unwrap();
        let (df, dg, dc) = (delta_signal(&f), delta_signal(&g), delta_signal(&combo));
        for t in 0..5 {
            prop_assert!((dc.values[t] - (a * df.values[t] + b * dg.values[t])).abs() < 1e-12);
        }
    }

    #[test]
    fn smooth_inputs_stay_within_overshoot_bound(
        amp in 0.5f64..5.0,
        periods in 0.5f64..6.0,
        phase in 0.0f64..6.3,
        decay in 0.0f64..0.01,
    ) {
        let xs: Vec<f64> = (0..499)
            .map(|t| amp * (-decay * t as f64).exp() * (2.0 * std::f64::consts::PI * periods * t as f64 / 499.0 + phase).sin())
            .collect();
        let out = prepare_signal(&TimeSignal::new(xs)).unwrap();
        prop_assert!(out.values.iter().all(|&v| (-0.05..=1.05).contains(&v)));
    }

    #[test]
    fn envelopes_bracket_extrema(
        periods in 1.0f64..12.0,
        decay in 0.0f64..0.01,
        trend in -0.002f64..0.002,
    ) {
        let xs: Vec<f64> = (0..499)
            .map(|t| (-decay * t as f64).exp() * (2.0 * std::f64::consts::PI * periods * t as f64 / 499.0).sin() + trend * t as f64)
            .collect();
        let env = envelopes(&TimeSignal::new(xs.clone()));
        for &i in env.peaks.iter().chain(&env.valleys) {
            prop_assert!(env.upper[i] >= xs[i] && xs[i] >= env.lower[i], "envelopes miss signal at {}", i);
        }
        for &p in &env.peaks {
            prop_assert_eq!(env.upper[p], xs[p]);
        }
        for &v in &env.valleys {
            prop_assert_eq!(env.lower[v], xs[v]);
        }
        prop_assert!(env.amplitude.iter().all(|&a| a >= 0.0));
    }

    #[test]
    fn fft_features_ignore_offsets(
        xs in proptest::collection::vec(-1.0f64..1.0, 50..499),
        offset in -100.0f64..100.0,
    ) {
        let shifted: Vec<f64> = xs.iter().map(|v| v + offset).collect();
        let a = fft_features(&xs);
        let b = fft_features(&shifted);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }
}
