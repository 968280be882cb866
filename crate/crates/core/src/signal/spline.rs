//! Natural cubic spline interpolation on increasing knots.

#[derive(Debug, Clone)]
pub struct NaturalSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the knots; zero at both ends.
    m: Vec<f64>,
}

impl NaturalSpline {
    /// Panics unless there are at least two strictly increasing knots.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        assert!(
            xs.len() >= 2 && xs.len() == ys.len(),
            "spline needs >= 2 matching knots"
        );
        assert!(
            xs.windows(2).all(|w| w[1] > w[0]),
            "spline knots must increase"
        );
        let n = xs.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior second derivatives.
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 0..k {
                let h0 = xs[i + 1] - xs[i];
                let h1 = xs[i + 2] - xs[i + 1];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h1 - (ys[i + 1] - ys[i]) / h0);
            }
            for i in 1..k {
                let lower = xs[i + 1] - xs[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Self { xs, ys, m }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let seg = match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let (x0, x1) = (self.xs[seg], self.xs[seg + 1]);
        let h = x1 - x0;
        let a = (x1 - x) / h;
        let b = (x - x0) / h;
        a * self.ys[seg]
            + b * self.ys[seg + 1]
            + ((a * a * a - a) * self.m[seg] + (b * b * b - b) * self.m[seg + 1]) * h * h / 6.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_knots_is_linear() {
        let s = NaturalSpline::new(vec![0.0, 10.0], vec![1.0, 3.0]);
        assert!((s.eval(5.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn interpolates_knots_and_reproduces_lines() {
        let xs: Vec<f64> = vec![0.0, 1.5, 4.0, 7.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let s = NaturalSpline::new(xs.clone(), ys.clone());
        for (x, y) in xs.iter().zip(&ys) {
            assert!((s.eval(*x) - y).abs() < 1e-12);
        }
        assert!((s.eval(5.5) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn natural_end_conditions() {
        let xs = vec![0.0, 1.0, 2.0, 3.0];
        let ys = vec![0.0, 1.0, 0.0, 1.0];
        let s = NaturalSpline::new(xs, ys);
        assert_eq!(s.m[0], 0.0);
        assert_eq!(s.m[3], 0.0);
        // symmetric data: interior curvatures equal magnitude, opposite sign
        assert!((s.m[1] + s.m[2]).abs() < 1e-12);
        assert!((s.m[1] + 4.0).abs() < 1e-12);
    }
}
