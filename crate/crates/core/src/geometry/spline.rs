use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::numerics::solve_tridiagonal;

/// Not-a-knot cubic interpolating spline. C² across knots and exact for
/// cubic data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    // second derivatives at the knots
    curvatures: Vec<f64>,
}

impl CubicSpline {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self, GeometryError> {
        let n = knots.len();
        if n != values.len() {
            return Err(GeometryError::InvalidSpline(format!(
                "{} knots but {} values",
                n,
                values.len()
            )));
        }
        if n < 4 {
            return Err(GeometryError::InvalidSpline(
                "a not-a-knot spline needs at least 4 knots".into(),
            ));
        }
        if knots.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidSpline("non-finite knot or value".into()));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GeometryError::InvalidSpline(
                "knots must be strictly increasing".into(),
            ));
        }

        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let slope: Vec<f64> = (0..n - 1).map(|i| (values[i + 1] - values[i]) / h[i]).collect();

        // Unknowns M_1..M_{n-2}; M_0 and M_{n-1} are eliminated with the
        // not-a-knot conditions (third derivative continuous at x_1, x_{n-2}).
        let m = n - 2;
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        for k in 0..m {
            let i = k + 1;
            lower[k] = h[i - 1];
            diag[k] = 2.0 * (h[i - 1] + h[i]);
            upper[k] = h[i];
            rhs[k] = 6.0 * (slope[i] - slope[i - 1]);
        }
        // M_0 = ((h0 + h1) M_1 - h0 M_2) / h1
        let (h0, h1) = (h[0], h[1]);
        diag[0] += h0 * (h0 + h1) / h1;
        if m > 1 {
            upper[0] -= h0 * h0 / h1;
        }
        // M_{n-1} = ((ha + hb) M_{n-2} - hb M_{n-3}) / ha with ha = h[n-3], hb = h[n-2]
        let (ha, hb) = (h[n - 3], h[n - 2]);
        diag[m - 1] += hb * (ha + hb) / ha;
        if m > 1 {
            lower[m - 1] -= hb * hb / ha;
        }
        let inner = solve_tridiagonal(&lower, &diag, &upper, &rhs).ok_or_else(|| {
            GeometryError::InvalidSpline("singular spline system".into())
        })?;

        let mut curvatures = Vec::with_capacity(n);
        let m1 = inner[0];
        let m2 = if m > 1 { inner[1] } else { inner[0] };
        curvatures.push(((h0 + h1) * m1 - h0 * m2) / h1);
        curvatures.extend_from_slice(&inner);
        let mb = inner[m - 1];
        let ma = if m > 1 { inner[m - 2] } else { inner[m - 1] };
        curvatures.push(((ha + hb) * mb - hb * ma) / ha);

        Ok(CubicSpline {
            knots,
            values,
            curvatures,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.knots.len();
        match self.knots.binary_search_by(|k| k.total_cmp(&x)) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    /// Value and first three derivatives at `x`. Outside the knot range the
    /// end polynomials are continued.
    pub fn eval(&self, x: f64) -> [f64; 4] {
        let i = self.segment(x);
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.curvatures[i], self.curvatures[i + 1]);
        let h = x1 - x0;
        let a = (x1 - x) / h;
        let b = (x - x0) / h;
        let value = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d1 = (y1 - y0) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0 + (3.0 * b * b - 1.0) * h * m1 / 6.0;
        let d2 = a * m0 + b * m1;
        let d3 = (m1 - m0) / h;
        [value, d1, d2, d3]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubic_exactly() {
        let f = |x: f64| 1.0 + x - 2.0 * x * x + 0.5 * x * x * x;
        let knots: Vec<f64> = (0..9).map(|i| 0.3 * i as f64 + 0.05 * (i % 2) as f64).collect();
        let values: Vec<f64> = knots.iter().map(|&x| f(x)).collect();
        let s = CubicSpline::new(knots, values).unwrap();
        for &x in &[0.0, 0.17, 0.9, 1.33, 2.4] {
            let [v, d1, d2, d3] = s.eval(x);
            assert!((v - f(x)).abs() < 1e-12, "value at {x}");
            assert!((d1 - (1.0 - 4.0 * x + 1.5 * x * x)).abs() < 1e-11);
            assert!((d2 - (-4.0 + 3.0 * x)).abs() < 1e-10);
            assert!((d3 - 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn second_derivative_is_continuous_across_knots() {
        let knots: Vec<f64> = (0..12).map(|i| i as f64 * 0.25).collect();
        let values: Vec<f64> = knots.iter().map(|x| x.sin()).collect();
        let s = CubicSpline::new(knots.clone(), values).unwrap();
        for &k in &knots[1..knots.len() - 1] {
            let left = s.eval(k - 1e-9);
            let right = s.eval(k + 1e-9);
            assert!((left[2] - right[2]).abs() < 1e-6);
            assert!((left[1] - right[1]).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(CubicSpline::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 2.0]).is_err());
        assert!(CubicSpline::new(vec![0.0, 1.0, 1.0, 2.0], vec![0.0; 4]).is_err());
        assert!(CubicSpline::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.0; 3]).is_err());
    }
}
