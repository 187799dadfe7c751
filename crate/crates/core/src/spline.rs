//! Cubic interpolation with not-a-knot end conditions.

use crate::chart::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    /// Builds the interpolant. Needs at least four strictly increasing knots.
    pub fn not_a_knot(xs: Vec<f64>, ys: Vec<f64>) -> CubicSpline {
        let n = xs.len() - 1;
        assert!(
            n >= 3 && ys.len() == xs.len(),
            "not-a-knot spline needs >= 4 knots"
        );
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(h.iter().all(|&v| v > 0.0), "knots must increase");
        let delta: Vec<f64> = (0..n).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();

        // Tridiagonal system in M_1..M_{n-1} after eliminating M_0 and M_n.
        let size = n - 1;
        let mut sub = vec![0.0; size];
        let mut diag = vec![0.0; size];
        let mut sup = vec![0.0; size];
        let mut rhs = vec![0.0; size];
        for r in 0..size {
            let i = r + 1;
            sub[r] = h[i - 1];
            diag[r] = 2.0 * (h[i - 1] + h[i]);
            sup[r] = h[i];
            rhs[r] = 6.0 * (delta[i] - delta[i - 1]);
        }
        let (h0, h1) = (h[0], h[1]);
        diag[0] += h0 * (h0 + h1) / h1;
        sup[0] -= h0 * h0 / h1;
        let (ha, hb) = (h[n - 2], h[n - 1]);
        diag[size - 1] += hb * (ha + hb) / ha;
        sub[size - 1] -= hb * hb / ha;

        let inner = thomas(&sub, &diag, &sup, &rhs);
        let mut m = vec![0.0; n + 1];
        m[1..n].copy_from_slice(&inner);
        m[0] = ((h0 + h1) * m[1] - h0 * m[2]) / h1;
        m[n] = ((ha + hb) * m[n - 1] - hb * m[n - 2]) / ha;
        CubicSpline { xs, ys, m }
    }

    pub fn knots(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    fn interval(&self, x: f64) -> usize {
        let n = self.xs.len() - 1;
        match self
            .xs
            .binary_search_by(|k| k.partial_cmp(&x).unwrap_or(std::cmp::Ordering::Less))
        {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        }
    }

    /// Evaluates the interpolant (extrapolating with the end cubics).
    pub fn eval<D: Real>(&self, x: D) -> D {
        let i = self.interval(x.re());
        let h = self.xs[i + 1] - self.xs[i];
        let (mi, mj) = (self.m[i], self.m[i + 1]);
        let b = (self.ys[i + 1] - self.ys[i]) / h - h * (2.0 * mi + mj) / 6.0;
        let t = x - self.xs[i];
        // Horner form of y_i + b t + (M_i / 2) t^2 + (M_{i+1} - M_i)/(6h) t^3.
        ((t * ((mj - mi) / (6.0 * h)) + mi / 2.0) * t + b) * t + self.ys[i]
    }
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let den = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / den;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_dual::Dual64;

    #[test]
    fn reproduces_cubics_exactly() {
        let xs: Vec<f64> = vec![0.0, 0.3, 0.7, 1.0, 1.6, 2.0];
        let f = |x: f64| 2.0 - x + 0.5 * x * x - 0.25 * x * x * x;
        let sp = CubicSpline::not_a_knot(xs.clone(), xs.iter().map(|&x| f(x)).collect());
        for i in 0..=40 {
            let x = 2.0 * i as f64 / 40.0;
            assert!((sp.eval(x) - f(x)).abs() < 1e-12);
        }
        let d = sp.eval(Dual64::new(1.3, 1.0));
        let df = -1.0 + 1.3 - 0.75 * 1.3 * 1.3;
        assert!((d.eps - df).abs() < 1e-11);
    }

    #[test]
    fn converges_fourth_order_on_smooth_data() {
        let err = |n: usize| {
            let xs: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64 * 3.0).collect();
            let sp = CubicSpline::not_a_knot(xs.clone(), xs.iter().map(|x| x.sin()).collect());
            (0..1000)
                .map(|i| {
                    let x = 3.0 * (i as f64 + 0.5) / 1000.0;
                    (sp.eval(x) - x.sin()).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(32), err(64));
        assert!(e1 / e2 > 12.0, "ratio {}", e1 / e2);
    }
}
