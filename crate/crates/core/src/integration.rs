//! Deterministic tensor-product quadrature over chart domains.
//!
//! Non-periodic coordinates use composite Gauss-Legendre (open, so poles are
//! never sampled); periodic ones use the trapezoid rule. Half-infinite and
//! infinite coordinates are mapped through `x = lo + tan(u)`. Each integral is
//! computed at several refinement levels and the last difference is reported
//! as the error estimate.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart::{Chart, Geometry, Interval, Point};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum AxisRule {
    /// Composite Gauss-Legendre with `panels` equal panels of `order` nodes.
    Gauss { order: usize, panels: usize },
    /// Equally spaced trapezoid rule for periodic coordinates.
    Trapezoid { points: usize },
}

impl AxisRule {
    fn refined(self, level: usize) -> AxisRule {
        let f = 1usize << level;
        match self {
            AxisRule::Gauss { order, panels } => AxisRule::Gauss {
                order,
                panels: panels * f,
            },
            AxisRule::Trapezoid { points } => AxisRule::Trapezoid { points: points * f },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub axes: [AxisRule; 3],
    /// Map unbounded coordinates through `x = lo + tan(u)`.
    #[serde(default = "yes")]
    pub tail_transform: bool,
    /// Number of refinement levels (panel counts double between levels).
    #[serde(default = "two")]
    pub richardson_levels: usize,
}

fn yes() -> bool {
    true
}

fn two() -> usize {
    2
}

/// Result of a refined quadrature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub levels: Vec<f64>,
}

impl QuadratureSpec {
    /// Default rule for a chart: 16-point Gauss on 4 panels, 16-point trapezoid.
    pub fn for_chart(chart: &Chart) -> QuadratureSpec {
        QuadratureSpec::with_resolution(chart, 16, 4, 16)
    }

    pub fn with_resolution(
        chart: &Chart,
        order: usize,
        panels: usize,
        points: usize,
    ) -> QuadratureSpec {
        let axes = std::array::from_fn(|c| {
            if chart.periodic[c].is_some() {
                AxisRule::Trapezoid { points }
            } else {
                AxisRule::Gauss { order, panels }
            }
        });
        QuadratureSpec {
            axes,
            tail_transform: true,
            richardson_levels: 2,
        }
    }

    pub fn levels(mut self, levels: usize) -> QuadratureSpec {
        self.richardson_levels = levels.max(1);
        self
    }

    /// The rule at refinement `level` (0 is the base rule).
    pub fn refined(&self, level: usize) -> QuadratureSpec {
        QuadratureSpec {
            axes: self.axes.map(|a| a.refined(level)),
            tail_transform: self.tail_transform,
            richardson_levels: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for a in &self.axes {
            match a {
                AxisRule::Gauss { order, panels } if *order < 8 || *panels == 0 => {
                    return Err(Error::Config(format!(
                        "gauss order must be >= 8 and panels >= 1 (got order {order}, panels {panels})"
                    )))
                }
                AxisRule::Trapezoid { points } if *points < 8 => {
                    return Err(Error::Config(format!("trapezoid points must be >= 8 (got {points})")))
                }
                _ => {}
            }
        }
        if self.richardson_levels == 0 {
            return Err(Error::Config("richardson_levels must be >= 1".into()));
        }
        Ok(())
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss nodes on a finite interval.
pub fn composite_gauss(lo: f64, hi: f64, order: usize, panels: usize) -> Vec<(f64, f64)> {
    let (xs, ws) = gauss_legendre(order);
    let h = (hi - lo) / panels as f64;
    let mut out = Vec::with_capacity(order * panels);
    for p in 0..panels {
        let a = lo + p as f64 * h;
        for (x, w) in xs.iter().zip(&ws) {
            out.push((a + 0.5 * h * (x + 1.0), 0.5 * h * w));
        }
    }
    out
}

/// Nodes and weights for one coordinate axis.
pub fn axis_nodes(
    domain: Interval,
    periodic: Option<f64>,
    rule: AxisRule,
    tail: bool,
) -> Result<Vec<(f64, f64)>> {
    match (rule, periodic) {
        (AxisRule::Trapezoid { points }, Some(period)) => {
            let h = period / points as f64;
            Ok((0..points).map(|i| (domain.lo + i as f64 * h, h)).collect())
        }
        (AxisRule::Trapezoid { .. }, None) => Err(Error::Config(
            "trapezoid rule requires a periodic coordinate".into(),
        )),
        (AxisRule::Gauss { order, panels }, _) => {
            if domain.is_finite() {
                return Ok(composite_gauss(domain.lo, domain.hi, order, panels));
            }
            if !tail {
                return Err(Error::Config(
                    "unbounded coordinate needs the tan tail transform".into(),
                ));
            }
            let (ulo, uhi, shift) = match (domain.lo.is_finite(), domain.hi.is_finite()) {
                (true, false) => (0.0, FRAC_PI_2, domain.lo),
                (false, true) => (-FRAC_PI_2, 0.0, domain.hi),
                _ => (-FRAC_PI_2, FRAC_PI_2, 0.0),
            };
            Ok(composite_gauss(ulo, uhi, order, panels)
                .into_iter()
                .map(|(u, w)| {
                    let c = u.cos();
                    (shift + u.tan(), w / (c * c))
                })
                .collect())
        }
    }
}

/// Pairwise summation in a fixed order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// One pass of the tensor-product rule for a coordinate integrand (no volume density).
pub fn integrate_coordinates_once<F>(chart: &Chart, spec: &QuadratureSpec, f: &F) -> Result<f64>
where
    F: Fn(&Point) -> Result<f64> + Sync,
{
    let axes: Vec<Vec<(f64, f64)>> = (0..3)
        .map(|c| {
            axis_nodes(
                chart.domain[c],
                chart.periodic[c],
                spec.axes[c],
                spec.tail_transform,
            )
        })
        .collect::<Result<_>>()?;
    let (n0, n1, n2) = (axes[0].len(), axes[1].len(), axes[2].len());
    let terms: Vec<f64> = (0..n0 * n1 * n2)
        .into_par_iter()
        .map(|idx| {
            let (i, rest) = (idx / (n1 * n2), idx % (n1 * n2));
            let (j, k) = (rest / n2, rest % n2);
            let x = [axes[0][i].0, axes[1][j].0, axes[2][k].0];
            let w = axes[0][i].1 * axes[1][j].1 * axes[2][k].1;
            f(&x).map(|v| v * w)
        })
        .collect::<Result<_>>()?;
    Ok(pairwise_sum(&terms))
}

/// Refined integral of a coordinate integrand (no volume density).
pub fn integrate_coordinates<F>(chart: &Chart, spec: &QuadratureSpec, f: F) -> Result<Integral>
where
    F: Fn(&Point) -> Result<f64> + Sync,
{
    spec.validate()?;
    let mut levels = Vec::with_capacity(spec.richardson_levels);
    for l in 0..spec.richardson_levels {
        levels.push(integrate_coordinates_once(chart, &spec.refined(l), &f)?);
    }
    finish(levels)
}

/// `∫ density ν_g` over the chart.
pub fn integrate<F>(density: F, geometry: &Geometry, spec: &QuadratureSpec) -> Result<Integral>
where
    F: Fn(&Point) -> Result<f64> + Sync,
{
    integrate_coordinates(&geometry.chart, spec, |x| {
        Ok(density(x)? * geometry.volume_density(x)?)
    })
}

fn finish(levels: Vec<f64>) -> Result<Integral> {
    if levels.iter().any(|v| !v.is_finite()) {
        return Err(Error::QuadratureDivergence { levels });
    }
    let n = levels.len();
    let value = levels[n - 1];
    let error = if n >= 2 {
        (levels[n - 1] - levels[n - 2]).abs()
    } else {
        f64::NAN
    };
    if n >= 3 {
        let scale = value.abs().max(1.0);
        for w in levels.windows(3) {
            let d_prev = (w[1] - w[0]).abs();
            let d_next = (w[2] - w[1]).abs();
            if d_next > 1.1 * d_prev && d_next > 1e-10 * scale {
                return Err(Error::QuadratureDivergence { levels });
            }
        }
    }
    Ok(Integral {
        value,
        error,
        levels,
    })
}

/// Composite Gauss integral of a function of one variable on `[lo, hi]`
/// (unbounded ends are mapped through `tan`).
pub fn integrate_1d<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, order: usize, panels: usize) -> f64 {
    let nodes = axis_nodes(
        Interval::new(lo, hi),
        None,
        AxisRule::Gauss { order, panels },
        true,
    )
    .expect("gauss nodes on an interval");
    let terms: Vec<f64> = nodes.iter().map(|(x, w)| f(*x) * w).collect();
    pairwise_sum(&terms)
}

/// Refined 1-D integral with an error estimate.
pub fn integrate_1d_refined<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    order: usize,
    panels: usize,
    levels: usize,
) -> Result<Integral> {
    let vals = (0..levels.max(1))
        .map(|l| integrate_1d(&f, lo, hi, order, panels << l))
        .collect();
    finish(vals)
}

/// Running integrals `∫_{grid[0]}^{grid[i]} f` with a Gauss rule on each cell.
pub fn cumulative_1d<F: Fn(f64) -> f64>(f: F, grid: &[f64], order: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in grid.windows(2) {
        acc += integrate_1d(&f, w[0], w[1], order, 1);
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::MetricSpec;

    #[test]
    fn gauss_integrates_polynomials_exactly() {
        for n in [1, 2, 5, 8, 16, 33] {
            let (x, w) = gauss_legendre(n);
            let total: f64 = w.iter().sum();
            assert!((total - 2.0).abs() < 1e-14, "n = {n}");
            let deg = 2 * n - 1;
            let approx: f64 = x
                .iter()
                .zip(&w)
                .map(|(x, w)| w * x.powi(deg as i32 - 1))
                .sum();
            let exact = if (deg - 1) % 2 == 0 {
                2.0 / deg as f64
            } else {
                0.0
            };
            assert!((approx - exact).abs() < 1e-13, "n = {n}");
        }
    }

    #[test]
    fn nodes_are_sorted_and_open() {
        let (x, _) = gauss_legendre(16);
        assert!(x.windows(2).all(|w| w[0] < w[1]));
        assert!(x[0] > -1.0 && x[15] < 1.0);
    }

    #[test]
    fn round_s3_volume() {
        let geo = Geometry::s3(MetricSpec::S3Round);
        let spec = QuadratureSpec::for_chart(&geo.chart);
        let v = integrate(|_| Ok(1.0), &geo, &spec).unwrap();
        assert!((v.value - 2.0 * PI * PI).abs() < 1e-10);
        assert!(v.error < 1e-10);
    }

    #[test]
    fn weighted_sasakian_volume() {
        let geo = Geometry::s3(MetricSpec::S3WeightedSasakian { k: 2.0, l: 3.0 });
        let spec = QuadratureSpec::for_chart(&geo.chart);
        let v = integrate(|_| Ok(1.0), &geo, &spec).unwrap();
        let want = 2.0 * PI * PI / 6.0;
        assert!((v.value - want).abs() / want < 1e-10);
    }

    #[test]
    fn improper_radial_integral() {
        let v = integrate_1d(
            |r| 4.0 * r / (r * r + 1.0).powi(2),
            0.0,
            f64::INFINITY,
            16,
            4,
        );
        assert!((v - 2.0).abs() < 1e-13);
        let g = integrate_1d(|x| (-x * x).exp(), f64::NEG_INFINITY, f64::INFINITY, 16, 8);
        assert!((g - PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn divergence_is_detected() {
        let v = integrate_1d_refined(|x| x.powf(-1.5), 0.0, 1.0, 8, 1, 4);
        assert!(matches!(v, Err(Error::QuadratureDivergence { .. })));
    }

    #[test]
    fn cumulative_matches_antiderivative() {
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
        let c = cumulative_1d(|x| x.cos(), &grid, 8);
        for (x, v) in grid.iter().zip(&c) {
            assert!((v - x.sin()).abs() < 1e-14);
        }
    }

    #[test]
    fn pairwise_sum_is_order_fixed() {
        let v: Vec<f64> = (0..1000).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        assert_eq!(pairwise_sum(&v), pairwise_sum(&v));
        assert!((pairwise_sum(&v) - v.iter().sum::<f64>()).abs() < 1e-12);
    }
}
