//! Coordinate charts, metric families, and first-order differential operators.
//!
//! Every manifold in the crate is a single coordinate box. Metric components
//! are written once, generically over [`Real`], so the same code produces
//! values (`f64`) and exact first derivatives (`Dual64`). Finite differences
//! are kept as an independent fallback and as a test oracle.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::{Add, Mul, Sub};

use nalgebra::{Matrix3, Vector3};
use num_dual::{Dual64, DualNum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinates of a point in a chart.
pub type Point = [f64; 3];

/// Scalar type accepted by the generic formulas: `f64` or a dual number.
pub trait Real: DualNum<Primitive = f64> + Copy {}
impl<T: DualNum<Primitive = f64> + Copy> Real for T {}

/// Step used by the default fourth-order central stencil (scaled per coordinate).
pub const FD_STEP: f64 = 1e-3;
/// Step used by the second-order oracle stencil.
pub const FD_STEP_ORACLE: f64 = 1e-5;

const LOCUS_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    /// (x, y, z) on R^3.
    Cartesian,
    /// (rho, theta, z) on R^3.
    Cylindrical,
    /// (r, theta, phi) on R^2 x S^1, polar coordinates on the plane.
    PolarCircle,
    /// (s, phi1, phi2) on S^3 with s in [0, pi/2].
    Hopf,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }
}

/// A coordinate hyperplane `x[coord] = value` where the metric degenerates.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularLocus {
    pub coord: usize,
    pub value: f64,
    pub label: &'static str,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    pub name: &'static str,
    pub kind: ChartKind,
    pub coords: [&'static str; 3],
    pub domain: [Interval; 3],
    /// Period of each periodic coordinate.
    pub periodic: [Option<f64>; 3],
    pub singular_loci: Vec<SingularLocus>,
    /// Sign of `dx0 ^ dx1 ^ dx2` relative to the manifold's standard orientation.
    pub orientation: f64,
    /// Coordinate whose component fixes the sign of the vertical unit vector.
    pub fiber_axis: usize,
}

impl Chart {
    pub fn dim(&self) -> usize {
        3
    }

    pub fn cartesian() -> Chart {
        let all = Interval::new(f64::NEG_INFINITY, f64::INFINITY);
        Chart {
            name: "cartesian",
            kind: ChartKind::Cartesian,
            coords: ["x", "y", "z"],
            domain: [all; 3],
            periodic: [None; 3],
            singular_loci: vec![],
            orientation: 1.0,
            fiber_axis: 2,
        }
    }

    pub fn cylindrical() -> Chart {
        Chart {
            name: "cylindrical",
            kind: ChartKind::Cylindrical,
            coords: ["rho", "theta", "z"],
            domain: [
                Interval::new(0.0, f64::INFINITY),
                Interval::new(0.0, 2.0 * PI),
                Interval::new(f64::NEG_INFINITY, f64::INFINITY),
            ],
            periodic: [None, Some(2.0 * PI), None],
            singular_loci: vec![SingularLocus {
                coord: 0,
                value: 0.0,
                label: "rho = 0",
            }],
            orientation: 1.0,
            fiber_axis: 1,
        }
    }

    pub fn polar_circle() -> Chart {
        Chart {
            name: "polar_circle",
            kind: ChartKind::PolarCircle,
            coords: ["r", "theta", "phi"],
            domain: [
                Interval::new(0.0, f64::INFINITY),
                Interval::new(0.0, 2.0 * PI),
                Interval::new(0.0, 2.0 * PI),
            ],
            periodic: [None, Some(2.0 * PI), Some(2.0 * PI)],
            singular_loci: vec![SingularLocus {
                coord: 0,
                value: 0.0,
                label: "r = 0",
            }],
            orientation: 1.0,
            fiber_axis: 2,
        }
    }

    /// The chart `(cos s e^{i phi1}, sin s e^{i phi2})` of the unit sphere in C^2.
    ///
    /// It is negatively oriented with respect to the complex orientation of
    /// S^3, which is what makes `curl xi_+ = +2 xi_+`.
    pub fn hopf() -> Chart {
        Chart {
            name: "hopf",
            kind: ChartKind::Hopf,
            coords: ["s", "phi1", "phi2"],
            domain: [
                Interval::new(0.0, FRAC_PI_2),
                Interval::new(0.0, 2.0 * PI),
                Interval::new(0.0, 2.0 * PI),
            ],
            periodic: [None, Some(2.0 * PI), Some(2.0 * PI)],
            singular_loci: vec![
                SingularLocus {
                    coord: 0,
                    value: 0.0,
                    label: "s = 0",
                },
                SingularLocus {
                    coord: 0,
                    value: FRAC_PI_2,
                    label: "s = pi/2",
                },
            ],
            orientation: -1.0,
            fiber_axis: 2,
        }
    }

    pub fn for_kind(kind: ChartKind) -> Chart {
        match kind {
            ChartKind::Cartesian => Chart::cartesian(),
            ChartKind::Cylindrical => Chart::cylindrical(),
            ChartKind::PolarCircle => Chart::polar_circle(),
            ChartKind::Hopf => Chart::hopf(),
        }
    }

    /// Checks that `x` lies in the coordinate box. Periodic coordinates accept any value.
    pub fn check_domain(&self, x: &Point) -> Result<()> {
        for c in 0..3 {
            let v = x[c];
            if !v.is_finite() {
                return Err(self.out_of_domain(x));
            }
            if self.periodic[c].is_some() {
                continue;
            }
            let d = self.domain[c];
            if v < d.lo || v > d.hi {
                return Err(self.out_of_domain(x));
            }
        }
        Ok(())
    }

    /// Checks that `x` is in the domain and off every singular locus.
    pub fn check_regular(&self, x: &Point) -> Result<()> {
        self.check_domain(x)?;
        for locus in &self.singular_loci {
            if (x[locus.coord] - locus.value).abs() <= LOCUS_TOL * locus.value.abs().max(1.0) {
                return Err(Error::SingularPoint {
                    chart: self.name,
                    locus: locus.label.to_string(),
                    point: *x,
                });
            }
        }
        Ok(())
    }

    fn out_of_domain(&self, x: &Point) -> Error {
        Error::OutOfDomain {
            chart: self.name,
            point: *x,
        }
    }

    /// Step for coordinate `coord` at `x`, scaled by the size of the coordinate.
    pub fn step(&self, x: &Point, coord: usize, base: f64) -> f64 {
        if self.domain[coord].is_finite() {
            base
        } else {
            base * x[coord].abs().max(1.0)
        }
    }

    /// Checks that a symmetric stencil of half-width `width` stays inside the regular domain.
    pub fn check_stencil(&self, x: &Point, coord: usize, width: f64) -> Result<()> {
        if self.periodic[coord].is_some() {
            return Ok(());
        }
        let d = self.domain[coord];
        let mut ok = x[coord] - width > d.lo || d.lo == f64::NEG_INFINITY;
        ok &= x[coord] + width < d.hi || d.hi == f64::INFINITY;
        for locus in self.singular_loci.iter().filter(|l| l.coord == coord) {
            ok &= (x[coord] - locus.value).abs() > width;
        }
        if ok {
            Ok(())
        } else {
            Err(Error::StepTooLarge {
                chart: self.name,
                coord,
                width,
                point: *x,
            })
        }
    }

    /// Wraps periodic coordinates into `[lo, lo + period)`.
    pub fn wrap(&self, x: &Point) -> Point {
        let mut y = *x;
        for c in 0..3 {
            if let Some(p) = self.periodic[c] {
                let lo = self.domain[c].lo;
                y[c] = lo + (y[c] - lo).rem_euclid(p);
            }
        }
        y
    }
}

/// Metric families used by the examples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    Euclidean3,
    #[serde(rename = "cylinder_R2xS1", alias = "cylinder_r2xs1")]
    CylinderR2xS1,
    S3Round,
    S3Squashed {
        k: f64,
        l: f64,
        a: f64,
    },
    S3Conformal {
        k: f64,
        l: f64,
        a: f64,
    },
    S3WeightedSasakian {
        k: f64,
        l: f64,
    },
}

impl MetricSpec {
    pub fn family(&self) -> &'static str {
        match self {
            MetricSpec::Euclidean3 => "euclidean3",
            MetricSpec::CylinderR2xS1 => "cylinder_R2xS1",
            MetricSpec::S3Round => "s3_round",
            MetricSpec::S3Squashed { .. } => "s3_squashed",
            MetricSpec::S3Conformal { .. } => "s3_conformal",
            MetricSpec::S3WeightedSasakian { .. } => "s3_weighted_sasakian",
        }
    }

    pub fn is_s3(&self) -> bool {
        !matches!(self, MetricSpec::Euclidean3 | MetricSpec::CylinderR2xS1)
    }

    pub fn compatible_with(&self, kind: ChartKind) -> bool {
        match self {
            MetricSpec::Euclidean3 => matches!(kind, ChartKind::Cartesian | ChartKind::Cylindrical),
            MetricSpec::CylinderR2xS1 => kind == ChartKind::PolarCircle,
            _ => kind == ChartKind::Hopf,
        }
    }

    /// Metric components `g_ij` at `x`, generic over the scalar type.
    pub fn components<D: Real>(&self, kind: ChartKind, x: &[D; 3]) -> [[D; 3]; 3] {
        let zero = D::from(0.0);
        let one = D::from(1.0);
        let diag = |a: D, b: D, c: D| [[a, zero, zero], [zero, b, zero], [zero, zero, c]];
        match (self, kind) {
            (MetricSpec::Euclidean3, ChartKind::Cylindrical) => diag(one, x[0] * x[0], one),
            (MetricSpec::Euclidean3, _) => diag(one, one, one),
            (MetricSpec::CylinderR2xS1, _) => diag(one, x[0] * x[0], one),
            (MetricSpec::S3Round, _) => {
                let (s, c) = x[0].sin_cos();
                diag(one, c * c, s * s)
            }
            (MetricSpec::S3Squashed { k, l, a }, _) => {
                let (s, c) = x[0].sin_cos();
                let a2 = a * a;
                let q = s * s * (k * k) + c * c * (l * l);
                diag(q * a2, c * c * (k * k * a2), s * s * (l * l * a2))
            }
            (MetricSpec::S3Conformal { k, l, a }, _) => {
                let (s, c) = x[0].sin_cos();
                let q = s * s * (k * k) + c * c * (l * l);
                let lam = q.recip() * (a * a * k * k * l * l);
                diag(lam, lam * c * c, lam * s * s)
            }
            (MetricSpec::S3WeightedSasakian { k, l }, _) => {
                let (s, c) = x[0].sin_cos();
                let (s2, c2) = (s * s, c * c);
                let vs = s2 * *k + c2 * *l;
                let vs2 = vs * vs;
                let vs3 = vs2 * vs;
                let sc2 = s2 * c2;
                let g11 = sc2 * (k * k) / vs3 + c2 * c2 / vs2;
                let g22 = sc2 * (l * l) / vs3 + s2 * s2 / vs2;
                let g12 = -sc2 * (k * l) / vs3 + sc2 / vs2;
                [[vs.recip(), zero, zero], [zero, g11, g12], [zero, g12, g22]]
            }
        }
    }
}

/// Connection coefficients, `gamma[i][(j, k)] = Γ^i_{jk}`.
pub type Christoffel = [Matrix3<f64>; 3];

/// A chart together with a compatible metric.
#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    pub chart: Chart,
    pub metric: MetricSpec,
}

/// Scalar function on a chart, optionally with closed-form partials.
pub trait ScalarField: Sync {
    fn value(&self, x: &Point) -> Result<f64>;

    /// Coordinate partials `∂_i f`, when known in closed form.
    fn partials(&self, _x: &Point) -> Option<Result<Vector3<f64>>> {
        None
    }
}

/// Vector field in coordinate components, optionally with a closed-form Jacobian.
pub trait VectorField: Sync {
    fn value(&self, x: &Point) -> Result<Vector3<f64>>;

    /// Jacobian `J[(i, j)] = ∂_j V^i`, when known in closed form.
    fn jacobian(&self, _x: &Point) -> Option<Result<Matrix3<f64>>> {
        None
    }
}

/// Scalar field from a closure; derivatives by finite differences.
pub struct FnScalar<F>(pub F);

impl<F: Fn(&Point) -> Result<f64> + Sync> ScalarField for FnScalar<F> {
    fn value(&self, x: &Point) -> Result<f64> {
        (self.0)(x)
    }
}

/// Vector field from a closure; derivatives by finite differences.
pub struct FnVector<F>(pub F);

impl<F: Fn(&Point) -> Result<Vector3<f64>> + Sync> VectorField for FnVector<F> {
    fn value(&self, x: &Point) -> Result<Vector3<f64>> {
        (self.0)(x)
    }
}

/// Scalar field written over dual numbers; partials are exact.
pub struct DualScalar<F>(pub F);

impl<F: Fn(&[Dual64; 3]) -> Dual64 + Sync> ScalarField for DualScalar<F> {
    fn value(&self, x: &Point) -> Result<f64> {
        Ok((self.0)(&seed(x, None)).re)
    }

    fn partials(&self, x: &Point) -> Option<Result<Vector3<f64>>> {
        Some(Ok(Vector3::from_fn(|j, _| (self.0)(&seed(x, Some(j))).eps)))
    }
}

/// Vector field written over dual numbers; the Jacobian is exact.
pub struct DualVector<F>(pub F);

impl<F: Fn(&[Dual64; 3]) -> [Dual64; 3] + Sync> VectorField for DualVector<F> {
    fn value(&self, x: &Point) -> Result<Vector3<f64>> {
        let v = (self.0)(&seed(x, None));
        Ok(Vector3::new(v[0].re, v[1].re, v[2].re))
    }

    fn jacobian(&self, x: &Point) -> Option<Result<Matrix3<f64>>> {
        let mut j = Matrix3::zeros();
        for c in 0..3 {
            let v = (self.0)(&seed(x, Some(c)));
            for i in 0..3 {
                j[(i, c)] = v[i].eps;
            }
        }
        Some(Ok(j))
    }
}

/// Dual-number coordinates with the derivative part seeded along `dir`.
pub fn seed(x: &Point, dir: Option<usize>) -> [Dual64; 3] {
    std::array::from_fn(|i| Dual64::new(x[i], if Some(i) == dir { 1.0 } else { 0.0 }))
}

/// Levi-Civita symbol.
pub fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

fn to_matrix(m: [[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[i][j])
}

impl Geometry {
    pub fn new(chart: Chart, metric: MetricSpec) -> Result<Geometry> {
        if !metric.compatible_with(chart.kind) {
            return Err(Error::Incompatible(format!(
                "metric {} cannot be used on chart {}",
                metric.family(),
                chart.name
            )));
        }
        Ok(Geometry { chart, metric })
    }

    /// S^3 in the Hopf chart with the given metric family.
    pub fn s3(metric: MetricSpec) -> Geometry {
        assert!(metric.is_s3(), "{} is not an S^3 metric", metric.family());
        Geometry {
            chart: Chart::hopf(),
            metric,
        }
    }

    pub fn euclidean() -> Geometry {
        Geometry {
            chart: Chart::cartesian(),
            metric: MetricSpec::Euclidean3,
        }
    }

    pub fn cylindrical() -> Geometry {
        Geometry {
            chart: Chart::cylindrical(),
            metric: MetricSpec::Euclidean3,
        }
    }

    pub fn r2xs1() -> Geometry {
        Geometry {
            chart: Chart::polar_circle(),
            metric: MetricSpec::CylinderR2xS1,
        }
    }

    pub fn orientation(&self) -> f64 {
        self.chart.orientation
    }

    /// `g_ij(x)`.
    pub fn metric_at(&self, x: &Point) -> Result<Matrix3<f64>> {
        self.chart.check_regular(x)?;
        Ok(self.metric_unchecked(x))
    }

    fn metric_unchecked(&self, x: &Point) -> Matrix3<f64> {
        to_matrix(self.metric.components(self.chart.kind, x))
    }

    pub fn inverse_metric(&self, x: &Point) -> Result<Matrix3<f64>> {
        let g = self.metric_at(x)?;
        Ok(invert(&g))
    }

    /// `[∂_0 g, ∂_1 g, ∂_2 g]` from the closed-form components.
    pub fn metric_derivatives(&self, x: &Point) -> Result<[Matrix3<f64>; 3]> {
        self.chart.check_regular(x)?;
        Ok(std::array::from_fn(|d| {
            let m = self.metric.components(self.chart.kind, &seed(x, Some(d)));
            Matrix3::from_fn(|i, j| m[i][j].eps)
        }))
    }

    /// Metric derivatives by central differences (fallback and oracle).
    pub fn metric_derivatives_fd(&self, x: &Point, base_step: f64) -> Result<[Matrix3<f64>; 3]> {
        self.chart.check_regular(x)?;
        let mut out = [Matrix3::zeros(); 3];
        for (d, slot) in out.iter_mut().enumerate() {
            *slot = central_2(&self.chart, x, d, base_step, |y| {
                Ok(self.metric_unchecked(y))
            })?;
        }
        Ok(out)
    }

    /// `Γ^i_{jk}` from exact metric derivatives.
    pub fn christoffel_at(&self, x: &Point) -> Result<Christoffel> {
        let g = self.metric_at(x)?;
        let dg = self.metric_derivatives(x)?;
        Ok(christoffel_from(&g, &dg))
    }

    /// `Γ^i_{jk}` from finite-difference metric derivatives.
    pub fn christoffel_fd(&self, x: &Point) -> Result<Christoffel> {
        let g = self.metric_at(x)?;
        let dg = self.metric_derivatives_fd(x, FD_STEP_ORACLE)?;
        Ok(christoffel_from(&g, &dg))
    }

    /// `√det g`.
    pub fn volume_density(&self, x: &Point) -> Result<f64> {
        Ok(self.metric_at(x)?.determinant().sqrt())
    }

    /// `√det g` without the singular-locus check; zero on degenerate loci.
    pub fn volume_density_unchecked(&self, x: &Point) -> f64 {
        self.metric_unchecked(x).determinant().max(0.0).sqrt()
    }

    pub fn inner(&self, x: &Point, a: &Vector3<f64>, b: &Vector3<f64>) -> Result<f64> {
        Ok((self.metric_at(x)? * b).dot(a))
    }

    pub fn norm(&self, x: &Point, a: &Vector3<f64>) -> Result<f64> {
        Ok(self.inner(x, a, a)?.max(0.0).sqrt())
    }

    pub fn flat(&self, x: &Point, v: &Vector3<f64>) -> Result<Vector3<f64>> {
        Ok(self.metric_at(x)? * v)
    }

    pub fn sharp(&self, x: &Point, w: &Vector3<f64>) -> Result<Vector3<f64>> {
        Ok(self.inverse_metric(x)? * w)
    }

    /// Vector `V` with `ι_V ν_g = ω` for a 2-form with components `ω_jk`.
    pub fn hodge_dual_vector(&self, omega: &Matrix3<f64>, x: &Point) -> Result<Vector3<f64>> {
        let vol = self.volume_density(x)?;
        let o = self.orientation();
        Ok(Vector3::from_fn(|m, _| {
            let mut acc = 0.0;
            for j in 0..3 {
                for k in 0..3 {
                    acc += levi_civita(m, j, k) * omega[(j, k)];
                }
            }
            o * acc / (2.0 * vol)
        }))
    }

    /// Components `(ι_V ν_g)_jk`.
    pub fn interior_volume(&self, v: &Vector3<f64>, x: &Point) -> Result<Matrix3<f64>> {
        let vol = self.volume_density(x)?;
        let o = self.orientation();
        Ok(Matrix3::from_fn(|j, k| {
            (0..3).map(|i| levi_civita(i, j, k) * v[i]).sum::<f64>() * o * vol
        }))
    }

    /// Riemannian cross product, `(A × B)♭ = ι_B ι_A ν_g`.
    pub fn cross(&self, a: &Vector3<f64>, b: &Vector3<f64>, x: &Point) -> Result<Vector3<f64>> {
        let g = self.metric_at(x)?;
        let vol = g.determinant().sqrt();
        let o = self.orientation();
        let lower = Vector3::from_fn(|k, _| {
            let mut acc = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    acc += levi_civita(i, j, k) * a[i] * b[j];
                }
            }
            o * vol * acc
        });
        Ok(invert(&g) * lower)
    }

    /// Partial derivative of `f` along `coord` with the fourth-order central stencil.
    pub fn partial<T, F>(&self, x: &Point, coord: usize, f: F) -> Result<T>
    where
        T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
        F: Fn(&Point) -> Result<T>,
    {
        central_4(&self.chart, x, coord, FD_STEP, f)
    }

    /// Coordinate partials of a scalar field.
    pub fn partials(&self, f: &dyn ScalarField, x: &Point) -> Result<Vector3<f64>> {
        if let Some(p) = f.partials(x) {
            return p;
        }
        let mut out = Vector3::zeros();
        for c in 0..3 {
            out[c] = self.partial(x, c, |y| f.value(y))?;
        }
        Ok(out)
    }

    /// Jacobian `∂_j V^i` of a vector field.
    pub fn jacobian(&self, v: &dyn VectorField, x: &Point) -> Result<Matrix3<f64>> {
        if let Some(j) = v.jacobian(x) {
            return j;
        }
        let mut out = Matrix3::zeros();
        for c in 0..3 {
            let col = self.partial(x, c, |y| v.value(y))?;
            out.set_column(c, &col);
        }
        Ok(out)
    }

    /// `grad f = g^{ij} ∂_j f`.
    pub fn grad(&self, f: &dyn ScalarField, x: &Point) -> Result<Vector3<f64>> {
        let ginv = self.inverse_metric(x)?;
        Ok(ginv * self.partials(f, x)?)
    }

    /// `div V = (1/√g) ∂_i(√g V^i)`, expanded as `∂_i V^i + V^i ∂_i ln √g`.
    pub fn div(&self, v: &dyn VectorField, x: &Point) -> Result<f64> {
        let gamma = self.christoffel_at(x)?;
        let val = v.value(x)?;
        let jac = self.jacobian(v, x)?;
        let mut acc = jac.trace();
        for i in 0..3 {
            let dlog: f64 = (0..3).map(|j| gamma[j][(j, i)]).sum();
            acc += val[i] * dlog;
        }
        Ok(acc)
    }

    /// `curl V = (⋆ dV♭)♯`, so that `ι_{curl V} ν_g = dV♭`.
    pub fn curl(&self, v: &dyn VectorField, x: &Point) -> Result<Vector3<f64>> {
        let g = self.metric_at(x)?;
        let dg = self.metric_derivatives(x)?;
        let val = v.value(x)?;
        let jac = self.jacobian(v, x)?;
        // dflat[(j, k)] = ∂_j V♭_k
        let dflat = Matrix3::from_fn(|j, k| {
            (0..3)
                .map(|l| dg[j][(k, l)] * val[l] + g[(k, l)] * jac[(l, j)])
                .sum::<f64>()
        });
        self.hodge_dual_vector(&(dflat - dflat.transpose()), x)
    }

    /// Laplace-Beltrami operator `g^{ij}(∂_i ∂_j f − Γ^k_{ij} ∂_k f)` from a second-derivative stencil.
    pub fn laplace_beltrami(&self, f: &dyn ScalarField, x: &Point) -> Result<f64> {
        let ginv = self.inverse_metric(x)?;
        let gamma = self.christoffel_at(x)?;
        let df = self.partials(f, x)?;
        let mut hess = Matrix3::zeros();
        if f.partials(x).is_some() {
            // Exact first partials: one difference instead of two.
            for i in 0..3 {
                let col = self.partial(x, i, |y| self.partials(f, y))?;
                hess.set_column(i, &col);
            }
            hess = (hess + hess.transpose()) * 0.5;
        } else {
            for i in 0..3 {
                for j in i..3 {
                    let hij = if i == j {
                        second_4(&self.chart, x, i, FD_STEP * 4.0, |y| f.value(y))?
                    } else {
                        self.partial(x, i, |y| self.partial(y, j, |z| f.value(z)))?
                    };
                    hess[(i, j)] = hij;
                    hess[(j, i)] = hij;
                }
            }
        }
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let conn: f64 = (0..3).map(|k| gamma[k][(i, j)] * df[k]).sum();
                acc += ginv[(i, j)] * (hess[(i, j)] - conn);
            }
        }
        Ok(acc)
    }

    /// Covariant derivative `(∇_A B)^i = A^j ∂_j B^i + Γ^i_{jk} A^j B^k` given `∂_j B^i`.
    pub fn covariant_derivative(
        &self,
        x: &Point,
        a: &Vector3<f64>,
        b: &Vector3<f64>,
        jac_b: &Matrix3<f64>,
    ) -> Result<Vector3<f64>> {
        let gamma = self.christoffel_at(x)?;
        Ok(Vector3::from_fn(|i, _| {
            let mut acc = (jac_b.row(i) * a)[0];
            for j in 0..3 {
                for k in 0..3 {
                    acc += gamma[i][(j, k)] * a[j] * b[k];
                }
            }
            acc
        }))
    }
}

/// Inverse of a symmetric positive-definite 3×3 matrix.
pub fn invert(g: &Matrix3<f64>) -> Matrix3<f64> {
    g.try_inverse()
        .unwrap_or_else(|| Matrix3::from_element(f64::NAN))
}

/// `Γ^i_{jk} = ½ g^{il}(∂_j g_{lk} + ∂_k g_{lj} − ∂_l g_{jk})`.
pub fn christoffel_from(g: &Matrix3<f64>, dg: &[Matrix3<f64>; 3]) -> Christoffel {
    let ginv = invert(g);
    let lowered =
        |l: usize, j: usize, k: usize| 0.5 * (dg[j][(l, k)] + dg[k][(l, j)] - dg[l][(j, k)]);
    std::array::from_fn(|i| {
        Matrix3::from_fn(|j, k| (0..3).map(|l| ginv[(i, l)] * lowered(l, j, k)).sum())
    })
}

/// Second-order central difference with step `base` (scaled per coordinate).
pub fn central_2<T, F>(chart: &Chart, x: &Point, coord: usize, base: f64, f: F) -> Result<T>
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
    F: Fn(&Point) -> Result<T>,
{
    let h = chart.step(x, coord, base);
    chart.check_stencil(x, coord, h)?;
    let (mut xp, mut xm) = (*x, *x);
    xp[coord] += h;
    xm[coord] -= h;
    Ok((f(&xp)? - f(&xm)?) * (0.5 / h))
}

/// Fourth-order central difference with step `base` (scaled per coordinate).
pub fn central_4<T, F>(chart: &Chart, x: &Point, coord: usize, base: f64, f: F) -> Result<T>
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
    F: Fn(&Point) -> Result<T>,
{
    let h = chart.step(x, coord, base);
    chart.check_stencil(x, coord, 2.0 * h)?;
    let at = |d: f64| {
        let mut y = *x;
        y[coord] += d * h;
        f(&y)
    };
    let near = at(1.0)? - at(-1.0)?;
    let far = at(2.0)? - at(-2.0)?;
    Ok((near * 8.0 - far) * (1.0 / (12.0 * h)))
}

/// Fourth-order central second derivative.
pub fn second_4<F>(chart: &Chart, x: &Point, coord: usize, base: f64, f: F) -> Result<f64>
where
    F: Fn(&Point) -> Result<f64>,
{
    let h = chart.step(x, coord, base);
    chart.check_stencil(x, coord, 2.0 * h)?;
    let at = |d: f64| {
        let mut y = *x;
        y[coord] += d * h;
        f(&y)
    };
    let f0 = at(0.0)?;
    let v = -at(2.0)? + 16.0 * at(1.0)? - 30.0 * f0 + 16.0 * at(-1.0)? - at(-2.0)?;
    Ok(v / (12.0 * h * h))
}
