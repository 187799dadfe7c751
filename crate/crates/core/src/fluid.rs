//! Steady Euler flows: the dual flow of a map, Khesin flows on S³, explicit
//! test flows, both forms of the Euler equations, Beltrami classification and
//! the forced Euler equation of the full model.

use nalgebra::{Matrix3, Vector3};
use num_dual::Dual64;
use serde::{Deserialize, Serialize};

use crate::chart::{seed, ChartKind, Geometry, MetricSpec, Point, Real, VectorField};
use crate::error::{Error, Result};
use crate::field_maps::{AnsatzMap, Potential};
use crate::integration::integrate_1d;
use crate::sampling::{sample_grid, sup_over, Sweep};

/// Polynomial in one variable, coefficients in increasing degree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn constant(c: f64) -> Poly {
        Poly(vec![c])
    }

    pub fn zero() -> Poly {
        Poly(vec![])
    }

    pub fn eval<D: Real>(&self, t: D) -> D {
        self.0
            .iter()
            .rev()
            .fold(D::from(0.0), |acc, &c| acc * t + c)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }
}

/// Flows with closed-form velocity and Bernoulli function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExplicitFlow {
    /// `ω(−y, x, 0)` on Cartesian R³ with `p = ω²(x² + y²)/2`.
    RigidRotation { omega: f64 },
    /// `grad(x² − y²)` on Cartesian R³ with Bernoulli function `slope · x`.
    HarmonicGradient { bernoulli_slope: f64 },
    /// Constant coordinate components with a constant Bernoulli function.
    Coordinate {
        components: [f64; 3],
        bernoulli: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum FlowSource {
    /// `V = (⋆φ*ω)♯`, `P = P̄∘φ`.
    FromMap {
        map: AnsatzMap,
        potential: Potential,
    },
    /// `V = f₋(cos²s)ξ₋ + f₊(cos²s)ξ₊` on the round sphere.
    Khesin {
        f_minus: Poly,
        f_plus: Poly,
    },
    Explicit(ExplicitFlow),
}

/// A steady flow on a geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    pub geometry: Geometry,
    pub source: FlowSource,
}

/// Velocity and Bernoulli function with their coordinate derivatives at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowJet {
    pub x: Point,
    pub v: Vector3<f64>,
    /// `∂_j V^i`.
    pub dv: Matrix3<f64>,
    pub bernoulli: f64,
    pub d_bernoulli: Vector3<f64>,
}

/// The dual flow of a map with the Bernoulli function `P̄∘φ`.
pub fn dual_flow(map: &AnsatzMap, potential: &Potential, geom: &Geometry) -> Result<FlowField> {
    map.check_geometry(geom)?;
    Ok(FlowField {
        geometry: geom.clone(),
        source: FlowSource::FromMap {
            map: map.clone(),
            potential: *potential,
        },
    })
}

/// Khesin flow on the round sphere; the pressure is `2∫₀^{cos²s} f₋f₊`.
pub fn khesin_flow(f_minus: Poly, f_plus: Poly) -> FlowField {
    FlowField {
        geometry: Geometry::s3(MetricSpec::S3Round),
        source: FlowSource::Khesin { f_minus, f_plus },
    }
}

pub fn explicit_flow(flow: ExplicitFlow, geom: &Geometry) -> Result<FlowField> {
    let cartesian_only = matches!(
        flow,
        ExplicitFlow::RigidRotation { .. } | ExplicitFlow::HarmonicGradient { .. }
    );
    if cartesian_only && geom.chart.kind != ChartKind::Cartesian {
        return Err(Error::Incompatible(format!(
            "{flow:?} is defined on the Cartesian chart, not {}",
            geom.chart.name
        )));
    }
    Ok(FlowField {
        geometry: geom.clone(),
        source: FlowSource::Explicit(flow),
    })
}

fn khesin_velocity<D: Real>(fm: &Poly, fp: &Poly, x: &[D; 3]) -> [D; 3] {
    let t = x[0].cos().powi(2);
    let (a, b) = (fm.eval(t), fp.eval(t));
    [D::from(0.0), a + b, b - a]
}

fn explicit_velocity<D: Real>(flow: &ExplicitFlow, x: &[D; 3]) -> [D; 3] {
    match *flow {
        ExplicitFlow::RigidRotation { omega } => [-x[1] * omega, x[0] * omega, D::from(0.0)],
        ExplicitFlow::HarmonicGradient { .. } => [x[0] * 2.0, x[1] * -2.0, D::from(0.0)],
        ExplicitFlow::Coordinate { components, .. } => components.map(D::from),
    }
}

fn explicit_bernoulli<D: Real>(flow: &ExplicitFlow, x: &[D; 3]) -> D {
    match *flow {
        ExplicitFlow::RigidRotation { omega } => (x[0] * x[0] + x[1] * x[1]) * (omega * omega),
        ExplicitFlow::HarmonicGradient { bernoulli_slope } => x[0] * bernoulli_slope,
        ExplicitFlow::Coordinate { bernoulli, .. } => D::from(bernoulli),
    }
}

fn dual_jet<F: Fn(&[Dual64; 3]) -> [Dual64; 3], G: Fn(&[Dual64; 3]) -> Dual64>(
    x: &Point,
    v: F,
    p: G,
) -> FlowJet {
    let v0 = v(&seed(x, None));
    let mut dv = Matrix3::zeros();
    let mut dp = Vector3::zeros();
    for c in 0..3 {
        let xs = seed(x, Some(c));
        let vc = v(&xs);
        for i in 0..3 {
            dv[(i, c)] = vc[i].eps;
        }
        dp[c] = p(&xs).eps;
    }
    FlowJet {
        x: *x,
        v: Vector3::new(v0[0].re, v0[1].re, v0[2].re),
        dv,
        bernoulli: p(&seed(x, None)).re,
        d_bernoulli: dp,
    }
}

impl FlowField {
    pub fn provenance(&self) -> &'static str {
        match self.source {
            FlowSource::FromMap { .. } => "from_map",
            FlowSource::Khesin { .. } => "khesin",
            FlowSource::Explicit(_) => "explicit",
        }
    }

    pub fn jet(&self, x: &Point) -> Result<FlowJet> {
        self.geometry.chart.check_regular(x)?;
        match &self.source {
            FlowSource::FromMap { map, potential } => {
                let j = map.jet(&self.geometry, x)?;
                let gp = potential.grad(&j.phi, j.target_radius);
                Ok(FlowJet {
                    x: *x,
                    v: j.flow,
                    dv: j.d_flow,
                    bernoulli: potential.value(&j.phi, j.target_radius),
                    d_bernoulli: j.dphi.transpose() * gp,
                })
            }
            FlowSource::Khesin { f_minus, f_plus } => {
                let mut jet = dual_jet(
                    x,
                    |y| khesin_velocity(f_minus, f_plus, y),
                    |_| Dual64::from(0.0),
                );
                let v2 = jet.v.dot(&(self.geometry.metric_at(x)? * jet.v));
                let dg = self.geometry.metric_derivatives(x)?;
                let g = self.geometry.metric_at(x)?;
                let d_v2 = Vector3::from_fn(|c, _| {
                    (dg[c] * jet.v).dot(&jet.v) + 2.0 * (g * jet.v).dot(&jet.dv.column(c))
                });
                let t = x[0].cos().powi(2);
                let dp_dt = 2.0 * f_minus.eval(t) * f_plus.eval(t);
                let dt_ds = -(2.0 * x[0]).sin();
                jet.bernoulli = khesin_pressure(f_minus, f_plus, t) + 0.5 * v2;
                jet.d_bernoulli = Vector3::new(dp_dt * dt_ds, 0.0, 0.0) + d_v2 * 0.5;
                Ok(jet)
            }
            FlowSource::Explicit(flow) => Ok(dual_jet(
                x,
                |y| explicit_velocity(flow, y),
                |y| explicit_bernoulli(flow, y),
            )),
        }
    }

    pub fn velocity(&self, x: &Point) -> Result<Vector3<f64>> {
        Ok(self.jet(x)?.v)
    }

    pub fn bernoulli(&self, x: &Point) -> Result<f64> {
        Ok(self.jet(x)?.bernoulli)
    }

    /// `p = P − ½|V|²`.
    pub fn pressure(&self, x: &Point) -> Result<f64> {
        let j = self.jet(x)?;
        let g = self.geometry.metric_at(x)?;
        Ok(j.bernoulli - 0.5 * j.v.dot(&(g * j.v)))
    }

    /// `curl V`.
    pub fn curl(&self, x: &Point) -> Result<Vector3<f64>> {
        self.geometry.curl(self, x)
    }

    /// `div V`.
    pub fn div(&self, x: &Point) -> Result<f64> {
        self.geometry.div(self, x)
    }
}

impl VectorField for FlowField {
    fn value(&self, x: &Point) -> Result<Vector3<f64>> {
        self.velocity(x)
    }

    fn jacobian(&self, x: &Point) -> Option<Result<Matrix3<f64>>> {
        Some(self.jet(x).map(|j| j.dv))
    }
}

/// `2∫₀^t f₋f₊` by Gauss quadrature.
pub fn khesin_pressure(f_minus: &Poly, f_plus: &Poly, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let degree = f_minus.0.len() + f_plus.0.len();
    let order = (degree / 2 + 1).max(8);
    2.0 * integrate_1d(|u| f_minus.eval(u) * f_plus.eval(u), 0.0, t, order, 1)
}

/// Defects of the two forms of the steady Euler equations at a point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerDefect {
    pub point: Point,
    /// `g`-norm of `V × curl V − grad P`.
    pub curl_form: f64,
    /// `div V`.
    pub divergence: f64,
    /// `g`-norm of `∇_V V + grad p`.
    pub convective_form: f64,
}

/// `V × curl V − grad P` and `div V`.
pub fn euler_residual_curl_form(flow: &FlowField, x: &Point) -> Result<(Vector3<f64>, f64)> {
    let geom = &flow.geometry;
    let jet = flow.jet(x)?;
    let curl = curl_from_jet(geom, &jet)?;
    let cross = geom.cross(&jet.v, &curl, x)?;
    let grad_p = geom.inverse_metric(x)? * jet.d_bernoulli;
    Ok((cross - grad_p, div_from_jet(geom, &jet)?))
}

/// `∇_V V + grad p` with `p = P − ½|V|²`.
pub fn euler_residual_convective_form(flow: &FlowField, x: &Point) -> Result<Vector3<f64>> {
    let geom = &flow.geometry;
    let jet = flow.jet(x)?;
    let nabla = geom.covariant_derivative(x, &jet.v, &jet.v, &jet.dv)?;
    let g = geom.metric_at(x)?;
    let dg = geom.metric_derivatives(x)?;
    let d_v2 = Vector3::from_fn(|c, _| {
        (dg[c] * jet.v).dot(&jet.v) + 2.0 * (g * jet.v).dot(&jet.dv.column(c))
    });
    let dp = jet.d_bernoulli - d_v2 * 0.5;
    Ok(nabla + geom.inverse_metric(x)? * dp)
}

pub fn euler_defect(flow: &FlowField, x: &Point) -> Result<EulerDefect> {
    let g = flow.geometry.metric_at(x)?;
    let norm = |v: &Vector3<f64>| v.dot(&(g * v)).max(0.0).sqrt();
    let (c, d) = euler_residual_curl_form(flow, x)?;
    let conv = euler_residual_convective_form(flow, x)?;
    Ok(EulerDefect {
        point: *x,
        curl_form: norm(&c),
        divergence: d,
        convective_form: norm(&conv),
    })
}

fn curl_from_jet(geom: &Geometry, jet: &FlowJet) -> Result<Vector3<f64>> {
    let x = &jet.x;
    let g = geom.metric_at(x)?;
    let dg = geom.metric_derivatives(x)?;
    let dflat = Matrix3::from_fn(|j, k| {
        (0..3)
            .map(|l| dg[j][(k, l)] * jet.v[l] + g[(k, l)] * jet.dv[(l, j)])
            .sum::<f64>()
    });
    geom.hodge_dual_vector(&(dflat - dflat.transpose()), x)
}

fn div_from_jet(geom: &Geometry, jet: &FlowJet) -> Result<f64> {
    let gamma = geom.christoffel_at(&jet.x)?;
    let mut acc = jet.dv.trace();
    for i in 0..3 {
        acc += jet.v[i] * (0..3).map(|j| gamma[j][(j, i)]).sum::<f64>();
    }
    Ok(acc)
}

/// Sup-norms of the Euler defects over a sample grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerSweep {
    pub curl_form: Sweep,
    pub divergence: Sweep,
    pub convective_form: Sweep,
    /// Sup of `|V(P)|`, conservation of the Bernoulli function along the flow.
    pub bernoulli_transport: Sweep,
}

pub fn euler_sweep_points(flow: &FlowField, points: &[Point]) -> Result<EulerSweep> {
    let defects: Vec<Result<EulerDefect>> = {
        use rayon::prelude::*;
        points.par_iter().map(|x| euler_defect(flow, x)).collect()
    };
    let mut ok = Vec::with_capacity(points.len());
    for d in defects {
        ok.push(d?);
    }
    let mk = |vals: Vec<(Point, f64)>| {
        let mut s = Sweep::empty();
        for (p, v) in vals {
            let v = if v.is_nan() { f64::INFINITY } else { v.abs() };
            s = s.merge(Sweep {
                sup: v,
                argmax: Some(p),
                evaluated: 1,
                rank_deficient: 0,
            });
        }
        s
    };
    let transport = sup_over(points, |x| {
        let j = flow.jet(x)?;
        Ok(j.d_bernoulli.dot(&j.v))
    })?;
    Ok(EulerSweep {
        curl_form: mk(ok.iter().map(|d| (d.point, d.curl_form)).collect()),
        divergence: mk(ok.iter().map(|d| (d.point, d.divergence)).collect()),
        convective_form: mk(ok.iter().map(|d| (d.point, d.convective_form)).collect()),
        bernoulli_transport: transport,
    })
}

/// Euler defects over the pole-avoiding `n³` grid.
pub fn euler_sweep(flow: &FlowField, n: usize) -> Result<EulerSweep> {
    euler_sweep_points(flow, &sample_grid(&flow.geometry.chart, n))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum BeltramiClass {
    Potential,
    Linear { constant: f64 },
    Nonlinear,
    NotBeltrami { note: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeltramiReport {
    pub classification: BeltramiClass,
    /// `(x, f(x))` with `curl V = f V`.
    pub proportionality_samples: Vec<(Point, f64)>,
    /// Largest angle between `curl V` and the line of `V`, in radians.
    pub max_angle_defect: f64,
}

/// Largest angle allowed between `curl V` and `V`.
pub const BELTRAMI_ANGLE_TOL: f64 = 1e-6;

/// Classifies `V` as a Beltrami field from samples of `curl V = f V`.
pub fn beltrami_classify(flow: &FlowField, samples: &[Point]) -> Result<BeltramiReport> {
    let geom = &flow.geometry;
    let mut out = Vec::with_capacity(samples.len());
    let mut max_angle: f64 = 0.0;
    let mut all_curl_free = true;
    for x in samples {
        let jet = flow.jet(x)?;
        let g = geom.metric_at(x)?;
        let norm = |v: &Vector3<f64>| v.dot(&(g * v)).max(0.0).sqrt();
        let div = div_from_jet(geom, &jet)?;
        if div.abs() > 1e-6 {
            return Ok(BeltramiReport {
                classification: BeltramiClass::NotBeltrami {
                    note: format!("div V = {div:e} at {x:?}"),
                },
                proportionality_samples: out,
                max_angle_defect: max_angle,
            });
        }
        let curl = curl_from_jet(geom, &jet)?;
        let (nv, nc) = (norm(&jet.v), norm(&curl));
        if nv < 1e-12 {
            continue;
        }
        let f = curl.dot(&(g * jet.v)) / (nv * nv);
        if nc > 1e-10 * nv.max(1.0) {
            all_curl_free = false;
            let sin = (norm(&(curl - jet.v * f)) / nc).min(1.0);
            max_angle = max_angle.max(sin.asin());
        }
        out.push((*x, f));
    }
    let classification = if max_angle > BELTRAMI_ANGLE_TOL {
        BeltramiClass::NotBeltrami {
            note: format!("curl V is not collinear with V (angle {max_angle:e})"),
        }
    } else if all_curl_free {
        BeltramiClass::Potential
    } else {
        let n = out.len().max(1) as f64;
        let mean = out.iter().map(|s| s.1).sum::<f64>() / n;
        let var = out.iter().map(|s| (s.1 - mean).powi(2)).sum::<f64>() / n;
        if var.sqrt() <= 1e-8 * mean.abs() {
            BeltramiClass::Linear { constant: mean }
        } else {
            BeltramiClass::Nonlinear
        }
    };
    Ok(BeltramiReport {
        classification,
        proportionality_samples: out,
        max_angle_defect: max_angle,
    })
}

/// Default Beltrami samples: an `n³` pole-avoiding grid.
pub fn beltrami_samples(geom: &Geometry, n: usize) -> Vec<Point> {
    sample_grid(&geom.chart, n)
}

/// Force, forced-Euler defect and `g(F, V)` at one point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcedEuler {
    pub point: Point,
    /// `F = κ(div 𝔠 − ½ grad|dφ|²)`.
    pub force: [f64; 3],
    /// `∇_V V + grad p − F`.
    pub defect: [f64; 3],
    pub defect_norm: f64,
    /// `g(F, V)`.
    pub orthogonality: f64,
}

pub fn forced_euler_check(
    map: &AnsatzMap,
    potential: &Potential,
    kappa: f64,
    geom: &Geometry,
    x: &Point,
) -> Result<ForcedEuler> {
    let jet = map.jet(geom, x)?;
    let div_c = jet.ginv * jet.div_strain();
    let grad_d = jet.ginv * jet.d_dirichlet;
    let force = (div_c - grad_d * 0.5) * kappa;
    let flow = dual_flow(map, potential, geom)?;
    let conv = euler_residual_convective_form(&flow, x)?;
    let defect = conv - force;
    Ok(ForcedEuler {
        point: *x,
        force: force.into(),
        defect: defect.into(),
        defect_norm: jet.inner(&defect, &defect).max(0.0).sqrt(),
        orthogonality: jet.inner(&force, &jet.flow),
    })
}

/// The Reeb field `ℓ∂_{φ₁} + k∂_{φ₂}` of the weighted Sasakian structure.
pub fn reeb_field(k: f64, l: f64) -> FlowField {
    FlowField {
        geometry: Geometry::s3(MetricSpec::S3WeightedSasakian { k, l }),
        source: FlowSource::Explicit(ExplicitFlow::Coordinate {
            components: [0.0, l, k],
            bernoulli: 0.0,
        }),
    }
}

/// The unit field `(ℓ∂_{φ₁} + k∂_{φ₂})/(akℓ)` on a squashed or conformal sphere.
pub fn squashed_unit_field(geom: &Geometry) -> Result<FlowField> {
    let (k, l, a) = match geom.metric {
        MetricSpec::S3Squashed { k, l, a } | MetricSpec::S3Conformal { k, l, a } => (k, l, a),
        _ => {
            return Err(Error::Incompatible(
                "the unit fibre field needs a squashed or conformal metric".into(),
            ))
        }
    };
    Ok(FlowField {
        geometry: geom.clone(),
        source: FlowSource::Explicit(ExplicitFlow::Coordinate {
            components: [0.0, l / (a * k * l), k / (a * k * l)],
            bernoulli: 0.0,
        }),
    })
}

/// The Hopf field `ξ₊ = ∂_{φ₁} + ∂_{φ₂}` on the round sphere.
pub fn hopf_field() -> FlowField {
    khesin_flow(Poly::zero(), Poly::constant(1.0))
}
