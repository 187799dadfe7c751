//! Parametric maps `φ: M³ → S²(R)`, their jets, strain spectra, and target potentials.
//!
//! All map formulas are written generically over [`Real`]. First derivatives
//! come from `Dual64`, and derivatives of first-order quantities (the flow
//! `V = ⋆φ*ω`, σ₂, the stress tensor) from `HyperDual64`, so nothing here
//! depends on a finite-difference step.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Cholesky, Matrix3, SymmetricEigen, Vector3};
use num_dual::{Dual64, DualNum, HyperDual64};
use serde::{Deserialize, Serialize};

use crate::chart::{levi_civita, seed, ChartKind, Christoffel, Geometry, Point, Real};
use crate::error::{Error, Result};
use crate::spline::CubicSpline;

/// Threshold on σ₂ below which a point is treated as critical.
pub const RANK_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Profiles

/// Profile functions `α(s)` on `[0, π/2]` or radial profiles `α(r)` on `[0, ∞)`.
#[derive(Clone, Debug, PartialEq)]
pub enum ProfileFunction {
    /// `start + slope · s`; the Hopf map is `start = 0, slope = 2`.
    Linear {
        start: f64,
        slope: f64,
    },
    /// `2 arctan(tan^k s)`.
    Harmonic {
        k: f64,
    },
    /// `2 arctan(sin^ℓ s / cos^k s)`, the profile of the rational map `z₁^ℓ / z₀^k`.
    RationalHopf {
        k: f64,
        l: f64,
    },
    /// `π cos² s`.
    CosSquared,
    /// Closed-form profile of the squashed metric (new baby potential).
    Squashed {
        k: f64,
        l: f64,
    },
    /// Closed-form profile of the conformal metric (new baby potential).
    Conformal {
        k: f64,
        l: f64,
    },
    /// `arccos(2(1+k⁻²)cos²s − 2k⁻²cos⁴s − 1)`.
    CoupledH {
        k: f64,
    },
    /// `arccos(1 − 2/√(r²+1))`.
    Winding,
    /// `π(1 − tanh r)`.
    TanhRadial,
    /// `π exp(−r²)`.
    GaussianRadial,
    Constant(f64),
    /// `base + amplitude · sin⁴(2s) · sin(2 · mode · s)`, a compactly supported variation.
    Perturbed {
        base: Box<ProfileFunction>,
        amplitude: f64,
        mode: u32,
    },
    /// `base(s + eps · sin(4s) / 4)`, a monotone reparametrization fixing the endpoints.
    Reparametrized {
        base: Box<ProfileFunction>,
        eps: f64,
    },
    /// Cubic interpolant of sampled values.
    Tabulated(CubicSpline),
}

impl ProfileFunction {
    pub fn hopf() -> Self {
        ProfileFunction::Linear {
            start: 0.0,
            slope: 2.0,
        }
    }

    /// Closed-form profile for the squashed metric; `π cos² s` when `k = ℓ`.
    pub fn squashed(k: f64, l: f64) -> Self {
        if k == l {
            ProfileFunction::CosSquared
        } else {
            ProfileFunction::Squashed { k, l }
        }
    }

    /// Closed-form profile for the conformal metric; `π cos² s` when `k = ℓ`.
    pub fn conformal(k: f64, l: f64) -> Self {
        if k == l {
            ProfileFunction::CosSquared
        } else {
            ProfileFunction::Conformal { k, l }
        }
    }

    pub fn perturbed(self, amplitude: f64, mode: u32) -> Self {
        ProfileFunction::Perturbed {
            base: Box::new(self),
            amplitude,
            mode,
        }
    }

    pub fn reparametrized(self, eps: f64) -> Self {
        ProfileFunction::Reparametrized {
            base: Box::new(self),
            eps,
        }
    }

    pub fn is_radial(&self) -> bool {
        match self {
            ProfileFunction::Winding
            | ProfileFunction::TanhRadial
            | ProfileFunction::GaussianRadial => true,
            ProfileFunction::Perturbed { base, .. }
            | ProfileFunction::Reparametrized { base, .. } => base.is_radial(),
            ProfileFunction::Tabulated(sp) => sp.domain().1 > FRAC_PI_2 + 1e-12,
            _ => false,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        if self.is_radial() {
            (0.0, f64::INFINITY)
        } else {
            (0.0, FRAC_PI_2)
        }
    }

    pub fn eval<D: Real>(&self, s: D) -> D {
        match self {
            ProfileFunction::Linear { start, slope } => s * *slope + *start,
            ProfileFunction::Harmonic { k } => s.tan().powf(*k).atan() * 2.0,
            ProfileFunction::RationalHopf { k, l } => {
                let (sn, cs) = s.sin_cos();
                (sn.powf(*l) / cs.powf(*k)).atan() * 2.0
            }
            ProfileFunction::CosSquared => {
                let c = s.cos();
                c * c * PI
            }
            ProfileFunction::Squashed { k, l } => {
                let q = -(s * 2.0).cos() * (k * k - l * l) + (k * k + l * l);
                (-(q.powf(1.5)) * 2f64.sqrt() + 4.0 * k.powi(3))
                    * (PI / (4.0 * (k.powi(3) - l.powi(3))))
            }
            ProfileFunction::Conformal { k, l } => {
                let q = -(s * 2.0).cos() * (k * k - l * l) + (k * k + l * l);
                (q.sqrt().recip() * (k * 2f64.sqrt()) - 1.0) * (l * PI / (k - l))
            }
            ProfileFunction::CoupledH { k } => {
                // sin²(α/2) = sin²s (1 − k⁻²cos²s), cos²(α/2) = cos²s (1 + k⁻²sin²s).
                let (sn, cs) = (s.sin(), s.cos());
                let ik2 = 1.0 / (k * k);
                let y = if ik2 == 1.0 {
                    sn * sn
                } else {
                    sn * (sn * sn * ik2 + (1.0 - ik2)).sqrt()
                };
                let x = cs * (sn * sn * ik2 + 1.0).sqrt();
                atan2_first_quadrant(y, x) * 2.0
            }
            ProfileFunction::Winding => {
                // tan(α/2) = √(√(r²+1) + 1) / r.
                let y = ((s * s + 1.0).sqrt() + 1.0).sqrt();
                atan2_first_quadrant(y, s) * 2.0
            }
            ProfileFunction::TanhRadial => {
                // π(1 − tanh r) = 2π / (1 + e^{2r}), written to avoid overflow.
                let e = (-(s * 2.0)).exp();
                e / (e + 1.0) * (2.0 * PI)
            }
            ProfileFunction::GaussianRadial => (-(s * s)).exp() * PI,
            ProfileFunction::Constant(c) => D::from(*c),
            ProfileFunction::Perturbed {
                base,
                amplitude,
                mode,
            } => {
                let bump = (s * 2.0).sin().powi(4) * (s * (2.0 * *mode as f64)).sin();
                base.eval(s) + bump * *amplitude
            }
            ProfileFunction::Reparametrized { base, eps } => {
                base.eval(s + (s * 4.0).sin() * (eps / 4.0))
            }
            ProfileFunction::Tabulated(sp) => sp.eval(s),
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        self.eval(s)
    }

    pub fn derivative(&self, s: f64) -> f64 {
        self.eval(Dual64::new(s, 1.0)).eps
    }

    /// Boundary values `(α(0), α(end))`, with closed-form limits for radial profiles.
    pub fn endpoints(&self) -> (f64, f64) {
        match self {
            ProfileFunction::Winding => (PI, 0.0),
            ProfileFunction::TanhRadial | ProfileFunction::GaussianRadial => (PI, 0.0),
            ProfileFunction::Tabulated(sp) => {
                let v = sp.values();
                (v[0], v[v.len() - 1])
            }
            ProfileFunction::Perturbed { base, .. }
            | ProfileFunction::Reparametrized { base, .. } => base.endpoints(),
            _ => (self.value(0.0), self.value(FRAC_PI_2)),
        }
    }

    pub fn tag(&self) -> String {
        match self {
            ProfileFunction::Linear { start, slope } => format!("linear({start},{slope})"),
            ProfileFunction::Harmonic { k } => format!("harmonic({k})"),
            ProfileFunction::RationalHopf { k, l } => format!("rational_hopf({k},{l})"),
            ProfileFunction::CosSquared => "cos_squared".into(),
            ProfileFunction::Squashed { k, l } => format!("squashed({k},{l})"),
            ProfileFunction::Conformal { k, l } => format!("conformal({k},{l})"),
            ProfileFunction::CoupledH { k } => format!("coupled_h({k})"),
            ProfileFunction::Winding => "winding".into(),
            ProfileFunction::TanhRadial => "tanh_radial".into(),
            ProfileFunction::GaussianRadial => "gaussian_radial".into(),
            ProfileFunction::Constant(c) => format!("constant({c})"),
            ProfileFunction::Perturbed {
                base,
                amplitude,
                mode,
            } => format!("{}+perturbation({amplitude},{mode})", base.tag()),
            ProfileFunction::Reparametrized { base, eps } => {
                format!("{}∘reparam({eps})", base.tag())
            }
            ProfileFunction::Tabulated(sp) => format!("tabulated({})", sp.knots().len()),
        }
    }
}

/// `atan2(y, x)` for `x, y ≥ 0`, accurate when either argument is small.
fn atan2_first_quadrant<D: Real>(y: D, x: D) -> D {
    if y.re() <= x.re() {
        (y / x).atan()
    } else {
        -(x / y).atan() + FRAC_PI_2
    }
}

/// Leading exponents `(a, b)` with `sin α(s) ~ sin^a s` at `s → 0` and
/// `sin α(s) ~ cos^b s` at `s → π/2`, estimated from two small offsets.
pub fn pole_exponents(profile: &ProfileFunction) -> (f64, f64) {
    let (d1, d2) = (1e-3, 1e-4);
    let near0 = |d: f64| profile.value(d).sin().abs().ln();
    let near1 = |d: f64| profile.value(FRAC_PI_2 - d).sin().abs().ln();
    let a = (near0(d1) - near0(d2)) / (d1.sin().ln() - d2.sin().ln());
    let b = (near1(d1) - near1(d2)) / (d1.sin().ln() - d2.sin().ln());
    (a, b)
}

/// Smoothness at the poles: exponents `a ≥ |ℓ|` and `b ≥ |k|`.
pub fn smooth_at_poles(profile: &ProfileFunction, k: i32, l: i32) -> bool {
    let (a, b) = pole_exponents(profile);
    a + 1e-3 >= l.abs() as f64 && b + 1e-3 >= k.abs() as f64
}

// ---------------------------------------------------------------------------
// Potentials

/// Potentials on the target sphere, written in the normalized height `t = φ₃/R`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    Constant {
        c: f64,
    },
    /// `(1 − t^a)^b`; old baby is `(1, 1)`, new baby is `(2, 1)`.
    OldNewBaby {
        a: f64,
        b: f64,
    },
    /// `(1 − t)⁴ / 16`.
    QuarticSixteenth,
    /// `(k⁴/32)(1 − t²)^{2(k−1)/k}((1+t)^{1/k} + (1−t)^{1/k})⁴`.
    ChargeDependent {
        k: f64,
    },
}

fn pow_nonneg<D: Real>(x: D, p: f64) -> D {
    if p == 0.0 {
        D::from(1.0)
    } else if x.re() <= 0.0 {
        D::from(0.0)
    } else if p.fract() == 0.0 && p.abs() < 64.0 {
        x.powi(p as i32)
    } else {
        x.powf(p)
    }
}

impl Potential {
    pub fn old_baby() -> Self {
        Potential::OldNewBaby { a: 1.0, b: 1.0 }
    }

    pub fn new_baby() -> Self {
        Potential::OldNewBaby { a: 2.0, b: 1.0 }
    }

    pub fn zero() -> Self {
        Potential::Constant { c: 0.0 }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Potential::Constant { .. })
    }

    /// Value as a function of the normalized height `t ∈ [-1, 1]`.
    pub fn of_height<D: Real>(&self, t: D) -> D {
        match *self {
            Potential::Constant { c } => D::from(c),
            Potential::OldNewBaby { a, b } => {
                let ta = if a.fract() == 0.0 {
                    t.powi(a as i32)
                } else {
                    pow_nonneg(t, a)
                };
                pow_nonneg(-ta + 1.0, b)
            }
            Potential::QuarticSixteenth => (-t + 1.0).powi(4) * (1.0 / 16.0),
            Potential::ChargeDependent { k } => {
                let w = pow_nonneg(-t * t + 1.0, 2.0 * (k - 1.0) / k);
                let sum = pow_nonneg(t + 1.0, 1.0 / k) + pow_nonneg(-t + 1.0, 1.0 / k);
                w * sum.powi(4) * (k.powi(4) / 32.0)
            }
        }
    }

    /// Value at polar angle `β` on the target, `t = cos β`, written with
    /// `1 − t = 2 sin²(β/2)` and `1 + t = 2 cos²(β/2)` to stay accurate at the poles.
    pub fn of_angle(&self, beta: f64) -> f64 {
        let (sh, ch) = (0.5 * beta).sin_cos();
        let (one_minus, one_plus) = (2.0 * sh * sh, 2.0 * ch * ch);
        match *self {
            Potential::OldNewBaby { a, b } if a == 1.0 => pow_nonneg(one_minus, b),
            Potential::OldNewBaby { a, b } if a == 2.0 => pow_nonneg(one_minus * one_plus, b),
            Potential::QuarticSixteenth => one_minus.powi(4) / 16.0,
            Potential::ChargeDependent { k } => {
                let w = pow_nonneg(one_minus * one_plus, 2.0 * (k - 1.0) / k);
                let sum = pow_nonneg(one_plus, 1.0 / k) + pow_nonneg(one_minus, 1.0 / k);
                w * sum.powi(4) * (k.powi(4) / 32.0)
            }
            _ => self.of_height(beta.cos()),
        }
    }

    /// `dP̄/dt`.
    pub fn height_derivative(&self, t: f64) -> f64 {
        self.of_height(Dual64::new(t, 1.0)).eps
    }

    /// `P̄(y)` for a point `y` on the sphere of the given radius.
    pub fn value(&self, y: &Vector3<f64>, radius: f64) -> f64 {
        self.of_height((y[2] / radius).clamp(-1.0, 1.0))
    }

    /// Gradient of `P̄` on the round sphere of the given radius (tangent to the sphere).
    pub fn grad(&self, y: &Vector3<f64>, radius: f64) -> Vector3<f64> {
        let t = (y[2] / radius).clamp(-1.0, 1.0);
        let dp = self.height_derivative(t) / radius;
        let n = y / radius;
        (Vector3::z() - n * n[2]) * dp
    }

    pub fn tag(&self) -> String {
        match self {
            Potential::Constant { c } => format!("constant({c})"),
            Potential::OldNewBaby { a, b } => format!("old_new_baby({a},{b})"),
            Potential::QuarticSixteenth => "quartic_sixteenth".into(),
            Potential::ChargeDependent { k } => format!("charge_dependent({k})"),
        }
    }
}

// ---------------------------------------------------------------------------
// Maps

#[derive(Clone, Debug, PartialEq)]
pub enum Ansatz {
    /// `(sin α(s) e^{i(−kφ₁+ℓφ₂)}, cos α(s))` on the Hopf chart of S³.
    AlphaHopf {
        k: i32,
        l: i32,
        profile: ProfileFunction,
    },
    /// Rational map `w = z₁^ℓ / z₀^k` of `(z₀, z₁) = (cos f + i(z/r) sin f, (ρ/r)e^{iθ} sin f)`
    /// with `f = profile(λr)`, on the cylindrical chart of R³.
    Axisymmetric {
        k: i32,
        l: i32,
        profile: ProfileFunction,
        length_scale: f64,
    },
    /// `(sin α(r) e^{i(θ−φ)}, cos α(r))` on R² × S¹.
    CylinderWinding { profile: ProfileFunction },
    /// Constant map onto the direction `p₀` (normalized to the target radius).
    Constant { direction: [f64; 3] },
}

/// A parametric map into the round sphere of radius `target_radius`.
#[derive(Clone, Debug, PartialEq)]
pub struct AnsatzMap {
    pub ansatz: Ansatz,
    pub target_radius: f64,
}

/// The point `(z₀, z₁) = (cos f + i(z/r) sin f, (ρ/r)e^{iθ} sin f)` of S³ ⊂ C²
/// as real components `(Re z₀, Im z₀, Re z₁, Im z₁)`, with `f = profile(λr)`.
pub fn axisymmetric_s3_point<D: Real>(
    profile: &ProfileFunction,
    length_scale: f64,
    x: &[D; 3],
) -> [D; 4] {
    let (rho, theta, z) = (x[0], x[1], x[2]);
    let rr = (rho * rho + z * z).sqrt();
    let (sf, cf) = profile.eval(rr * length_scale).sin_cos();
    let m = rho / rr * sf;
    let (st, ct) = theta.sin_cos();
    [cf, z / rr * sf, m * ct, m * st]
}

/// Complex numbers over a generic scalar.
#[derive(Clone, Copy)]
struct Cx<D> {
    re: D,
    im: D,
}

impl<D: Real> Cx<D> {
    fn mul(self, o: Cx<D>) -> Cx<D> {
        Cx {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }

    fn conj(self) -> Cx<D> {
        Cx {
            re: self.re,
            im: -self.im,
        }
    }

    fn norm2(self) -> D {
        self.re * self.re + self.im * self.im
    }

    /// Integer power; negative exponents use `z^{-n} = conj(z)^n / |z|^{2n}`.
    fn powi(self, n: i32) -> Cx<D> {
        let base = if n < 0 { self.conj() } else { self };
        let mut out = Cx {
            re: D::from(1.0),
            im: D::from(0.0),
        };
        for _ in 0..n.unsigned_abs() {
            out = out.mul(base);
        }
        if n < 0 {
            let d = self.norm2().powi(n.abs());
            out = Cx {
                re: out.re / d,
                im: out.im / d,
            };
        }
        out
    }
}

impl AnsatzMap {
    pub fn new(ansatz: Ansatz, target_radius: f64) -> Self {
        AnsatzMap {
            ansatz,
            target_radius,
        }
    }

    pub fn alpha_hopf(k: i32, l: i32, profile: ProfileFunction, target_radius: f64) -> Self {
        AnsatzMap::new(Ansatz::AlphaHopf { k, l, profile }, target_radius)
    }

    /// The Hopf map `S³ → S²(R)`, `(k, ℓ) = (1, 1)`, `α = 2s`.
    pub fn hopf(target_radius: f64) -> Self {
        AnsatzMap::alpha_hopf(1, 1, ProfileFunction::hopf(), target_radius)
    }

    /// The winding map on R² × S¹ into the unit sphere.
    pub fn winding() -> Self {
        AnsatzMap::new(
            Ansatz::CylinderWinding {
                profile: ProfileFunction::Winding,
            },
            1.0,
        )
    }

    pub fn axisymmetric(
        k: i32,
        l: i32,
        profile: ProfileFunction,
        length_scale: f64,
        target_radius: f64,
    ) -> Self {
        AnsatzMap::new(
            Ansatz::Axisymmetric {
                k,
                l,
                profile,
                length_scale,
            },
            target_radius,
        )
    }

    /// The rescaled map `x ↦ φ(λx)` when the family carries a length scale.
    pub fn rescaled(&self, lambda: f64) -> Option<AnsatzMap> {
        let mut out = self.clone();
        match &mut out.ansatz {
            Ansatz::Axisymmetric { length_scale, .. } => {
                *length_scale *= lambda;
                Some(out)
            }
            _ => None,
        }
    }

    pub fn constant(direction: [f64; 3], target_radius: f64) -> Self {
        AnsatzMap::new(Ansatz::Constant { direction }, target_radius)
    }

    pub fn family(&self) -> &'static str {
        match self.ansatz {
            Ansatz::AlphaHopf { .. } => "alpha_hopf",
            Ansatz::Axisymmetric { .. } => "axisymmetric",
            Ansatz::CylinderWinding { .. } => "cylinder_winding",
            Ansatz::Constant { .. } => "constant",
        }
    }

    pub fn winding_numbers(&self) -> Option<(i32, i32)> {
        match self.ansatz {
            Ansatz::AlphaHopf { k, l, .. } | Ansatz::Axisymmetric { k, l, .. } => Some((k, l)),
            _ => None,
        }
    }

    pub fn profile(&self) -> Option<&ProfileFunction> {
        match &self.ansatz {
            Ansatz::AlphaHopf { profile, .. }
            | Ansatz::Axisymmetric { profile, .. }
            | Ansatz::CylinderWinding { profile } => Some(profile),
            Ansatz::Constant { .. } => None,
        }
    }

    /// Same map with the profile replaced.
    pub fn with_profile(&self, new: ProfileFunction) -> AnsatzMap {
        let mut out = self.clone();
        match &mut out.ansatz {
            Ansatz::AlphaHopf { profile, .. }
            | Ansatz::Axisymmetric { profile, .. }
            | Ansatz::CylinderWinding { profile } => *profile = new,
            Ansatz::Constant { .. } => {}
        }
        out
    }

    /// Checks that the map is defined on the given chart.
    pub fn check_geometry(&self, geom: &Geometry) -> Result<()> {
        let ok = match self.ansatz {
            Ansatz::AlphaHopf { .. } => geom.chart.kind == ChartKind::Hopf,
            Ansatz::Axisymmetric { .. } => geom.chart.kind == ChartKind::Cylindrical,
            Ansatz::CylinderWinding { .. } => geom.chart.kind == ChartKind::PolarCircle,
            Ansatz::Constant { .. } => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Incompatible(format!(
                "{} map is not defined on chart {}",
                self.family(),
                geom.chart.name
            )))
        }
    }

    /// `φ(x)` generic over the scalar type.
    pub fn eval_generic<D: Real>(&self, x: &[D; 3]) -> [D; 3] {
        let r = self.target_radius;
        let sphere = |alpha: D, beta: D| {
            let (sa, ca) = alpha.sin_cos();
            let (sb, cb) = beta.sin_cos();
            [sa * cb * r, sa * sb * r, ca * r]
        };
        match &self.ansatz {
            Ansatz::AlphaHopf { k, l, profile } => {
                let beta = x[1] * (-(*k as f64)) + x[2] * (*l as f64);
                sphere(profile.eval(x[0]), beta)
            }
            Ansatz::CylinderWinding { profile } => sphere(profile.eval(x[0]), x[1] - x[2]),
            Ansatz::Axisymmetric {
                k,
                l,
                profile,
                length_scale,
            } => {
                let [a0, b0, a1, b1] = axisymmetric_s3_point(profile, *length_scale, x);
                let a = Cx { re: a0, im: b0 }.powi(*k);
                let b = Cx { re: a1, im: b1 }.powi(*l);
                let num = b.mul(a.conj());
                let (na, nb) = (a.norm2(), b.norm2());
                let den = na + nb;
                [
                    num.re * 2.0 / den * r,
                    num.im * 2.0 / den * r,
                    (na - nb) / den * r,
                ]
            }
            Ansatz::Constant { direction } => {
                let n = (direction[0].powi(2) + direction[1].powi(2) + direction[2].powi(2)).sqrt();
                direction.map(|d| D::from(d / n * r))
            }
        }
    }

    /// `φ(x)` as a vector in R³.
    pub fn evaluate(&self, geom: &Geometry, x: &Point) -> Result<Vector3<f64>> {
        self.check_geometry(geom)?;
        geom.chart.check_domain(x)?;
        let v = self.eval_generic(x);
        Ok(Vector3::new(v[0], v[1], v[2]))
    }

    /// `∂φ^A/∂x^i` (row `A`, column `i`).
    pub fn differential(&self, geom: &Geometry, x: &Point) -> Result<Matrix3<f64>> {
        self.check_geometry(geom)?;
        geom.chart.check_regular(x)?;
        let mut j = Matrix3::zeros();
        for i in 0..3 {
            let v = self.eval_generic(&seed(x, Some(i)));
            for a in 0..3 {
                j[(a, i)] = v[a].eps;
            }
        }
        Ok(j)
    }

    /// Pullback metric `H_ij = ∂_iφ · ∂_jφ`.
    pub fn pullback_metric(&self, geom: &Geometry, x: &Point) -> Result<Matrix3<f64>> {
        let j = self.differential(geom, x)?;
        Ok(j.transpose() * j)
    }

    /// Pullback area form `Ω_jk = (1/R) φ · (∂_jφ × ∂_kφ)` of the radius-R sphere.
    pub fn pullback_area_form(&self, geom: &Geometry, x: &Point) -> Result<Matrix3<f64>> {
        let phi = self.evaluate(geom, x)?;
        let j = self.differential(geom, x)?;
        let r = self.target_radius;
        Ok(Matrix3::from_fn(|a, b| {
            phi.dot(&j.column(a).cross(&j.column(b))) / r
        }))
    }

    /// Eigen-decomposition of the Cauchy-Green tensor under `g`.
    pub fn strain_spectrum(&self, geom: &Geometry, x: &Point) -> Result<StrainSpectrum> {
        let h = self.pullback_metric(geom, x)?;
        let g = geom.metric_at(x)?;
        let spec = generalized_eigen(&g, &h);
        let (vals, vecs) = spec;
        let sigma2 = vals[1] * vals[2];
        if sigma2 < RANK_TOL {
            return Err(Error::RankDeficient { point: *x, sigma2 });
        }
        let u = orient(vecs[0], geom.chart.fiber_axis);
        Ok(StrainSpectrum {
            lambda1_sq: vals[1],
            lambda2_sq: vals[2],
            u,
            e1: vecs[1],
            e2: vecs[2],
            sigma2,
        })
    }

    /// Unit vertical vector, `U = V/|V|` with `V = (⋆φ*ω)♯`.
    pub fn vertical_unit(&self, geom: &Geometry, x: &Point) -> Result<Vector3<f64>> {
        Ok(self.jet(geom, x)?.vertical()?.0)
    }

    /// Mean curvature of the fibres, `μ^V = ∇_U U`.
    pub fn fiber_mean_curvature(&self, geom: &Geometry, x: &Point) -> Result<Vector3<f64>> {
        self.jet(geom, x)?.fiber_mean_curvature()
    }

    /// Values and exact first derivatives of every first-order field quantity at `x`.
    pub fn jet(&self, geom: &Geometry, x: &Point) -> Result<MapJet> {
        self.check_geometry(geom)?;
        geom.chart.check_regular(x)?;
        let o = geom.orientation();
        let r = self.target_radius;
        let kind = geom.chart.kind;

        // d[j] holds the local fields with derivative parts along coordinate j.
        let dirs: Vec<LocalFields<Dual64>> = (0..3)
            .map(|j| {
                let (phi, jac) = self.hyper_jet(x, j);
                let g = geom.metric.components(kind, &seed(x, Some(j)));
                local_fields(&g, o, &phi, &jac, r)
            })
            .collect();
        let d0 = &dirs[0];
        let re = |m: &M3<Dual64>| Matrix3::from_fn(|a, b| m[a][b].re);
        let eps = |j: usize, f: &dyn Fn(&LocalFields<Dual64>) -> Dual64| f(&dirs[j]).eps;

        let g = re(&d0.g);
        let dg = std::array::from_fn(|j| Matrix3::from_fn(|a, b| dirs[j].g[a][b].eps));
        let gamma = crate::chart::christoffel_from(&g, &dg);
        Ok(MapJet {
            x: *x,
            orientation: o,
            fiber_axis: geom.chart.fiber_axis,
            target_radius: r,
            phi: Vector3::from_fn(|a, _| d0.phi[a].re),
            dphi: re(&d0.jac),
            d_dphi: std::array::from_fn(|j| Matrix3::from_fn(|a, b| dirs[j].jac[a][b].eps)),
            g,
            ginv: re(&d0.ginv),
            dg,
            vol: d0.vol.re,
            christoffel: gamma,
            pullback_metric: re(&d0.h),
            area_form: re(&d0.omega),
            sigma2: d0.sigma2.re,
            d_sigma2: Vector3::from_fn(|j, _| eps(j, &|l| l.sigma2)),
            dirichlet: d0.dirichlet.re,
            d_dirichlet: Vector3::from_fn(|j, _| eps(j, &|l| l.dirichlet)),
            flow: Vector3::from_fn(|i, _| d0.v[i].re),
            d_flow: Matrix3::from_fn(|i, j| dirs[j].v[i].eps),
            strain: re(&d0.cg),
            d_strain: std::array::from_fn(|j| Matrix3::from_fn(|a, b| dirs[j].cg[a][b].eps)),
            stress: re(&d0.stress),
            d_stress: std::array::from_fn(|j| Matrix3::from_fn(|a, b| dirs[j].stress[a][b].eps)),
        })
    }

    /// `φ` and `∂_iφ` as dual numbers carrying `∂_j`.
    fn hyper_jet(&self, x: &Point, j: usize) -> ([Dual64; 3], M3<Dual64>) {
        let mut phi = [Dual64::from(0.0); 3];
        let mut jac = [[Dual64::from(0.0); 3]; 3];
        for i in 0..3 {
            let xs: [HyperDual64; 3] = std::array::from_fn(|c| {
                HyperDual64::new(
                    x[c],
                    if c == i { 1.0 } else { 0.0 },
                    if c == j { 1.0 } else { 0.0 },
                    0.0,
                )
            });
            let v = self.eval_generic(&xs);
            for a in 0..3 {
                jac[a][i] = Dual64::new(v[a].eps1, v[a].eps1eps2);
                if i == 0 {
                    phi[a] = Dual64::new(v[a].re, v[a].eps2);
                }
            }
        }
        (phi, jac)
    }
}

/// Eigen-data `{0, λ₁², λ₂²}` of the Cauchy-Green tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct StrainSpectrum {
    pub lambda1_sq: f64,
    pub lambda2_sq: f64,
    /// Unit vertical vector (coordinate components).
    pub u: Vector3<f64>,
    pub e1: Vector3<f64>,
    pub e2: Vector3<f64>,
    pub sigma2: f64,
}

/// Solves `H v = λ g v`; eigenvalues ascending, eigenvectors `g`-orthonormal.
pub fn generalized_eigen(g: &Matrix3<f64>, h: &Matrix3<f64>) -> ([f64; 3], [Vector3<f64>; 3]) {
    let chol = Cholesky::new(*g).expect("metric is positive definite");
    let l = chol.l();
    let linv = l.try_inverse().expect("Cholesky factor is invertible");
    let m = linv * h * linv.transpose();
    let m = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.map(|i| eig.eigenvalues[i]);
    let vecs = idx.map(|i| linv.transpose() * eig.eigenvectors.column(i));
    (vals, vecs)
}

/// Fixes the sign of a vertical vector by its component along `axis`, falling
/// back to the largest component when that one vanishes.
fn orient(u: Vector3<f64>, axis: usize) -> Vector3<f64> {
    let scale = u.amax();
    let pick = if u[axis].abs() > 1e-9 * scale {
        axis
    } else {
        u.iamax()
    };
    if u[pick] < 0.0 {
        -u
    } else {
        u
    }
}

// ---------------------------------------------------------------------------
// Generic local algebra

type M3<D> = [[D; 3]; 3];

fn det3<D: Real>(m: &M3<D>) -> D {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn inv3<D: Real>(m: &M3<D>) -> M3<D> {
    let d = det3(m).recip();
    let c = |i: usize, j: usize| {
        let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
        let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
        m[i1][j1] * m[i2][j2] - m[i1][j2] * m[i2][j1]
    };
    std::array::from_fn(|i| std::array::from_fn(|j| c(j, i) * d))
}

fn matmul<D: Real>(a: &M3<D>, b: &M3<D>) -> M3<D> {
    std::array::from_fn(|i| {
        std::array::from_fn(|j| a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j])
    })
}

struct LocalFields<D> {
    phi: [D; 3],
    jac: M3<D>,
    g: M3<D>,
    ginv: M3<D>,
    vol: D,
    h: M3<D>,
    omega: M3<D>,
    sigma2: D,
    dirichlet: D,
    v: [D; 3],
    cg: M3<D>,
    stress: M3<D>,
}

fn local_fields<D: Real>(
    g: &M3<D>,
    o: f64,
    phi: &[D; 3],
    jac: &M3<D>,
    radius: f64,
) -> LocalFields<D> {
    let zero = D::from(0.0);
    let ginv = inv3(g);
    let vol = det3(g).sqrt();
    let col = |i: usize| [jac[0][i], jac[1][i], jac[2][i]];
    let dot = |a: [D; 3], b: [D; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let cross = |a: [D; 3], b: [D; 3]| {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    let h: M3<D> = std::array::from_fn(|i| std::array::from_fn(|j| dot(col(i), col(j))));
    let omega: M3<D> =
        std::array::from_fn(|i| std::array::from_fn(|j| dot(*phi, cross(col(i), col(j))) / radius));
    let mut sigma2 = zero;
    let mut dirichlet = zero;
    for i in 0..3 {
        for j in 0..3 {
            dirichlet += ginv[i][j] * h[i][j];
            for k in 0..3 {
                for l in 0..3 {
                    sigma2 += ginv[i][k] * ginv[j][l] * omega[i][j] * omega[k][l];
                }
            }
        }
    }
    sigma2 *= 0.5;
    let v: [D; 3] = std::array::from_fn(|m| {
        let mut acc = zero;
        for j in 0..3 {
            for k in 0..3 {
                let e = levi_civita(m, j, k);
                if e != 0.0 {
                    acc += omega[j][k] * e;
                }
            }
        }
        acc * (0.5 * o) / vol
    });
    let cg = matmul(&ginv, &h);
    let hgh = matmul(&h, &cg);
    let stress: M3<D> = std::array::from_fn(|i| {
        std::array::from_fn(|j| g[i][j] * sigma2 * 0.5 - h[i][j] * dirichlet + hgh[i][j])
    });
    LocalFields {
        phi: *phi,
        jac: *jac,
        g: *g,
        ginv,
        vol,
        h,
        omega,
        sigma2,
        dirichlet,
        v,
        cg,
        stress,
    }
}

/// Field quantities at a regular point with their exact coordinate derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct MapJet {
    pub x: Point,
    pub orientation: f64,
    pub fiber_axis: usize,
    pub target_radius: f64,
    pub phi: Vector3<f64>,
    /// `∂_iφ^A` (row `A`, column `i`).
    pub dphi: Matrix3<f64>,
    /// `d_dphi[j] = ∂_j ∂_iφ^A`.
    pub d_dphi: [Matrix3<f64>; 3],
    pub g: Matrix3<f64>,
    pub ginv: Matrix3<f64>,
    pub dg: [Matrix3<f64>; 3],
    pub vol: f64,
    pub christoffel: Christoffel,
    pub pullback_metric: Matrix3<f64>,
    pub area_form: Matrix3<f64>,
    /// `σ₂ = |φ*ω|²`.
    pub sigma2: f64,
    pub d_sigma2: Vector3<f64>,
    /// `|dφ|²`.
    pub dirichlet: f64,
    pub d_dirichlet: Vector3<f64>,
    /// `V = (⋆φ*ω)♯`.
    pub flow: Vector3<f64>,
    /// `∂_j V^i`.
    pub d_flow: Matrix3<f64>,
    /// Cauchy-Green tensor `𝔠^i_j`.
    pub strain: Matrix3<f64>,
    pub d_strain: [Matrix3<f64>; 3],
    /// σ₂ stress-energy tensor `S_ij`.
    pub stress: Matrix3<f64>,
    pub d_stress: [Matrix3<f64>; 3],
}

impl MapJet {
    pub fn is_regular(&self) -> bool {
        self.sigma2 >= RANK_TOL
    }

    fn rank_check(&self) -> Result<()> {
        if self.is_regular() {
            Ok(())
        } else {
            Err(Error::RankDeficient {
                point: self.x,
                sigma2: self.sigma2,
            })
        }
    }

    /// `(U, ∂_j U^i)` with `U = ±V/|V|`.
    pub fn vertical(&self) -> Result<(Vector3<f64>, Matrix3<f64>)> {
        self.rank_check()?;
        let norm = self.sigma2.sqrt();
        let sign = {
            let o = orient(self.flow, self.fiber_axis);
            if o == self.flow {
                1.0
            } else {
                -1.0
            }
        };
        let u = self.flow / norm * sign;
        let d_norm = self.d_sigma2 / (2.0 * norm);
        let du = (self.d_flow * sign - u * d_norm.transpose()) / norm;
        Ok((u, du))
    }

    pub fn fiber_mean_curvature(&self) -> Result<Vector3<f64>> {
        let (u, du) = self.vertical()?;
        Ok(self.covariant(&u, &u, &du))
    }

    /// `(∇_A B)^i` given `∂_j B^i`.
    pub fn covariant(&self, a: &Vector3<f64>, b: &Vector3<f64>, db: &Matrix3<f64>) -> Vector3<f64> {
        let gamma = &self.christoffel;
        Vector3::from_fn(|i, _| {
            let mut acc = (db.row(i) * a)[0];
            for j in 0..3 {
                for k in 0..3 {
                    acc += gamma[i][(j, k)] * a[j] * b[k];
                }
            }
            acc
        })
    }

    pub fn inner(&self, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
        (self.g * b).dot(a)
    }

    /// Gradient of a function with coordinate partials `df`.
    pub fn grad(&self, df: &Vector3<f64>) -> Vector3<f64> {
        self.ginv * df
    }

    /// Horizontal projection `X − g(X, U)U`.
    pub fn horizontal(&self, x: &Vector3<f64>) -> Result<Vector3<f64>> {
        let (u, _) = self.vertical()?;
        Ok(x - u * self.inner(x, &u))
    }

    /// Covariant divergence of a symmetric covariant 2-tensor with the given
    /// values and derivatives: `(div S)_j = g^{ik} ∇_k S_ij`.
    pub fn div_covariant2(&self, s: &Matrix3<f64>, ds: &[Matrix3<f64>; 3]) -> Vector3<f64> {
        let gamma = &self.christoffel;
        Vector3::from_fn(|j, _| {
            let mut acc = 0.0;
            for i in 0..3 {
                for k in 0..3 {
                    let mut nabla = ds[k][(i, j)];
                    for m in 0..3 {
                        nabla -= gamma[m][(k, i)] * s[(m, j)] + gamma[m][(k, j)] * s[(i, m)];
                    }
                    acc += self.ginv[(i, k)] * nabla;
                }
            }
            acc
        })
    }

    /// Divergence of the (1,1) Cauchy-Green tensor, `(div 𝔠)_j = ∇_i 𝔠^i_j`.
    pub fn div_strain(&self) -> Vector3<f64> {
        let gamma = &self.christoffel;
        let c = &self.strain;
        Vector3::from_fn(|j, _| {
            let mut acc = 0.0;
            for i in 0..3 {
                acc += self.d_strain[i][(i, j)];
                for k in 0..3 {
                    acc += gamma[i][(i, k)] * c[(k, j)] - gamma[k][(i, j)] * c[(i, k)];
                }
            }
            acc
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::MetricSpec;
    use std::f64::consts::FRAC_PI_4;

    fn s3() -> Geometry {
        Geometry::s3(MetricSpec::S3Round)
    }

    #[test]
    fn potential_of_angle_matches_height_form() {
        let pots = [
            Potential::old_baby(),
            Potential::new_baby(),
            Potential::QuarticSixteenth,
            Potential::ChargeDependent { k: 3.0 },
            Potential::OldNewBaby { a: 3.0, b: 2.0 },
        ];
        for p in pots {
            for beta in [0.1, 1.0, 2.0, 3.0] {
                assert!(
                    (p.of_angle(beta) - p.of_height(beta.cos())).abs() < 1e-13,
                    "{p:?} {beta}"
                );
            }
        }
        let tiny = 1e-7;
        assert!((Potential::new_baby().of_angle(PI - tiny) / (tiny * tiny) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn hopf_map_values() {
        let m = AnsatzMap::hopf(1.0);
        let p = m.evaluate(&s3(), &[FRAC_PI_4, 0.0, 0.0]).unwrap();
        assert!((p - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
        let north = m.evaluate(&s3(), &[0.0, 0.3, 0.2]).unwrap();
        assert!((north - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn winding_limits_to_north_pole() {
        let m = AnsatzMap::winding();
        let p = m.evaluate(&Geometry::r2xs1(), &[1e12, 0.3, 0.1]).unwrap();
        assert!((p - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-5);
        assert_eq!(ProfileFunction::Winding.endpoints(), (PI, 0.0));
    }

    #[test]
    fn differential_matches_finite_differences() {
        let m = AnsatzMap::alpha_hopf(2, 3, ProfileFunction::squashed(2.0, 3.0), 0.5);
        let geo = Geometry::s3(MetricSpec::S3Squashed {
            k: 2.0,
            l: 3.0,
            a: 1.0,
        });
        let x = [0.6, 0.4, 1.3];
        let j = m.differential(&geo, &x).unwrap();
        for i in 0..3 {
            let h = 1e-5;
            let (mut xp, mut xm) = (x, x);
            xp[i] += h;
            xm[i] -= h;
            let fd = (m.evaluate(&geo, &xp).unwrap() - m.evaluate(&geo, &xm).unwrap()) / (2.0 * h);
            assert!((fd - j.column(i)).norm() < 1e-6);
        }
        let phi = m.evaluate(&geo, &x).unwrap();
        assert!((phi.transpose() * j).norm() < 1e-12);
    }

    #[test]
    fn constant_map_is_rank_deficient() {
        let m = AnsatzMap::constant([1.0, 0.0, 0.0], 1.0);
        let x = [0.5, 0.1, 0.2];
        assert_eq!(m.differential(&s3(), &x).unwrap(), Matrix3::zeros());
        assert!(matches!(
            m.strain_spectrum(&s3(), &x),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn winding_area_density() {
        let m = AnsatzMap::winding();
        let geo = Geometry::r2xs1();
        for r in [0.1, 0.7, 2.0, 9.0] {
            let sp = m.strain_spectrum(&geo, &[r, 0.3, 1.0]).unwrap();
            let want = 2.0 / (r * r + 1.0);
            assert!((sp.sigma2.sqrt() - want).abs() < 1e-12);
            let u = m.vertical_unit(&geo, &[r, 0.3, 1.0]).unwrap();
            let c = 1.0 / (r * r + 1.0).sqrt();
            assert!((u - Vector3::new(0.0, c, c)).norm() < 1e-12);
        }
    }

    #[test]
    fn harmonic_example_density_and_fibres() {
        for k in [1, 2, 3] {
            let kf = k as f64;
            let m = AnsatzMap::alpha_hopf(k, k, ProfileFunction::Harmonic { k: kf }, 0.5);
            let x = [0.55, 0.2, 0.9];
            let sp = m.strain_spectrum(&s3(), &x).unwrap();
            let (s, c) = x[0].sin_cos();
            let l1l2 = kf * kf * (s * c).powf(2.0 * (kf - 1.0))
                / (s.powf(2.0 * kf) + c.powf(2.0 * kf)).powi(2);
            assert!((sp.lambda1_sq - sp.lambda2_sq).abs() < 1e-10 * sp.lambda2_sq);
            assert!((sp.sigma2.sqrt() - l1l2).abs() < 1e-10 * l1l2);
            let u = m.vertical_unit(&s3(), &x).unwrap();
            assert!((u - Vector3::new(0.0, 1.0, 1.0)).norm() < 1e-12);
            assert!(m.fiber_mean_curvature(&s3(), &x).unwrap().norm() < 1e-12);
        }
    }

    #[test]
    fn squashed_density_formula() {
        let (k, l, a) = (2.0, 1.0, 0.9);
        let geo = Geometry::s3(MetricSpec::S3Squashed { k, l, a });
        let prof = ProfileFunction::squashed(k, l);
        let m = AnsatzMap::alpha_hopf(2, 1, prof.clone(), 0.5);
        let x = [0.7, 0.0, 0.0];
        let sp = m.strain_spectrum(&geo, &x).unwrap();
        let (s, c) = x[0].sin_cos();
        let (al, dal) = (prof.value(x[0]), prof.derivative(x[0]));
        let want = dal * dal * al.sin().powi(2)
            / (16.0 * a.powi(4) * s * s * c * c * (k * k * s * s + l * l * c * c));
        assert!((sp.sigma2 - want).abs() < 1e-10 * want);
        let u = m.vertical_unit(&geo, &x).unwrap();
        let want_u = Vector3::new(0.0, l, k) / (a * k * l);
        assert!((u - want_u).norm() < 1e-12);
    }

    #[test]
    fn potentials() {
        let north = Vector3::new(0.0, 0.0, 1.0);
        assert_eq!(Potential::old_baby().value(&north, 1.0), 0.0);
        assert_eq!(
            Potential::new_baby().value(&Vector3::new(1.0, 0.0, 0.0), 1.0),
            1.0
        );
        let p = Potential::ChargeDependent { k: 2.0 };
        for t in [-0.9, -0.2, 0.0, 0.4, 0.95] {
            let w: f64 = 1.0 - t * t;
            let want = 2.0 * w + 4.0 * w.powf(1.5) + 2.0 * w * w;
            assert!((p.of_height(t) - want).abs() < 1e-12);
        }
        let y = Vector3::new(0.3, 0.4, (1.0f64 - 0.25).sqrt()) * 0.5;
        let g = Potential::new_baby().grad(&y, 0.5);
        assert!(g.dot(&y).abs() < 1e-14);
    }

    #[test]
    fn pole_exponents_of_closed_form_profiles() {
        let (a, b) = pole_exponents(&ProfileFunction::CosSquared);
        assert!((a - 2.0).abs() < 1e-3 && (b - 2.0).abs() < 1e-3);
        assert!(smooth_at_poles(&ProfileFunction::squashed(2.0, 1.0), 2, 1));
        assert!(!smooth_at_poles(&ProfileFunction::squashed(3.0, 1.0), 3, 1));
        assert!(smooth_at_poles(&ProfileFunction::CoupledH { k: 1.0 }, 1, 1));
        assert!(!smooth_at_poles(
            &ProfileFunction::CoupledH { k: 2.0 },
            2,
            2
        ));
        for k in 1..=4 {
            let kf = k as f64;
            assert!(smooth_at_poles(&ProfileFunction::Harmonic { k: kf }, k, k));
        }
    }

    #[test]
    fn axisymmetric_map_is_on_sphere_and_vacuum_at_infinity() {
        let m = AnsatzMap::new(
            Ansatz::Axisymmetric {
                k: 1,
                l: 1,
                profile: ProfileFunction::TanhRadial,
                length_scale: 1.0,
            },
            1.0,
        );
        let geo = Geometry::cylindrical();
        for x in [[0.3, 0.1, -0.2], [1.5, 2.0, 0.7], [0.01, 5.0, 3.0]] {
            assert!((m.evaluate(&geo, &x).unwrap().norm() - 1.0).abs() < 1e-12);
        }
        let far = m.evaluate(&geo, &[30.0, 0.0, 10.0]).unwrap();
        assert!((far - Vector3::z()).norm() < 1e-10);
    }
}
