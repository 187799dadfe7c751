//! Hopf charge and helicity through a reduced Whitehead integral, and the
//! energy-charge bound checks.
//!
//! For fields on the Hopf chart that depend on `s` only and have no
//! `dφ₁∧dφ₂` component, a closed 2-form `Ω = Ω_s1 ds∧dφ₁ + Ω_s2 ds∧dφ₂` has the
//! primitive `A = β₁ dφ₁ + β₂ dφ₂` with `β₁ = −∫_s^{π/2} Ω_s1` and
//! `β₂ = ∫_0^s Ω_s2`, regular at both poles. Then
//! `∫ A∧Ω = o (2π)² ∫_0^{π/2} (β₂Ω_s1 − β₁Ω_s2) ds`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::chart::{seed, ChartKind, Geometry, MetricSpec, Point};
use crate::error::{Error, Result};
use crate::field_maps::{axisymmetric_s3_point, Ansatz, AnsatzMap, ProfileFunction};
use crate::fluid::{beltrami_classify, BeltramiClass, FlowField};
use crate::integration::{integrate_1d, integrate_coordinates, Integral, QuadratureSpec};

/// Gauss order and base panel count of the reduced integrals.
const ORDER: usize = 16;
const PANELS: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChargeResult {
    pub raw_integral: f64,
    pub rounded: i64,
    pub defect: f64,
    pub quadrature_error_estimate: f64,
}

impl ChargeResult {
    fn from_integral(i: Integral) -> ChargeResult {
        ChargeResult {
            raw_integral: i.value,
            rounded: i.value.round() as i64,
            defect: (i.value - i.value.round()).abs(),
            quadrature_error_estimate: i.error,
        }
    }
}

/// `∫_0^{π/2}(β₂Ω_s1 − β₁Ω_s2) ds` at a given panel count.
fn reduced_once<F>(omega: &F, panels: usize) -> f64
where
    F: Fn(f64) -> (f64, f64),
{
    let inner = |lo: f64, hi: f64, comp: usize| {
        integrate_1d(
            |t| if comp == 0 { omega(t).0 } else { omega(t).1 },
            lo,
            hi,
            ORDER,
            panels,
        )
    };
    integrate_1d(
        |s| {
            let (o1, o2) = omega(s);
            let beta1 = -inner(s, FRAC_PI_2, 0);
            let beta2 = inner(0.0, s, 1);
            beta2 * o1 - beta1 * o2
        },
        0.0,
        FRAC_PI_2,
        ORDER,
        panels,
    )
}

/// Reduced `∫ A∧Ω / (2π)²` with a two-level error estimate.
fn reduced_whitehead<F>(omega: F) -> Integral
where
    F: Fn(f64) -> (f64, f64),
{
    let coarse = reduced_once(&omega, PANELS);
    let fine = reduced_once(&omega, 2 * PANELS);
    Integral {
        value: fine,
        error: (fine - coarse).abs(),
        levels: vec![coarse, fine],
    }
}

fn check_endpoints(profile: &ProfileFunction) -> Result<()> {
    let (a0, a1) = profile.endpoints();
    let ok = |a: f64| a.abs() <= 1e-8 || (a - PI).abs() <= 1e-8;
    if ok(a0) && ok(a1) {
        Ok(())
    } else {
        Err(Error::InadmissibleProfile { start: a0, end: a1 })
    }
}

/// Hopf charge `Q = (1/16π²)∫ A∧φ*ω` of an α-Hopf map, with `ω` the area form of the unit sphere.
fn alpha_hopf_charge(map: &AnsatzMap) -> Result<ChargeResult> {
    let geom = Geometry::s3(MetricSpec::S3Round);
    let r2 = map.target_radius.powi(2);
    let omega = |s: f64| {
        let w = map
            .pullback_area_form(&geom, &[s, 0.0, 0.0])
            .expect("interior Gauss node");
        (w[(0, 1)] / r2, w[(0, 2)] / r2)
    };
    let red = reduced_whitehead(omega);
    let scale = geom.orientation() * 4.0 * PI * PI / (16.0 * PI * PI);
    Ok(ChargeResult::from_integral(Integral {
        value: red.value * scale,
        error: red.error * scale.abs(),
        levels: red.levels.iter().map(|v| v * scale).collect(),
    }))
}

/// Degree of `(ρ, θ, z) ↦ (z₀, z₁) ∈ S³` for the axisymmetric ansatz, `(1/2π²)∫Ψ*ν_{S³}`.
pub fn axisymmetric_degree(profile: &ProfileFunction, spec: &QuadratureSpec) -> Result<Integral> {
    let geom = Geometry::cylindrical();
    let raw = integrate_coordinates(&geom.chart, spec, |x: &Point| {
        let p = axisymmetric_s3_point(profile, 1.0, &seed(x, None));
        let mut m = [[0.0; 4]; 4];
        for a in 0..4 {
            m[0][a] = p[a].re;
        }
        for c in 0..3 {
            let d = axisymmetric_s3_point(profile, 1.0, &seed(x, Some(c)));
            for a in 0..4 {
                m[c + 1][a] = d[a].eps;
            }
        }
        Ok(det4(&m))
    })?;
    let k = 1.0 / (2.0 * PI * PI);
    Ok(Integral {
        value: raw.value * k,
        error: raw.error * k,
        levels: raw.levels.iter().map(|v| v * k).collect(),
    })
}

/// Cofactor expansion of a 4×4 determinant. Division free, so exactly singular
/// matrices give 0 rather than NaN.
fn det4(m: &[[f64; 4]; 4]) -> f64 {
    let minor = |c: usize| {
        let cols: Vec<usize> = (0..4).filter(|&j| j != c).collect();
        let r = |i: usize, j: usize| m[i][cols[j]];
        r(1, 0) * (r(2, 1) * r(3, 2) - r(2, 2) * r(3, 1))
            - r(1, 1) * (r(2, 0) * r(3, 2) - r(2, 2) * r(3, 0))
            + r(1, 2) * (r(2, 0) * r(3, 1) - r(2, 1) * r(3, 0))
    };
    (0..4)
        .map(|c| if c % 2 == 0 { 1.0 } else { -1.0 } * m[0][c] * minor(c))
        .sum()
}

/// Hopf charge of an α-Hopf or axisymmetric map.
///
/// The axisymmetric map is the rational map `z₁^ℓ/z₀^k` composed with
/// `Ψ: R³ → S³`. Its charge is `deg Ψ` times the charge of the α-Hopf map with
/// profile `2 arctan(sin^ℓ s / cos^k s)`.
pub fn hopf_charge(map: &AnsatzMap) -> Result<ChargeResult> {
    match &map.ansatz {
        Ansatz::AlphaHopf { profile, .. } => {
            check_endpoints(profile)?;
            alpha_hopf_charge(map)
        }
        Ansatz::Axisymmetric { k, l, profile, .. } => {
            let (f0, f_inf) = profile.endpoints();
            if (f0 - PI).abs() > 1e-8 || f_inf.abs() > 1e-8 {
                return Err(Error::InadmissibleProfile {
                    start: f0,
                    end: f_inf,
                });
            }
            let spec = QuadratureSpec::for_chart(&Geometry::cylindrical().chart);
            let deg = axisymmetric_degree(profile, &spec)?;
            let reduced = AnsatzMap::alpha_hopf(
                *k,
                *l,
                ProfileFunction::RationalHopf {
                    k: *k as f64,
                    l: *l as f64,
                },
                map.target_radius,
            );
            let q = alpha_hopf_charge(&reduced)?;
            let d = deg.value.round();
            Ok(ChargeResult::from_integral(Integral {
                value: q.raw_integral * d,
                error: q.quadrature_error_estimate + (deg.value - d).abs() * q.raw_integral.abs(),
                levels: vec![],
            }))
        }
        Ansatz::Constant { .. } => Ok(ChargeResult::from_integral(Integral {
            value: 0.0,
            error: 0.0,
            levels: vec![],
        })),
        Ansatz::CylinderWinding { .. } => Err(Error::Incompatible(
            "the Whitehead integral is defined for maps on S3 and R3".into(),
        )),
    }
}

/// Helicity `H(V) = (1/π²)∫ A∧ι_V ν_g` of a flow on the Hopf chart whose
/// components depend on `s` only and have no `∂_s` part.
pub fn helicity(flow: &FlowField) -> Result<Integral> {
    let geom = &flow.geometry;
    if geom.chart.kind != ChartKind::Hopf {
        return Err(Error::Incompatible(
            "helicity is computed on the Hopf chart of S3".into(),
        ));
    }
    let probe = [0.7, 0.4, 1.9];
    let base = [0.7, 0.0, 0.0];
    let v = flow.velocity(&base)?;
    let moved = flow.velocity(&probe)?;
    let scale = v.amax().max(1e-300);
    if v[0].abs() > 1e-12 * scale || (moved - v).amax() > 1e-12 * scale {
        return Err(Error::Incompatible(
            "reduced helicity needs a flow depending on s only, tangent to the tori".into(),
        ));
    }
    if let crate::fluid::FlowSource::FromMap { map, .. } = &flow.source {
        if let Some(p) = map.profile() {
            check_endpoints(p)?;
        }
    }
    let o = geom.orientation();
    let omega = |s: f64| {
        let x = [s, 0.0, 0.0];
        let vol = geom.volume_density(&x).expect("interior Gauss node");
        let v = flow.velocity(&x).expect("interior Gauss node");
        (o * vol * v[2], -o * vol * v[1])
    };
    let red = reduced_whitehead(omega);
    let k = o * 4.0 * PI * PI / (PI * PI);
    Ok(Integral {
        value: red.value * k,
        error: red.error * k.abs(),
        levels: red.levels.iter().map(|v| v * k).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundConstant {
    Value(f64),
    Label(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundVerdict {
    Satisfied(bool),
    Label(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub energy: f64,
    pub charge_or_helicity: f64,
    pub bound_constant: BoundConstant,
    pub ratio: f64,
    pub satisfied: BoundVerdict,
}

/// `E_σ₂ ≥ 8π²μ₁|Q|`, with the energy rescaled to the unit target sphere by `1/R⁴`.
pub fn bound_check_sigma2(
    sigma2_energy: f64,
    target_radius: f64,
    charge: i64,
    mu1: f64,
) -> Result<BoundCheck> {
    if charge == 0 {
        return Err(Error::ZeroCharge);
    }
    let unit_energy = sigma2_energy / target_radius.powi(4);
    let constant = 8.0 * PI * PI * mu1;
    let ratio = unit_energy / (constant * charge.unsigned_abs() as f64);
    Ok(BoundCheck {
        energy: unit_energy,
        charge_or_helicity: charge as f64,
        bound_constant: BoundConstant::Value(constant),
        ratio,
        satisfied: BoundVerdict::Satisfied(ratio >= 1.0 - 1e-6),
    })
}

/// `E / |Q|^{3/4}`; the constant of the mass-term bound is not known, so no verdict is given.
pub fn bound_ratio_mass_term(energy: f64, charge: i64) -> Result<BoundCheck> {
    if charge == 0 {
        return Err(Error::ZeroCharge);
    }
    Ok(BoundCheck {
        energy,
        charge_or_helicity: charge as f64,
        bound_constant: BoundConstant::Label("unspecified".into()),
        ratio: energy / (charge.unsigned_abs() as f64).powf(0.75),
        satisfied: BoundVerdict::Label("ratio-only".into()),
    })
}

/// The constant `f` of a linear Beltrami field `curl V = f V`, if the field is one.
pub fn measure_beltrami_constant(flow: &FlowField, samples: &[Point]) -> Result<Option<f64>> {
    Ok(match beltrami_classify(flow, samples)?.classification {
        BeltramiClass::Linear { constant } => Some(constant),
        _ => None,
    })
}
