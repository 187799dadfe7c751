//! σ₂ and full-model energies, the σ₂ tension and stress tensor, the
//! Euler-Lagrange residual of the minimal-fibre reduction, and Derrick scans.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::chart::{Geometry, Point};
use crate::error::{Error, Result};
use crate::field_maps::{
    generalized_eigen, Ansatz, AnsatzMap, MapJet, Potential, ProfileFunction, RANK_TOL,
};
use crate::integration::{integrate, Integral, QuadratureSpec};
use crate::sampling::{sample_grid, sup_over, Sweep};

/// Energy terms, each carrying its own factor of ½.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// `½∫σ₂ ν`.
    pub sigma2_term: f64,
    /// `∫P̄∘φ ν`.
    pub potential_term: f64,
    /// `½∫|dφ|² ν`; only integrated when `kappa > 0`.
    pub dirichlet_term: f64,
    pub kappa: f64,
    /// `κ · dirichlet_term + sigma2_term + potential_term`.
    pub total: f64,
    pub quadrature_error_estimate: f64,
}

/// Pointwise `(σ₂, |dφ|², P̄∘φ)`.
pub fn point_densities(
    map: &AnsatzMap,
    potential: &Potential,
    geom: &Geometry,
    x: &Point,
) -> Result<[f64; 3]> {
    let phi = map.evaluate(geom, x)?;
    let j = map.differential(geom, x)?;
    let ginv = geom.inverse_metric(x)?;
    let r = map.target_radius;
    let omega = Matrix3::from_fn(|a, b| phi.dot(&j.column(a).cross(&j.column(b))) / r);
    let h = j.transpose() * j;
    Ok([
        area_norm2(&omega, &ginv),
        (ginv.component_mul(&h)).sum(),
        potential.value(&phi, r),
    ])
}

/// `|Ω|² = ½ g^{ik} g^{jl} Ω_ij Ω_kl`.
fn area_norm2(omega: &Matrix3<f64>, ginv: &Matrix3<f64>) -> f64 {
    let raised = ginv * omega * ginv;
    0.5 * raised.component_mul(omega).sum()
}

/// `λ₁²λ₂² = |φ*ω|²`; zero at critical points.
pub fn sigma2_density(map: &AnsatzMap, geom: &Geometry, x: &Point) -> Result<f64> {
    Ok(point_densities(map, &Potential::zero(), geom, x)?[0])
}

/// Energy with potential, plus the Dirichlet term when `kappa > 0`.
pub fn energy(
    map: &AnsatzMap,
    potential: &Potential,
    kappa: f64,
    geom: &Geometry,
    spec: &QuadratureSpec,
) -> Result<EnergyBreakdown> {
    map.check_geometry(geom)?;
    let term = |i: usize| {
        integrate(
            |x| Ok(point_densities(map, potential, geom, x)?[i]),
            geom,
            spec,
        )
    };
    let s2 = term(0)?;
    let pot = if potential_vanishes(potential) {
        Integral {
            value: 0.0,
            error: 0.0,
            levels: vec![],
        }
    } else {
        term(2)?
    };
    let dir = if kappa > 0.0 {
        term(1)?
    } else {
        Integral {
            value: 0.0,
            error: 0.0,
            levels: vec![],
        }
    };
    let sigma2_term = 0.5 * s2.value;
    let dirichlet_term = 0.5 * dir.value;
    Ok(EnergyBreakdown {
        sigma2_term,
        potential_term: pot.value,
        dirichlet_term,
        kappa,
        total: kappa * dirichlet_term + sigma2_term + pot.value,
        quadrature_error_estimate: 0.5 * s2.error + pot.error + 0.5 * kappa * dir.error,
    })
}

fn potential_vanishes(p: &Potential) -> bool {
    matches!(p, Potential::Constant { c } if *c == 0.0)
}

/// Residual of the reduced Euler-Lagrange equation at one point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ELResidual {
    pub point: Point,
    /// `σ₂μ^V − ½grad^H σ₂ + grad(P̄∘φ)`.
    pub vector_residual: [f64; 3],
    /// `g`-norm of the residual.
    pub norm: f64,
}

/// `grad(P̄∘φ)` on the source.
pub fn potential_gradient(jet: &MapJet, potential: &Potential) -> Vector3<f64> {
    let gp = potential.grad(&jet.phi, jet.target_radius);
    jet.ginv * (jet.dphi.transpose() * gp)
}

/// `σ₂ T_φ = σ₂μ^V − ½grad^H σ₂`, the multiplied-out left side of the reduced equation.
pub fn sigma2_tension_field(jet: &MapJet) -> Result<Vector3<f64>> {
    let (u, du) = jet.vertical()?;
    let mu = jet.covariant(&u, &u, &du);
    let grad = jet.grad(&jet.d_sigma2);
    let horizontal = grad - u * jet.inner(&grad, &u);
    Ok(mu * jet.sigma2 - horizontal * 0.5)
}

pub fn el_residual_from_jet(jet: &MapJet, potential: &Potential) -> Result<ELResidual> {
    let r = sigma2_tension_field(jet)? + potential_gradient(jet, potential);
    Ok(ELResidual {
        point: jet.x,
        vector_residual: [r[0], r[1], r[2]],
        norm: jet.inner(&r, &r).max(0.0).sqrt(),
    })
}

pub fn el_residual(
    map: &AnsatzMap,
    potential: &Potential,
    geom: &Geometry,
    x: &Point,
) -> Result<ELResidual> {
    el_residual_from_jet(&map.jet(geom, x)?, potential)
}

/// Sup of the residual norm over the pole-avoiding `n³` grid.
pub fn el_residual_sup(
    map: &AnsatzMap,
    potential: &Potential,
    geom: &Geometry,
    n: usize,
) -> Result<Sweep> {
    let pts = sample_grid(&geom.chart, n);
    sup_over(&pts, |x| Ok(el_residual(map, potential, geom, x)?.norm))
}

/// σ₂ tension `τ = −dφ(λ₂² g(T,E₁)E₁ + λ₁² g(T,E₂)E₂)` as a vector in R³.
pub fn tension_from_jet(jet: &MapJet) -> Result<Vector3<f64>> {
    let w = sigma2_tension_field(jet)?;
    let (vals, vecs) = generalized_eigen(&jet.g, &jet.pullback_metric);
    let mut acc = Vector3::zeros();
    for i in 1..3 {
        acc += vecs[i] * (jet.inner(&w, &vecs[i]) / vals[i]);
    }
    Ok(-(jet.dphi * acc))
}

pub fn tension_sigma2(map: &AnsatzMap, geom: &Geometry, x: &Point) -> Result<Vector3<f64>> {
    tension_from_jet(&map.jet(geom, x)?)
}

/// `|τ − ∇P̄ + dφ(Σ g(R,Eᵢ)Eᵢ/λᵢ²)|`, which vanishes identically when `R` is the residual.
pub fn tension_consistency(
    map: &AnsatzMap,
    potential: &Potential,
    geom: &Geometry,
    x: &Point,
) -> Result<f64> {
    let jet = map.jet(geom, x)?;
    let tau = tension_from_jet(&jet)?;
    let res = el_residual_from_jet(&jet, potential)?;
    let r = Vector3::from(res.vector_residual);
    let (vals, vecs) = generalized_eigen(&jet.g, &jet.pullback_metric);
    let mut acc = Vector3::zeros();
    for i in 1..3 {
        acc += vecs[i] * (jet.inner(&r, &vecs[i]) / vals[i]);
    }
    let gp = potential.grad(&jet.phi, jet.target_radius);
    Ok((tau - gp + jet.dphi * acc).norm())
}

/// σ₂ stress-energy tensor `S = ½σ₂g − |dφ|²H + H g⁻¹ H` in coordinates.
pub fn stress_tensor_sigma2(map: &AnsatzMap, geom: &Geometry, x: &Point) -> Result<Matrix3<f64>> {
    Ok(map.jet(geom, x)?.stress)
}

/// `max_j |h(τ, dφ(∂_j)) + (div S)_j|`.
pub fn stress_divergence_identity_check(
    map: &AnsatzMap,
    geom: &Geometry,
    x: &Point,
) -> Result<f64> {
    let jet = map.jet(geom, x)?;
    if jet.sigma2 < RANK_TOL {
        // Both sides vanish to the order of σ₂ at a critical point.
        return Ok(jet.div_covariant2(&jet.stress, &jet.d_stress).amax());
    }
    let tau = tension_from_jet(&jet)?;
    let lhs = jet.dphi.transpose() * tau;
    let div = jet.div_covariant2(&jet.stress, &jet.d_stress);
    Ok((lhs + div).amax())
}

/// Whether `|grad(P̄∘φ)|` tends to zero when approaching `x_critical` along `coord`.
pub fn critical_point_check(
    map: &AnsatzMap,
    potential: &Potential,
    geom: &Geometry,
    x_critical: &Point,
    coord: usize,
) -> Result<bool> {
    let d = geom.chart.domain[coord];
    let inward = if (x_critical[coord] - d.hi).abs() < 1e-12 {
        -1.0
    } else {
        1.0
    };
    let offsets = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
    let mut norms = Vec::with_capacity(offsets.len());
    for off in offsets {
        let mut x = *x_critical;
        x[coord] += inward * off;
        let j = map.differential(geom, &x)?;
        let phi = map.evaluate(geom, &x)?;
        let ginv = geom.inverse_metric(&x)?;
        let dp = j.transpose() * potential.grad(&phi, map.target_radius);
        norms.push((dp.transpose() * ginv * dp)[0].max(0.0).sqrt());
    }
    let (first, last) = (norms[0], norms[norms.len() - 1]);
    Ok(last < 1e-10 || last <= 1e-2 * first)
}

/// Exact `∂φ/∂α` for the profile ansätze, `φ = R(sin α cos β, sin α sin β, cos α)`.
fn profile_direction(map: &AnsatzMap, x: &Point) -> Result<Vector3<f64>> {
    let (alpha, beta) = match &map.ansatz {
        Ansatz::AlphaHopf { k, l, profile } => {
            (profile.value(x[0]), -(*k as f64) * x[1] + *l as f64 * x[2])
        }
        Ansatz::CylinderWinding { profile } => (profile.value(x[0]), x[1] - x[2]),
        _ => {
            return Err(Error::Incompatible(format!(
                "profile variations are defined for profile ansatze, not {}",
                map.family()
            )))
        }
    };
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    Ok(Vector3::new(ca * cb, ca * sb, -sa) * map.target_radius)
}

/// The compact variation `ψ(s) = sin⁴(2s) sin(2 j s)`.
pub fn bump(mode: u32) -> ProfileFunction {
    ProfileFunction::Constant(0.0).perturbed(1.0, mode)
}

/// `dE/dε` at `ε = 0` for `α + εψ`, from the first-variation formula `−∫⟨τ − ∇P̄, v⟩ν`.
pub fn first_variation(
    map: &AnsatzMap,
    potential: &Potential,
    geom: &Geometry,
    spec: &QuadratureSpec,
    mode: u32,
) -> Result<Integral> {
    let psi = bump(mode);
    integrate(
        |x| {
            let v = profile_direction(map, x)? * psi.value(x[0]);
            let jet = map.jet(geom, x)?;
            let gp = potential.grad(&jet.phi, jet.target_radius);
            let tau = if jet.sigma2 < RANK_TOL {
                Vector3::zeros()
            } else {
                tension_from_jet(&jet)?
            };
            Ok(-(tau - gp).dot(&v))
        },
        geom,
        spec,
    )
}

/// Central difference `(E(α+εψ) − E(α−εψ)) / 2ε` of the energy.
pub fn energy_derivative_fd(
    map: &AnsatzMap,
    potential: &Potential,
    geom: &Geometry,
    spec: &QuadratureSpec,
    mode: u32,
    eps: f64,
) -> Result<f64> {
    let base = map
        .profile()
        .ok_or_else(|| Error::Incompatible("constant map has no profile".into()))?
        .clone();
    let e = |amp: f64| -> Result<f64> {
        let m = map.with_profile(base.clone().perturbed(amp, mode));
        Ok(energy(&m, potential, 0.0, geom, &spec.clone().levels(1))?.total)
    };
    Ok((e(eps)? - e(-eps)?) / (2.0 * eps))
}

/// One row of a Derrick scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerrickPoint {
    pub lambda: f64,
    pub sigma2_term: f64,
    pub potential_term: f64,
    pub total: f64,
    /// `λ E₄(1) + λ⁻³ E₀(1)`.
    pub predicted_total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerrickScan {
    pub points: Vec<DerrickPoint>,
    pub sigma2_at_one: f64,
    pub potential_at_one: f64,
    /// Critical scale `(3E₀/E₄)^{1/4}` of the scaling law, when the potential term is positive.
    pub critical_lambda: Option<f64>,
}

/// Energies of `φ_λ(x) = φ(λx)` on R³. The σ₂ term scales as `λ` and the
/// potential term as `λ⁻³`.
pub fn derrick_scan(
    map: &AnsatzMap,
    potential: &Potential,
    geom: &Geometry,
    spec: &QuadratureSpec,
    lambdas: &[f64],
) -> Result<DerrickScan> {
    if geom.metric.is_s3() {
        return Err(Error::Incompatible("Derrick scans run on R^3".into()));
    }
    let scaled = |l: f64| {
        map.rescaled(l)
            .ok_or_else(|| Error::Incompatible(format!("{} map has no length scale", map.family())))
    };
    let e1 = energy(&scaled(1.0)?, potential, 0.0, geom, spec)?;
    let (a, b) = (e1.sigma2_term, e1.potential_term);
    let mut points = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        let e = energy(&scaled(l)?, potential, 0.0, geom, spec)?;
        points.push(DerrickPoint {
            lambda: l,
            sigma2_term: e.sigma2_term,
            potential_term: e.potential_term,
            total: e.total,
            predicted_total: a * l + b / l.powi(3),
        });
    }
    Ok(DerrickScan {
        points,
        sigma2_at_one: a,
        potential_at_one: b,
        critical_lambda: (b > 0.0 && a > 0.0).then(|| (3.0 * b / a).powf(0.25)),
    })
}
