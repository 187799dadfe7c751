//! Case registry, TOML case configs, the verification pipeline and report emission.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::chart::{ChartKind, Geometry, MetricSpec};
use crate::error::{Error, Result};
use crate::field_maps::{Ansatz, AnsatzMap, Potential, ProfileFunction};
use crate::fluid::{
    beltrami_classify, beltrami_samples, dual_flow, euler_sweep, hopf_field, khesin_flow,
    reeb_field, squashed_unit_field, BeltramiClass, EulerSweep, FlowField, Poly,
};
use crate::integration::QuadratureSpec;
use crate::profile::{solve_profile, ProfileProblem, ScaledMetric, DEFAULT_GRID};
use crate::sampling::Sweep;
use crate::topology::{
    bound_check_sigma2, bound_ratio_mass_term, helicity, hopf_charge, measure_beltrami_constant,
    BoundCheck, ChargeResult,
};
use crate::variational::{derrick_scan, el_residual_sup, energy, EnergyBreakdown};

pub const SCHEMA: u32 = 1;

// ---------------------------------------------------------------------------
// Config

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub case: CaseMeta,
    pub manifold: MetricSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ansatz: Option<AnsatzConfig>,
    #[serde(default = "Potential::zero")]
    pub potential: Potential,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowConfig>,
    #[serde(default)]
    pub physics: Physics,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reference: Vec<Reference>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseMeta {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnsatzFamily {
    AlphaHopf,
    Axisymmetric,
    CylinderWinding,
}

/// Registered profile families; parametrized ones take `k, l` from the ansatz.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileTag {
    Hopf,
    Harmonic,
    RationalHopf,
    CosSquared,
    Squashed,
    Conformal,
    CoupledH,
    /// Solved from the pointwise criticality condition; also fixes the metric scale.
    Solved,
    Winding,
    TanhRadial,
    GaussianRadial,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzConfig {
    pub family: AnsatzFamily,
    #[serde(default = "one_i")]
    pub k: i32,
    #[serde(default = "one_i")]
    pub l: i32,
    pub profile: ProfileTag,
    #[serde(default = "one_f")]
    pub target_radius: f64,
    #[serde(default = "one_f")]
    pub length_scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FlowConfig {
    /// `V = ⋆φ*ω` of the ansatz map.
    Dual,
    Khesin {
        f_minus: Vec<f64>,
        f_plus: Vec<f64>,
    },
    /// `ℓ∂_{φ₁} + k∂_{φ₂}` on the weighted Sasakian sphere.
    Reeb,
    /// Unit fibre field of a squashed or conformal sphere.
    UnitFibre,
    HopfField,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    #[serde(default)]
    pub kappa: f64,
    /// Constant of the σ₂ bound; measured from the Hopf field on the round sphere when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu1: Option<f64>,
}

impl Default for Physics {
    fn default() -> Self {
        Physics {
            kappa: 0.0,
            mu1: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_grid")]
    pub n: usize,
    #[serde(default = "default_beltrami_grid")]
    pub beltrami_n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n: default_grid(),
            beltrami_n: default_beltrami_grid(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "tight")]
    pub el_residual: f64,
    #[serde(default = "tight")]
    pub euler: f64,
    #[serde(default = "tight")]
    pub divergence: f64,
    #[serde(default = "tight")]
    pub charge_defect: f64,
    /// Allowed ratio between the convective-form and curl-form Euler defects.
    #[serde(default = "two_f")]
    pub convective_ratio: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            el_residual: tight(),
            euler: tight(),
            divergence: tight(),
            charge_defect: tight(),
            convective_ratio: two_f(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    #[serde(default = "sixteen")]
    pub order: usize,
    #[serde(default = "four")]
    pub panels: usize,
    #[serde(default = "sixteen")]
    pub points: usize,
    #[serde(default = "two_u")]
    pub levels: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            order: sixteen(),
            panels: four(),
            points: sixteen(),
            levels: two_u(),
        }
    }
}

/// Expected value of a reported quantity. Compared in the report, never gated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reference {
    pub quantity: Quantity,
    pub value: f64,
    #[serde(default = "tight")]
    pub rel_tol: f64,
    pub label: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Sigma2Term,
    PotentialTerm,
    Total,
    Charge,
    Helicity,
    BeltramiConstant,
}

fn one_i() -> i32 {
    1
}
fn one_f() -> f64 {
    1.0
}
fn two_f() -> f64 {
    2.0
}
fn two_u() -> usize {
    2
}
fn four() -> usize {
    4
}
fn sixteen() -> usize {
    16
}
fn tight() -> f64 {
    1e-6
}
fn default_grid() -> usize {
    48
}
fn default_beltrami_grid() -> usize {
    6
}

impl CaseConfig {
    pub fn from_toml(text: &str) -> Result<CaseConfig> {
        let cfg: CaseConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        let t = &self.tolerances;
        positive("tolerances.el_residual", t.el_residual)?;
        positive("tolerances.euler", t.euler)?;
        positive("tolerances.divergence", t.divergence)?;
        positive("tolerances.charge_defect", t.charge_defect)?;
        positive("tolerances.convective_ratio", t.convective_ratio)?;
        for (i, r) in self.reference.iter().enumerate() {
            positive(&format!("reference[{i}].rel_tol"), r.rel_tol)?;
        }
        if self.grid.n < 2 || self.grid.beltrami_n < 2 {
            return Err(Error::Config(
                "grid.n and grid.beltrami_n must be at least 2".into(),
            ));
        }
        let q = &self.quadrature;
        if q.order < 8 {
            return Err(Error::Config(format!(
                "quadrature.order must be >= 8, got {}",
                q.order
            )));
        }
        if q.panels == 0 || q.points < 8 || q.levels == 0 {
            return Err(Error::Config(
                "quadrature.panels, points and levels must be positive (points >= 8)".into(),
            ));
        }
        if self.physics.kappa < 0.0 {
            return Err(Error::Config("physics.kappa must be >= 0".into()));
        }
        if let Some(a) = &self.ansatz {
            positive("ansatz.target_radius", a.target_radius)?;
            positive("ansatz.length_scale", a.length_scale)?;
            let s3_only = matches!(a.family, AnsatzFamily::AlphaHopf);
            if s3_only != self.manifold.is_s3() {
                return Err(Error::Config(format!(
                    "ansatz.family {:?} does not live on manifold {}",
                    a.family,
                    self.manifold.family()
                )));
            }
            let ok = match a.profile {
                ProfileTag::Winding | ProfileTag::TanhRadial | ProfileTag::GaussianRadial => {
                    !matches!(a.family, AnsatzFamily::AlphaHopf)
                }
                ProfileTag::Solved => matches!(
                    self.manifold,
                    MetricSpec::S3Squashed { .. } | MetricSpec::S3Conformal { .. }
                ),
                ProfileTag::Zero => true,
                _ => matches!(a.family, AnsatzFamily::AlphaHopf),
            };
            if !ok {
                return Err(Error::Config(format!(
                    "ansatz.profile {:?} is not defined for ansatz {:?} on {}",
                    a.profile,
                    a.family,
                    self.manifold.family()
                )));
            }
        }
        if let Some(f) = &self.flow {
            let needs = match f {
                FlowConfig::Dual => self.ansatz.is_some(),
                FlowConfig::Khesin { .. } | FlowConfig::HopfField => {
                    matches!(self.manifold, MetricSpec::S3Round)
                }
                FlowConfig::Reeb => matches!(self.manifold, MetricSpec::S3WeightedSasakian { .. }),
                FlowConfig::UnitFibre => {
                    matches!(
                        self.manifold,
                        MetricSpec::S3Squashed { .. } | MetricSpec::S3Conformal { .. }
                    )
                }
            };
            if !needs {
                return Err(Error::Config(format!(
                    "flow {f:?} needs {}",
                    match f {
                        FlowConfig::Dual => "an [ansatz] section".to_string(),
                        _ => format!("a different manifold than {}", self.manifold.family()),
                    }
                )));
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> Geometry {
        match self.manifold {
            m if m.is_s3() => Geometry::s3(m),
            MetricSpec::CylinderR2xS1 => Geometry::r2xs1(),
            _ => match &self.ansatz {
                Some(a) if a.family == AnsatzFamily::Axisymmetric => Geometry::cylindrical(),
                _ => Geometry::euclidean(),
            },
        }
    }

    pub fn quadrature_spec(&self, geom: &Geometry) -> QuadratureSpec {
        let q = &self.quadrature;
        QuadratureSpec::with_resolution(&geom.chart, q.order, q.panels, q.points).levels(q.levels)
    }
}

fn profile_for(tag: ProfileTag, k: i32, l: i32) -> Result<ProfileFunction> {
    let (kf, lf) = (k as f64, l as f64);
    Ok(match tag {
        ProfileTag::Hopf => ProfileFunction::hopf(),
        ProfileTag::Harmonic => ProfileFunction::Harmonic { k: kf },
        ProfileTag::RationalHopf => ProfileFunction::RationalHopf { k: kf, l: lf },
        ProfileTag::CosSquared => ProfileFunction::CosSquared,
        ProfileTag::Squashed => ProfileFunction::squashed(kf, lf),
        ProfileTag::Conformal => ProfileFunction::conformal(kf, lf),
        ProfileTag::CoupledH => ProfileFunction::CoupledH { k: kf },
        ProfileTag::Winding => ProfileFunction::Winding,
        ProfileTag::TanhRadial => ProfileFunction::TanhRadial,
        ProfileTag::GaussianRadial => ProfileFunction::GaussianRadial,
        ProfileTag::Zero => ProfileFunction::Constant(0.0),
        ProfileTag::Solved => {
            return Err(Error::Config(
                "solved profiles are built by the pipeline".into(),
            ))
        }
    })
}

/// Geometry and map of a config, solving for the profile and metric scale when asked.
pub fn build_map(cfg: &CaseConfig) -> Result<(Geometry, Option<AnsatzMap>, Vec<String>)> {
    let mut notes = Vec::new();
    let mut geom = cfg.geometry();
    let Some(a) = &cfg.ansatz else {
        return Ok((geom, None, notes));
    };
    let map = match (a.family, a.profile) {
        (AnsatzFamily::AlphaHopf, ProfileTag::Solved) => {
            let (metric, k, l) = match cfg.manifold {
                MetricSpec::S3Squashed { k, l, .. } => (ScaledMetric::Squashed, k, l),
                MetricSpec::S3Conformal { k, l, .. } => (ScaledMetric::Conformal, k, l),
                _ => unreachable!("validated"),
            };
            if k != a.k as f64 || l != a.l as f64 {
                return Err(Error::Config(
                    "solved profiles need matching metric and ansatz (k, l)".into(),
                ));
            }
            let problem = ProfileProblem {
                metric,
                k: a.k,
                l: a.l,
                potential: cfg.potential,
                target_radius: a.target_radius,
                boundary: (PI, 0.0),
            };
            let sol = solve_profile(&problem, DEFAULT_GRID)?;
            notes.push(format!(
                "profile and metric scale solved: a = {:.17e}",
                sol.a
            ));
            geom = problem.geometry(sol.a);
            AnsatzMap::alpha_hopf(a.k, a.l, sol.profile, a.target_radius)
        }
        (AnsatzFamily::AlphaHopf, tag) => {
            AnsatzMap::alpha_hopf(a.k, a.l, profile_for(tag, a.k, a.l)?, a.target_radius)
        }
        (AnsatzFamily::Axisymmetric, tag) => AnsatzMap::axisymmetric(
            a.k,
            a.l,
            profile_for(tag, a.k, a.l)?,
            a.length_scale,
            a.target_radius,
        ),
        (AnsatzFamily::CylinderWinding, tag) => AnsatzMap::new(
            Ansatz::CylinderWinding {
                profile: profile_for(tag, a.k, a.l)?,
            },
            a.target_radius,
        ),
    };
    map.check_geometry(&geom)?;
    Ok((geom, Some(map), notes))
}

pub fn build_flow(
    cfg: &CaseConfig,
    geom: &Geometry,
    map: Option<&AnsatzMap>,
) -> Result<Option<FlowField>> {
    let Some(f) = &cfg.flow else { return Ok(None) };
    Ok(Some(match f {
        FlowConfig::Dual => dual_flow(map.expect("validated"), &cfg.potential, geom)?,
        FlowConfig::Khesin { f_minus, f_plus } => {
            khesin_flow(Poly(f_minus.clone()), Poly(f_plus.clone()))
        }
        FlowConfig::Reeb => match geom.metric {
            MetricSpec::S3WeightedSasakian { k, l } => reeb_field(k, l),
            _ => unreachable!("validated"),
        },
        FlowConfig::UnitFibre => squashed_unit_field(geom)?,
        FlowConfig::HopfField => hopf_field(),
    }))
}

// ---------------------------------------------------------------------------
// Report

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceOutcome {
    pub quantity: Quantity,
    pub label: String,
    pub expected: f64,
    pub measured: Option<f64>,
    pub rel_error: Option<f64>,
    pub within: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeltramiSummary {
    pub classification: BeltramiClass,
    pub max_angle_defect: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedBound {
    pub name: String,
    #[serde(flatten)]
    pub check: BoundCheck,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema: u32,
    pub case: String,
    pub manifold: MetricSpec,
    pub map: Option<String>,
    pub potential: String,
    pub flow: Option<String>,
    pub energies: Option<EnergyBreakdown>,
    pub el_residual: Option<Sweep>,
    pub el_residual_sup: Option<f64>,
    pub euler: Option<EulerSweep>,
    pub euler_defect_sup: Option<f64>,
    pub div_defect_sup: Option<f64>,
    pub charge: Option<ChargeResult>,
    pub helicity: Option<f64>,
    pub beltrami: Option<BeltramiSummary>,
    pub bounds: Vec<NamedBound>,
    pub references: Vec<ReferenceOutcome>,
    pub gates: Vec<Gate>,
    pub notes: Vec<String>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunOptions {
    /// Record wall-clock time; makes the report non-reproducible byte for byte.
    pub timing: bool,
}

fn gate(name: &str, value: f64, tolerance: f64) -> Gate {
    Gate {
        name: name.into(),
        value,
        tolerance,
        passed: value <= tolerance,
    }
}

/// Runs the full pipeline of one case.
pub fn run_verify(cfg: &CaseConfig, opts: RunOptions) -> Result<VerificationReport> {
    run_verify_inner(cfg, opts).map_err(|e| e.in_case(&cfg.case.name))
}

fn run_verify_inner(cfg: &CaseConfig, opts: RunOptions) -> Result<VerificationReport> {
    cfg.validate()?;
    let start = Instant::now();
    let tol = &cfg.tolerances;
    let (geom, map, mut notes) = build_map(cfg)?;
    let spec = cfg.quadrature_spec(&geom);
    let mut gates = Vec::new();

    let energies = map
        .as_ref()
        .map(|m| energy(m, &cfg.potential, cfg.physics.kappa, &geom, &spec))
        .transpose()?;

    let el = match &map {
        Some(m) => {
            let s = el_residual_sup(m, &cfg.potential, &geom, cfg.grid.n)?;
            if s.rank_deficient > 0 {
                notes.push(format!(
                    "{} rank-deficient grid points skipped in the EL sweep",
                    s.rank_deficient
                ));
            }
            gates.push(gate("el_residual", s.sup, tol.el_residual));
            Some(s)
        }
        None => None,
    };
    if cfg.physics.kappa > 0.0 {
        notes.push("EL residual gates the σ₂ + potential equation; the Dirichlet force enters the fluid side only".into());
    }

    let flow = build_flow(cfg, &geom, map.as_ref())?;
    let euler = match &flow {
        Some(f) => {
            let s = euler_sweep(f, cfg.grid.n)?;
            gates.push(gate("euler_curl_form", s.curl_form.sup, tol.euler));
            gates.push(gate("divergence", s.divergence.sup, tol.divergence));
            let bound = tol.convective_ratio * s.curl_form.sup.max(tol.euler);
            gates.push(gate("euler_convective_form", s.convective_form.sup, bound));
            Some(s)
        }
        None => None,
    };

    let charge = match &map {
        Some(m)
            if matches!(
                m.ansatz,
                Ansatz::AlphaHopf { .. } | Ansatz::Axisymmetric { .. }
            ) =>
        {
            let q = hopf_charge(m)?;
            gates.push(gate("charge_defect", q.defect, tol.charge_defect));
            Some(q)
        }
        _ => None,
    };

    let helicity_value = match &flow {
        Some(f) if f.geometry.chart.kind == ChartKind::Hopf => match helicity(f) {
            Ok(h) => Some(h.value),
            Err(Error::Incompatible(msg)) => {
                notes.push(format!("helicity not computed: {msg}"));
                None
            }
            Err(e) => return Err(e),
        },
        _ => None,
    };

    let beltrami = match &flow {
        Some(f) if f.geometry.metric.is_s3() => {
            let samples = beltrami_samples(&f.geometry, cfg.grid.beltrami_n);
            let r = beltrami_classify(f, &samples)?;
            Some(BeltramiSummary {
                classification: r.classification,
                max_angle_defect: r.max_angle_defect,
                samples: samples.len(),
            })
        }
        _ => None,
    };

    let mut bounds = Vec::new();
    if let (Some(e), Some(q), Some(m)) = (&energies, &charge, &map) {
        if q.rounded != 0 {
            let mu1 = match (cfg.physics.mu1, geom.metric) {
                (Some(mu), _) => Some(mu),
                (None, MetricSpec::S3Round) => {
                    let hf = hopf_field();
                    measure_beltrami_constant(&hf, &beltrami_samples(&hf.geometry, 4))?
                }
                _ => None,
            };
            if let Some(mu1) = mu1 {
                bounds.push(NamedBound {
                    name: "sigma2_charge".into(),
                    check: bound_check_sigma2(e.sigma2_term, m.target_radius, q.rounded, mu1)?,
                });
            }
            if !cfg.potential.is_constant() {
                bounds.push(NamedBound {
                    name: "mass_term_ratio".into(),
                    check: bound_ratio_mass_term(e.total, q.rounded)?,
                });
            }
        } else {
            notes.push("charge zero: bound ratios undefined".into());
        }
    }

    let measured = |q: Quantity| -> Option<f64> {
        match q {
            Quantity::Sigma2Term => energies.as_ref().map(|e| e.sigma2_term),
            Quantity::PotentialTerm => energies.as_ref().map(|e| e.potential_term),
            Quantity::Total => energies.as_ref().map(|e| e.total),
            Quantity::Charge => charge.as_ref().map(|c| c.raw_integral),
            Quantity::Helicity => helicity_value,
            Quantity::BeltramiConstant => match beltrami.as_ref().map(|b| &b.classification) {
                Some(BeltramiClass::Linear { constant }) => Some(*constant),
                _ => None,
            },
        }
    };
    let references = cfg
        .reference
        .iter()
        .map(|r| {
            let m = measured(r.quantity);
            let rel = m.map(|v| (v - r.value).abs() / r.value.abs().max(f64::MIN_POSITIVE));
            ReferenceOutcome {
                quantity: r.quantity,
                label: r.label.clone(),
                expected: r.value,
                measured: m,
                rel_error: rel,
                within: rel.is_some_and(|e| e <= r.rel_tol),
            }
        })
        .collect();

    let pass = gates.iter().all(|g| g.passed);
    Ok(VerificationReport {
        schema: SCHEMA,
        case: cfg.case.name.clone(),
        manifold: geom.metric,
        map: map.as_ref().map(|m| {
            format!(
                "{}:{}",
                m.family(),
                m.profile().map(|p| p.tag()).unwrap_or_default()
            )
        }),
        potential: cfg.potential.tag(),
        flow: flow.as_ref().map(|f| f.provenance().to_string()),
        energies,
        el_residual_sup: el.as_ref().map(|s| s.sup),
        el_residual: el,
        euler_defect_sup: euler.as_ref().map(|s| s.curl_form.sup),
        div_defect_sup: euler.as_ref().map(|s| s.divergence.sup),
        euler,
        charge,
        helicity: helicity_value,
        beltrami,
        bounds,
        references,
        gates,
        notes,
        pass,
        timing: opts.timing.then(|| Timing {
            total_ms: start.elapsed().as_secs_f64() * 1e3,
        }),
    })
}

// ---------------------------------------------------------------------------
// JSON with 17 significant digits

/// Pretty JSON formatter writing every float with 17 significant digits.
struct SeventeenDigits<'a>(serde_json::ser::PrettyFormatter<'a>);

macro_rules! forward {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(fn $name<W: ?Sized + std::io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> std::io::Result<()> {
            self.0.$name(w $(, $arg)*)
        })*
    };
}

impl serde_json::ser::Formatter for SeventeenDigits<'_> {
    fn write_f64<W: ?Sized + std::io::Write>(
        &mut self,
        w: &mut W,
        value: f64,
    ) -> std::io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + std::io::Write>(
        &mut self,
        w: &mut W,
        value: f32,
    ) -> std::io::Result<()> {
        write!(w, "{:.16e}", value as f64)
    }

    forward! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        begin_object_value();
        end_object_value();
    }
}

/// Serializes with 17 significant digits; non-finite numbers become `null`.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let fmt = SeventeenDigits(serde_json::ser::PrettyFormatter::with_indent(b"  "));
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Io(e.to_string()))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

// ---------------------------------------------------------------------------
// Registry

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CaseInfo {
    pub name: &'static str,
    pub manifold: &'static str,
    pub parameters: &'static [&'static str],
    pub description: &'static str,
}

pub const BUILTINS: [CaseInfo; 7] = [
    CaseInfo {
        name: "r2xs1_winding",
        manifold: "R2xS1",
        parameters: &[],
        description: "winding map of the cylinder R^2 x S^1, quartic potential, dual flow",
    },
    CaseInfo {
        name: "s3_harmonic_k",
        manifold: "S3",
        parameters: &["k"],
        description: "harmonic alpha-Hopf map of charge k^2 with the charge-dependent potential",
    },
    CaseInfo {
        name: "s3_khesin",
        manifold: "S3",
        parameters: &[],
        description: "steady Euler flow f_-(t) xi_- + f_+(t) xi_+ on the round sphere",
    },
    CaseInfo {
        name: "s3_oldbaby_profile",
        manifold: "S3",
        parameters: &["k"],
        description: "profile of the old baby potential from the coupled (alpha, h) system",
    },
    CaseInfo {
        name: "s3_squashed_kl",
        manifold: "S3",
        parameters: &["k", "l"],
        description: "alpha-Hopf map on the squashed sphere, new baby potential",
    },
    CaseInfo {
        name: "s3_conformal_kl",
        manifold: "S3",
        parameters: &["k", "l"],
        description: "alpha-Hopf map on the conformally deformed sphere, new baby potential",
    },
    CaseInfo {
        name: "s3_weighted_reeb",
        manifold: "S3",
        parameters: &["k", "l"],
        description: "Reeb field l d/dphi1 + k d/dphi2 of the weighted Sasakian sphere",
    },
];

/// Built-in catalog, optionally filtered by `key=value` with key `manifold` or `name`.
pub fn list_cases(filter: Option<&str>) -> Result<Vec<CaseInfo>> {
    let Some(f) = filter else {
        return Ok(BUILTINS.to_vec());
    };
    let (key, value) = f
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("filter `{f}` is not of the form key=value")))?;
    let norm = |s: &str| {
        s.to_lowercase()
            .replace('³', "3")
            .replace('²', "2")
            .replace(['x', '×', ' '], "")
    };
    let pick: Box<dyn Fn(&CaseInfo) -> bool> = match key.trim() {
        "manifold" => Box::new(move |c| norm(c.manifold) == norm(value)),
        "name" => Box::new(move |c| c.name.contains(value.trim())),
        other => {
            return Err(Error::Config(format!(
                "unknown filter key `{other}` (expected manifold or name)"
            )))
        }
    };
    Ok(BUILTINS.iter().filter(|c| pick(c)).cloned().collect())
}

/// Parameters of a parametric case.
pub type Params = BTreeMap<String, i32>;

pub fn parse_params(items: &[String]) -> Result<Params> {
    let mut out = Params::new();
    for item in items.iter().flat_map(|s| s.split(',')) {
        let (k, v) = item.split_once('=').ok_or_else(|| {
            Error::Config(format!("parameter `{item}` is not of the form name=value"))
        })?;
        let v: i32 = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("parameter `{item}` needs an integer value")))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

fn reference(quantity: Quantity, value: f64, label: &str) -> Reference {
    Reference {
        quantity,
        value,
        rel_tol: 1e-6,
        label: label.into(),
    }
}

/// `(2π²/3)(k³ + (k²−1)π csc(π/k))`; at `k = 1` the second term tends to `2`.
pub fn harmonic_energy_closed_form(k: f64) -> f64 {
    let tail = if k == 1.0 {
        2.0
    } else {
        (k * k - 1.0) * PI / (PI / k).sin()
    };
    2.0 * PI * PI / 3.0 * (k.powi(3) + tail)
}

/// The squashed-sphere energy in its reference form, `2^{5/4}π^{7/2}√3 kℓ √((k+ℓ)/(k²+kℓ+ℓ²))`.
pub fn squashed_energy_reference(k: f64, l: f64) -> f64 {
    2f64.powf(1.25)
        * PI.powf(3.5)
        * 3f64.sqrt()
        * k
        * l
        * ((k + l) / (k * k + k * l + l * l)).sqrt()
}

/// The squashed-sphere energy obtained by quadrature, `2^{−7/4}√3π^{7/2} kℓ √((k+ℓ)/(k²+kℓ+ℓ²))`.
pub fn squashed_energy_measured_form(k: f64, l: f64) -> f64 {
    squashed_energy_reference(k, l) / 8.0
}

/// `2^{−7/4}π^{7/2}√(kℓ(k+ℓ))`.
pub fn conformal_energy_closed_form(k: f64, l: f64) -> f64 {
    2f64.powf(-1.75) * PI.powf(3.5) * (k * l * (k + l)).sqrt()
}

/// Config of a built-in case. Unknown parameters are rejected.
pub fn builtin_config(name: &str, params: &Params) -> Result<CaseConfig> {
    let info = BUILTINS
        .iter()
        .find(|c| c.name == name)
        .ok_or_else(|| Error::Config(format!("unknown case `{name}`; see `list`")))?;
    for key in params.keys() {
        if !info.parameters.contains(&key.as_str()) {
            return Err(Error::Config(format!(
                "case `{name}` has no parameter `{key}`"
            )));
        }
    }
    let get = |key: &str, default: i32| -> Result<i32> {
        let v = params.get(key).copied().unwrap_or(default);
        if v < 1 {
            return Err(Error::Config(format!("parameter {key} = {v} must be >= 1")));
        }
        Ok(v)
    };
    let base = |manifold: MetricSpec| CaseConfig {
        case: CaseMeta {
            name: name.to_string(),
            description: Some(info.description.to_string()),
        },
        manifold,
        ansatz: None,
        potential: Potential::zero(),
        flow: None,
        physics: Physics::default(),
        grid: GridConfig::default(),
        tolerances: Tolerances::default(),
        quadrature: QuadratureConfig::default(),
        reference: vec![],
    };
    let alpha = |k: i32, l: i32, profile: ProfileTag| AnsatzConfig {
        family: AnsatzFamily::AlphaHopf,
        k,
        l,
        profile,
        target_radius: 0.5,
        length_scale: 1.0,
    };
    let cfg = match name {
        "r2xs1_winding" => {
            let mut c = base(MetricSpec::CylinderR2xS1);
            c.ansatz = Some(AnsatzConfig {
                family: AnsatzFamily::CylinderWinding,
                k: 1,
                l: 1,
                profile: ProfileTag::Winding,
                target_radius: 1.0,
                length_scale: 1.0,
            });
            c.potential = Potential::QuarticSixteenth;
            c.flow = Some(FlowConfig::Dual);
            c.reference = vec![reference(
                Quantity::Sigma2Term,
                8.0 * PI * PI,
                "reference sigma2 energy 8 pi^2",
            )];
            c
        }
        "s3_harmonic_k" => {
            let k = get("k", 1)?;
            let mut c = base(MetricSpec::S3Round);
            c.ansatz = Some(alpha(k, k, ProfileTag::Harmonic));
            c.potential = Potential::ChargeDependent { k: k as f64 };
            c.flow = Some(FlowConfig::Dual);
            c.reference = vec![
                reference(
                    Quantity::Total,
                    harmonic_energy_closed_form(k as f64),
                    "closed-form energy",
                ),
                reference(Quantity::Charge, (k * k) as f64, "charge k^2"),
                reference(
                    Quantity::Helicity,
                    (k * k) as f64,
                    "helicity of the dual flow",
                ),
            ];
            c
        }
        "s3_khesin" => {
            let mut c = base(MetricSpec::S3Round);
            c.flow = Some(FlowConfig::Khesin {
                f_minus: vec![1.0, 0.5],
                f_plus: vec![0.3, 0.0, 2.0],
            });
            c
        }
        "s3_oldbaby_profile" => {
            let k = get("k", 1)?;
            let mut c = base(MetricSpec::S3Round);
            c.ansatz = Some(alpha(k, k, ProfileTag::CoupledH));
            c.potential = Potential::old_baby();
            c.flow = Some(FlowConfig::Dual);
            c.reference = vec![reference(Quantity::Charge, (k * k) as f64, "charge k^2")];
            c
        }
        "s3_squashed_kl" | "s3_conformal_kl" => {
            let (k, l) = (get("k", 2)?, get("l", 1)?);
            let (kf, lf) = (k as f64, l as f64);
            let squashed = name == "s3_squashed_kl";
            let metric = if squashed {
                ScaledMetric::Squashed
            } else {
                ScaledMetric::Conformal
            };
            let mut c = base(metric.spec(kf, lf, metric.closed_form_a2(kf, lf).sqrt()));
            c.ansatz = Some(alpha(
                k,
                l,
                if squashed {
                    ProfileTag::Squashed
                } else {
                    ProfileTag::Conformal
                },
            ));
            c.potential = Potential::new_baby();
            c.flow = Some(FlowConfig::Dual);
            c.reference = if squashed {
                vec![reference(
                    Quantity::Total,
                    squashed_energy_reference(kf, lf),
                    "reference closed-form energy",
                )]
            } else {
                vec![reference(
                    Quantity::Total,
                    conformal_energy_closed_form(kf, lf),
                    "reference closed-form energy",
                )]
            };
            c.reference
                .push(reference(Quantity::Charge, kf * lf, "charge kl"));
            c
        }
        "s3_weighted_reeb" => {
            let (k, l) = (get("k", 2)?, get("l", 3)?);
            let mut c = base(MetricSpec::S3WeightedSasakian {
                k: k as f64,
                l: l as f64,
            });
            c.flow = Some(FlowConfig::Reeb);
            c
        }
        _ => unreachable!("catalog lookup"),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// A built-in name (with parameters) or the path of a TOML case file.
pub fn resolve_case(target: &str, params: &Params) -> Result<CaseConfig> {
    if BUILTINS.iter().any(|c| c.name == target) {
        return builtin_config(target, params);
    }
    let path = std::path::Path::new(target);
    if path.exists() {
        if !params.is_empty() {
            return Err(Error::Config(
                "parameters apply to built-in cases only".into(),
            ));
        }
        let text = std::fs::read_to_string(path)?;
        return CaseConfig::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        });
    }
    Err(Error::Config(format!(
        "`{target}` is neither a built-in case nor a readable file"
    )))
}

// ---------------------------------------------------------------------------
// Scans

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub parameter: f64,
    pub energy: Option<f64>,
    pub charge: Option<i64>,
    pub ratio: Option<f64>,
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scan {
    pub family: String,
    /// What the ratio column holds.
    pub ratio: String,
    pub rows: Vec<ScanRow>,
}

pub const SCAN_FAMILIES: [&str; 5] = [
    "s3_harmonic_k",
    "s3_squashed_kl",
    "s3_conformal_kl",
    "s3_oldbaby_profile",
    "derrick",
];

/// Parses `k=1..8`, `k=1,2,4` or `lambda=0.5..2.0:0.25` into a parameter name and values.
pub fn parse_range(spec: &str) -> Result<(String, Vec<f64>)> {
    let (name, range) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("range `{spec}` is not of the form name=a..b")))?;
    let bad = || Error::Config(format!("cannot parse range `{range}`"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let values = if range.trim().is_empty() {
        vec![]
    } else if let Some((lo, rest)) = range.split_once("..") {
        let (hi, step) = match rest.split_once(':') {
            Some((h, s)) => (num(h)?, num(s)?),
            None => (num(rest)?, 1.0),
        };
        let lo = num(lo)?;
        if step <= 0.0 {
            return Err(bad());
        }
        let n = ((hi - lo) / step + 1e-9).floor();
        if n < 0.0 {
            vec![]
        } else {
            (0..=n as usize).map(|i| lo + i as f64 * step).collect()
        }
    } else {
        range.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    Ok((name.trim().to_string(), values))
}

fn scan_row(family: &str, p: f64) -> Result<ScanRow> {
    if family == "derrick" {
        unreachable!("handled by run_scan");
    }
    if p.fract() != 0.0 || p < 1.0 {
        return Err(Error::Config(format!(
            "{family} needs integer parameters >= 1, got {p}"
        )));
    }
    let k = p as i32;
    let mut params = Params::new();
    params.insert("k".into(), k);
    if family == "s3_squashed_kl" || family == "s3_conformal_kl" {
        params.insert("l".into(), k);
    }
    let cfg = builtin_config(family, &params)?;
    let (geom, map, _) = build_map(&cfg)?;
    let map = map.expect("scan families carry a map");
    let e = energy(
        &map,
        &cfg.potential,
        cfg.physics.kappa,
        &geom,
        &cfg.quadrature_spec(&geom),
    )?;
    let q = hopf_charge(&map)?;
    let ratio = match family {
        "s3_harmonic_k" => e.total / p.powi(3),
        _ => bound_ratio_mass_term(e.total, q.rounded)?.ratio,
    };
    Ok(ScanRow {
        parameter: p,
        energy: Some(e.total),
        charge: Some(q.rounded),
        ratio: Some(ratio),
        status: "ok".into(),
    })
}

/// Energy, charge and a scaling ratio per parameter value. Failed rows are kept and flagged.
pub fn run_scan(family: &str, values: &[f64]) -> Result<Scan> {
    if !SCAN_FAMILIES.contains(&family) {
        return Err(Error::Config(format!(
            "`{family}` is not a parametric family (expected one of {})",
            SCAN_FAMILIES.join(", ")
        )));
    }
    if family == "derrick" {
        return derrick_rows(values);
    }
    let ratio = match family {
        "s3_harmonic_k" => "energy/k^3",
        _ => "energy/|Q|^(3/4)",
    };
    let rows = values
        .iter()
        .map(|&p| {
            scan_row(family, p).unwrap_or_else(|e| ScanRow {
                parameter: p,
                energy: None,
                charge: None,
                ratio: None,
                status: format!("failed: {e}"),
            })
        })
        .collect();
    Ok(Scan {
        family: family.into(),
        ratio: ratio.into(),
        rows,
    })
}

/// Map of the Derrick scan: axisymmetric charge-one map with profile `π e^{−r²}`.
pub fn derrick_map() -> AnsatzMap {
    AnsatzMap::axisymmetric(1, 1, ProfileFunction::GaussianRadial, 1.0, 1.0)
}

fn derrick_rows(values: &[f64]) -> Result<Scan> {
    let geom = Geometry::cylindrical();
    let spec = QuadratureSpec::for_chart(&geom.chart);
    let map = derrick_map();
    let charge = if values.is_empty() {
        None
    } else {
        Some(hopf_charge(&map)?.rounded)
    };
    let valid: Vec<f64> = values.iter().copied().filter(|l| *l > 0.0).collect();
    let scan = derrick_scan(&map, &Potential::zero(), &geom, &spec, &valid)?;
    let mut by_lambda = scan.points.iter();
    let rows = values
        .iter()
        .map(|&l| {
            if l <= 0.0 {
                return ScanRow {
                    parameter: l,
                    energy: None,
                    charge,
                    ratio: None,
                    status: "failed: lambda must be positive".into(),
                };
            }
            let p = by_lambda.next().expect("one point per positive lambda");
            ScanRow {
                parameter: l,
                energy: Some(p.total),
                charge,
                ratio: Some(p.total / (l * scan.sigma2_at_one)),
                status: "ok".into(),
            }
        })
        .collect();
    Ok(Scan {
        family: "derrick".into(),
        ratio: "energy/(lambda*energy(1))".into(),
        rows,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

pub fn scan_csv(scan: &Scan) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["parameter", "energy", "charge", "ratio", "status"])
        .map_err(io)?;
    for r in &scan.rows {
        w.write_record([
            format!("{}", r.parameter),
            opt(r.energy),
            r.charge.map(|c| c.to_string()).unwrap_or_default(),
            opt(r.ratio),
            r.status.clone(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

pub fn profile_csv(samples: &[(f64, f64, f64)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["s", "alpha", "alpha_prime"]).map_err(io)?;
    for (s, a, da) in samples {
        w.write_record([
            format!("{s:.16e}"),
            format!("{a:.16e}"),
            format!("{da:.16e}"),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

/// Potential named on the command line.
pub fn potential_from_name(name: &str, k: i32) -> Result<Potential> {
    Ok(match name {
        "new_baby" => Potential::new_baby(),
        "old_baby" => Potential::old_baby(),
        "quartic_sixteenth" => Potential::QuarticSixteenth,
        "charge_dependent" => Potential::ChargeDependent { k: k as f64 },
        "zero" => Potential::zero(),
        other => {
            return Err(Error::Config(format!(
                "unknown potential `{other}` (new_baby, old_baby, quartic_sixteenth, charge_dependent, zero)"
            )))
        }
    })
}

/// Caps rayon's global pool at `HOPFLUID_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("HOPFLUID_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("HOPFLUID_THREADS=`{v}` is not a positive integer")))?;
    if n == 0 {
        return Err(Error::Config("HOPFLUID_THREADS must be at least 1".into()));
    }
    // A pool built earlier in the process wins; that is fine for a cap.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

// ---------------------------------------------------------------------------
// Report directory

/// Cases run by `report`: every built-in at its defaults plus the parameter
/// values tabulated in the examples.
pub fn report_suite() -> Result<Vec<(String, CaseConfig)>> {
    let mut out = Vec::new();
    let mut push = |name: &str, params: &[(&str, i32)]| -> Result<()> {
        let p: Params = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let stem = std::iter::once(name.to_string())
            .chain(params.iter().map(|(k, v)| format!("{k}{v}")))
            .collect::<Vec<_>>()
            .join("_");
        out.push((stem, builtin_config(name, &p)?));
        Ok(())
    };
    push("r2xs1_winding", &[])?;
    for k in 1..=3 {
        push("s3_harmonic_k", &[("k", k)])?;
        push("s3_oldbaby_profile", &[("k", k)])?;
    }
    push("s3_khesin", &[])?;
    for (k, l) in [(1, 1), (2, 1), (2, 2)] {
        push("s3_squashed_kl", &[("k", k), ("l", l)])?;
        push("s3_conformal_kl", &[("k", k), ("l", l)])?;
    }
    push("s3_weighted_reeb", &[("k", 2), ("l", 3)])?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub case: String,
    pub file: String,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub schema: u32,
    pub cases: Vec<SuiteEntry>,
    pub tables: Vec<String>,
    pub pass: bool,
}

/// Writes one JSON report per case, scan and profile CSV tables and `summary.json` into `dir`.
pub fn write_report(dir: &std::path::Path, opts: RunOptions) -> Result<SuiteSummary> {
    std::fs::create_dir_all(dir)?;
    let mut cases = Vec::new();
    for (stem, cfg) in report_suite()? {
        let file = format!("{stem}.json");
        let entry = match run_verify(&cfg, opts) {
            Ok(rep) => {
                std::fs::write(dir.join(&file), to_json(&rep)?)?;
                SuiteEntry {
                    case: stem,
                    file,
                    pass: rep.pass,
                    error: None,
                }
            }
            Err(e) => SuiteEntry {
                case: stem,
                file: String::new(),
                pass: false,
                error: Some(e.to_string()),
            },
        };
        cases.push(entry);
    }
    let mut tables = Vec::new();
    let scans: [(&str, Vec<f64>); 4] = [
        ("s3_harmonic_k", (1..=8).map(f64::from).collect()),
        ("s3_squashed_kl", (1..=4).map(f64::from).collect()),
        ("s3_conformal_kl", (1..=4).map(f64::from).collect()),
        ("derrick", (2..=8).map(|i| i as f64 * 0.25).collect()),
    ];
    for (family, values) in scans {
        let file = format!("scan_{family}.csv");
        std::fs::write(dir.join(&file), scan_csv(&run_scan(family, &values)?)?)?;
        tables.push(file);
    }
    for (metric, k, l) in [
        (ScaledMetric::Squashed, 2, 1),
        (ScaledMetric::Conformal, 2, 1),
    ] {
        let sol = solve_profile(&ProfileProblem::new_baby(metric, k, l), DEFAULT_GRID)?;
        let file = format!(
            "profile_{}_k{k}_l{l}.csv",
            serde_json::to_value(metric)
                .unwrap_or_default()
                .as_str()
                .unwrap_or("metric")
        );
        std::fs::write(
            dir.join(&file),
            profile_csv(&crate::profile::profile_samples(&sol.profile, 257))?,
        )?;
        tables.push(file);
    }
    let pass = cases.iter().all(|c| c.pass);
    let summary = SuiteSummary {
        schema: SCHEMA,
        cases,
        tables,
        pass,
    };
    std::fs::write(dir.join("summary.json"), to_json(&summary)?)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_and_filters() {
        assert_eq!(list_cases(None).unwrap().len(), 7);
        assert_eq!(list_cases(Some("manifold=S3")).unwrap().len(), 6);
        assert_eq!(list_cases(Some("manifold=S³")).unwrap().len(), 6);
        assert_eq!(list_cases(Some("manifold=R2xS1")).unwrap().len(), 1);
        assert!(matches!(
            list_cases(Some("colour=red")),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn builtin_configs_roundtrip_through_toml() {
        for c in BUILTINS {
            let cfg = builtin_config(c.name, &Params::new()).unwrap();
            let text = cfg.to_toml().unwrap();
            assert_eq!(
                CaseConfig::from_toml(&text).unwrap(),
                cfg,
                "{}\n{text}",
                c.name
            );
        }
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        let base = builtin_config("s3_harmonic_k", &Params::new())
            .unwrap()
            .to_toml()
            .unwrap();
        let typo = base.replace("[tolerances]", "[tolerances]\nel_residul = 1e-6");
        let err = CaseConfig::from_toml(&typo).unwrap_err();
        assert!(
            matches!(&err, Error::Config(m) if m.contains("el_residul") && m.contains("line")),
            "{err}"
        );
        let mut neg = CaseConfig::from_toml(&base).unwrap();
        neg.tolerances.el_residual = -1.0;
        let text = neg.to_toml().unwrap();
        assert!(
            matches!(CaseConfig::from_toml(&text), Err(Error::Config(m)) if m.contains("el_residual"))
        );
        let mut p = Params::new();
        p.insert("q".into(), 2);
        assert!(builtin_config("s3_harmonic_k", &p).is_err());
    }

    #[test]
    fn json_uses_seventeen_digits_and_null_for_nan() {
        let s = to_json(&vec![0.1, f64::NAN, 2.0]).unwrap();
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("null"));
        assert!(s.contains("2.0000000000000000e0"));
        let back: Vec<Option<f64>> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![Some(0.1), None, Some(2.0)]);
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("k=1..4").unwrap().1, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(parse_range("k=1,2,8").unwrap().1, vec![1.0, 2.0, 8.0]);
        assert_eq!(
            parse_range("lambda=0.5..1.0:0.25").unwrap().1,
            vec![0.5, 0.75, 1.0]
        );
        assert!(parse_range("k=4..1").unwrap().1.is_empty());
        assert!(parse_range("k").is_err());
    }

    #[test]
    fn empty_scan_has_header_only() {
        let s = run_scan("s3_harmonic_k", &[]).unwrap();
        assert_eq!(
            scan_csv(&s).unwrap(),
            "parameter,energy,charge,ratio,status\n"
        );
        assert!(run_scan("s3_khesin", &[1.0]).is_err());
    }

    #[test]
    fn closed_forms() {
        assert!((harmonic_energy_closed_form(1.0) - 2.0 * PI * PI).abs() < 1e-12);
        assert!(
            (squashed_energy_reference(1.0, 1.0) - 2f64.powf(1.75) * PI.powf(3.5)).abs() < 1e-9
        );
        assert!((conformal_energy_closed_form(1.0, 1.0) - 23.10665).abs() < 1e-4);
    }
}
