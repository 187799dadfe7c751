//! Profile functions from the pointwise criticality condition `½λ₁²λ₂² = P̄∘φ`
//! on α-Hopf maps, and the coupled system of the old-baby profile.
//!
//! For the α-Hopf ansatz `φ*ω_R = R² sin α α' ds∧η` with `η = −k dφ₁ + ℓ dφ₂`,
//! so `σ₂ = R⁴ sin²α α'² G(s)` with `G = |ds∧η|²_g`. The condition separates into
//! `sin α dα / √(2P̄(cos α)) = ds / (R²√G)`, and the scale `a` of the metric is
//! fixed by requiring both sides to integrate to the same total.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::chart::{Geometry, MetricSpec, Point};
use crate::error::{Error, Result};
use crate::field_maps::{smooth_at_poles, AnsatzMap, Potential, ProfileFunction};
use crate::integration::{cumulative_1d, integrate_1d};
use crate::spline::CubicSpline;

pub const A_MAX: f64 = 10.0;
pub const BISECTION_TOL: f64 = 1e-12;
pub const DEFAULT_GRID: usize = 4096;
/// Distance from the poles kept by [`verify_profile`].
pub const POLE_MARGIN: f64 = 1e-3;

/// Metric families with a free overall scale `a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaledMetric {
    Squashed,
    Conformal,
}

impl ScaledMetric {
    pub fn spec(self, k: f64, l: f64, a: f64) -> MetricSpec {
        match self {
            ScaledMetric::Squashed => MetricSpec::S3Squashed { k, l, a },
            ScaledMetric::Conformal => MetricSpec::S3Conformal { k, l, a },
        }
    }

    /// Closed-form `a²` for the new baby potential on the sphere of radius ½.
    pub fn closed_form_a2(self, k: f64, l: f64) -> f64 {
        let c = PI / (4.0 * 2f64.sqrt());
        match self {
            ScaledMetric::Squashed => 3.0 * c * (k + l) / (k * k + k * l + l * l),
            ScaledMetric::Conformal => c * (k + l) / (k * l),
        }
    }

    /// Closed-form profile for the new baby potential.
    pub fn closed_form_profile(self, k: f64, l: f64) -> ProfileFunction {
        match self {
            ScaledMetric::Squashed => ProfileFunction::squashed(k, l),
            ScaledMetric::Conformal => ProfileFunction::conformal(k, l),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileProblem {
    pub metric: ScaledMetric,
    pub k: i32,
    pub l: i32,
    pub potential: Potential,
    pub target_radius: f64,
    /// `(α(0), α(π/2))`, each `0` or `π`.
    pub boundary: (f64, f64),
}

impl ProfileProblem {
    /// Problem of the squashed or conformal examples: new baby potential, `R = ½`, `α` from `π` to `0`.
    pub fn new_baby(metric: ScaledMetric, k: i32, l: i32) -> ProfileProblem {
        ProfileProblem {
            metric,
            k,
            l,
            potential: Potential::new_baby(),
            target_radius: 0.5,
            boundary: (PI, 0.0),
        }
    }

    pub fn geometry(&self, a: f64) -> Geometry {
        Geometry::s3(self.metric.spec(self.k as f64, self.l as f64, a))
    }

    pub fn map(&self, profile: ProfileFunction) -> AnsatzMap {
        AnsatzMap::alpha_hopf(self.k, self.l, profile, self.target_radius)
    }

    fn validate(&self) -> Result<()> {
        let at_pole = |a: f64| a.abs() < 1e-12 || (a - PI).abs() < 1e-12;
        let (a0, a1) = self.boundary;
        if !at_pole(a0) || !at_pole(a1) || (a0 - a1).abs() < 1.0 {
            return Err(Error::InadmissibleProfile { start: a0, end: a1 });
        }
        if self.k < 1 || self.l < 1 {
            return Err(Error::Incompatible(format!(
                "winding numbers ({}, {}) must be >= 1",
                self.k, self.l
            )));
        }
        if self.target_radius <= 0.0 {
            return Err(Error::Incompatible("target radius must be positive".into()));
        }
        Ok(())
    }

    /// `G(s) = |ds∧η|²` for the metric of scale `a`.
    pub fn area_weight(&self, a: f64, s: f64) -> Result<f64> {
        let gi = self.geometry(a).inverse_metric(&[s, 0.0, 0.0])?;
        let eta = [0.0, -(self.k as f64), self.l as f64];
        let ds_eta: f64 = (0..3).map(|j| gi[(0, j)] * eta[j]).sum();
        let eta_eta: f64 = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| gi[(i, j)] * eta[i] * eta[j])
            .sum();
        Ok(gi[(0, 0)] * eta_eta - ds_eta * ds_eta)
    }

    /// Right-hand side `1/(R²√G)` of the separated equation.
    fn source_rate(&self, a: f64, s: f64) -> f64 {
        let g = self.area_weight(a, s).expect("interior Gauss node");
        1.0 / (self.target_radius.powi(2) * g.sqrt())
    }

    /// Left-hand integrand `sin β / √(2P̄(cos β))` in the target angle.
    fn target_rate(&self, beta: f64) -> f64 {
        beta.sin() / (2.0 * self.potential.of_angle(beta)).sqrt()
    }

    /// `∫_0^{π/2} ds/(R²√G_a)`.
    fn source_total(&self, a: f64) -> f64 {
        integrate_1d(|s| self.source_rate(a, s), 0.0, FRAC_PI_2, 16, 8)
    }

    /// `∫_0^π sin β/√(2P̄(cos β)) dβ`, checking that the integrand keeps one sign.
    fn target_total(&self) -> Result<f64> {
        let probe = 512;
        for i in 0..probe {
            let beta = PI * (i as f64 + 0.5) / probe as f64;
            let p = self.potential.of_angle(beta);
            if !(p > 0.0) {
                return Err(Error::NonMonotoneProfile(format!(
                    "potential {} is {p:e} at height {:.6}",
                    self.potential.tag(),
                    beta.cos()
                )));
            }
        }
        Ok(integrate_1d(|b| self.target_rate(b), 0.0, PI, 16, 8))
    }

    /// Shooting defect: the profile started at one pole reaches the other exactly when this vanishes.
    pub fn shooting_defect(&self, a: f64) -> Result<f64> {
        Ok(self.source_total(a) - self.target_total()?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolvedProfile {
    pub profile: ProfileFunction,
    pub a: f64,
    pub smooth: bool,
    /// Bracket width at termination of the bisection on `a`.
    pub bracket: f64,
}

/// Bisection for `a ∈ (0, A_MAX]` followed by inversion of the separated equation on a `grid_n` point grid.
pub fn solve_profile(problem: &ProfileProblem, grid_n: usize) -> Result<SolvedProfile> {
    problem.validate()?;
    let target = problem.target_total()?;
    let defect = |a: f64| problem.source_total(a) - target;
    let mut lo = 1e-6;
    let mut hi = A_MAX;
    let (dlo, dhi) = (defect(lo), defect(hi));
    if !(dlo < 0.0 && dhi > 0.0) {
        return Err(Error::NoAdmissibleScale {
            a_max: A_MAX,
            reason: format!("shooting defect {dlo:e} at a = {lo:e} and {dhi:e} at a = {hi}"),
        });
    }
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if defect(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = 0.5 * (lo + hi);

    let n = grid_n.max(4);
    let grid: Vec<f64> = (0..n)
        .map(|i| FRAC_PI_2 * i as f64 / (n - 1) as f64)
        .collect();
    let b = cumulative_1d(|s| problem.source_rate(a, s), &grid, 8);
    let total = b[n - 1];
    let (start, end) = problem.boundary;
    let values: Vec<f64> = b
        .iter()
        .enumerate()
        .map(|(i, &bi)| {
            if i == 0 {
                return start;
            }
            if i == n - 1 {
                return end;
            }
            // Rescale so the tabulated profile meets the far pole exactly.
            let want = bi / total * target;
            invert_target(problem, want, start > end)
        })
        .collect();
    let profile = ProfileFunction::Tabulated(CubicSpline::not_a_knot(grid, values));
    let smooth = smooth_at_poles(&profile, problem.k, problem.l);
    Ok(SolvedProfile {
        profile,
        a,
        smooth,
        bracket: hi - lo,
    })
}

/// `β` with `∫_β^π w = want` for a decreasing profile, `∫_0^β w = want` otherwise,
/// where `w = sin β'/√(2P̄(cos β'))`. Bisection on the monotone partial integral.
fn invert_target(problem: &ProfileProblem, want: f64, decreasing: bool) -> f64 {
    let swept = |beta: f64| {
        if decreasing {
            integrate_1d(|b| problem.target_rate(b), beta, PI, 16, 4)
        } else {
            -integrate_1d(|b| problem.target_rate(b), 0.0, beta, 16, 4)
        }
    };
    let want = if decreasing { want } else { -want };
    let (mut lo, mut hi) = (0.0, PI);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if swept(mid) > want {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Sup of `|½σ₂ − P̄∘φ|` over interior points of `[POLE_MARGIN, π/2 − POLE_MARGIN]`.
pub fn verify_profile(problem: &ProfileProblem, profile: &ProfileFunction, a: f64) -> Result<f64> {
    let geom = problem.geometry(a);
    let map = problem.map(profile.clone());
    let n = 1000;
    let mut sup: f64 = 0.0;
    for i in 0..n {
        let s = POLE_MARGIN + (FRAC_PI_2 - 2.0 * POLE_MARGIN) * i as f64 / (n - 1) as f64;
        let x: Point = [s, 0.3, 0.7];
        let jet = map.jet(&geom, &x)?;
        let d = 0.5 * jet.sigma2 - problem.potential.value(&jet.phi, problem.target_radius);
        sup = sup.max(if d.is_nan() { f64::INFINITY } else { d.abs() });
    }
    Ok(sup)
}

/// Samples `(s, α, α')` for CSV export.
pub fn profile_samples(profile: &ProfileFunction, n: usize) -> Vec<(f64, f64, f64)> {
    let (lo, hi) = profile.domain();
    let hi = if hi.is_finite() { hi } else { 10.0 };
    (0..n)
        .map(|i| {
            let s = lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64;
            (s, profile.value(s), profile.derivative(s))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledSolution {
    pub k: i32,
    pub alpha: ProfileFunction,
    /// `h` as a function of `t = cos² s`.
    pub h: CubicSpline,
    /// Constant `h'`; dividing the two equations gives `k² h' = −2`.
    pub h_slope: f64,
    pub smooth: bool,
}

/// Solves `α' sin α = 2 sin 2s h(cos²s)` and `α' sin α = −k² sin 2s h h'(cos²s)`
/// with `α(0) = 0`, `α(π/2) = π`.
///
/// Dividing forces `h' = −2/k²`. In `t = cos² s` the first equation reads
/// `d cos α/dt = 2h`, so `cos α(t) = 1 − 2∫_t^1 h`, and `α(π/2) = π` fixes `∫_0^1 h = 1`.
pub fn solve_coupled_h(k: i32) -> Result<CoupledSolution> {
    if k < 1 {
        return Err(Error::Incompatible(format!("k = {k} must be >= 1")));
    }
    let kf = k as f64;
    let slope = -2.0 / (kf * kf);
    // h(t) = h0 + slope·t with ∫_0^1 h = h0 + slope/2 = 1.
    let h0 = 1.0 - slope / 2.0;
    let h = move |t: f64| h0 + slope * t;

    let n = DEFAULT_GRID;
    let ts: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let hs = CubicSpline::not_a_knot(ts.clone(), ts.iter().map(|&t| h(t)).collect());

    let ss: Vec<f64> = (0..n)
        .map(|i| FRAC_PI_2 * i as f64 / (n - 1) as f64)
        .collect();
    // Integrate from t = 1 (s = 0) downwards in t.
    let cum = cumulative_1d(|s| 2.0 * h(s.cos().powi(2)) * (2.0 * s).sin(), &ss, 8);
    let alpha: Vec<f64> = cum
        .iter()
        .enumerate()
        .map(|(i, c)| match i {
            0 => 0.0,
            i if i == n - 1 => PI,
            _ => (1.0 - c).clamp(-1.0, 1.0).acos(),
        })
        .collect();
    let alpha = ProfileFunction::Tabulated(CubicSpline::not_a_knot(ss, alpha));
    let smooth = smooth_at_poles(&alpha, k, k);
    Ok(CoupledSolution {
        k,
        alpha,
        h: hs,
        h_slope: slope,
        smooth,
    })
}

/// Sup over an interior grid of the residuals of both coupled equations.
pub fn coupled_residual(sol: &CoupledSolution) -> f64 {
    let k2 = (sol.k as f64).powi(2);
    let n = 1000;
    (1..n)
        .map(|i| {
            let s = FRAC_PI_2 * i as f64 / n as f64;
            let lhs = sol.alpha.derivative(s) * sol.alpha.value(s).sin();
            let t = s.cos().powi(2);
            let h = sol.h.eval(t);
            let dh = sol.h.eval(num_dual::Dual64::new(t, 1.0)).eps;
            let r1 = lhs - 2.0 * (2.0 * s).sin() * h;
            let r2 = lhs + k2 * (2.0 * s).sin() * h * dh;
            r1.abs().max(r2.abs())
        })
        .fold(0.0, f64::max)
}
