#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};

use hopfluid::chart::{Geometry, MetricSpec, Point};
use hopfluid::field_maps::{AnsatzMap, Potential};
use hopfluid::runner::{build_map, builtin_config, Params};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

/// 10³ cases with a fixed seed.
pub fn config() -> Config {
    Config {
        cases: 1000,
        rng_seed: RngSeed::Fixed(0x5eed_1234),
        failure_persistence: None,
        ..Config::default()
    }
}

/// Interior points of the Hopf chart, away from the poles by `margin`.
pub fn hopf_point(margin: f64) -> impl Strategy<Value = Point> {
    (margin..FRAC_PI_2 - margin, 0.0..2.0 * PI, 0.0..2.0 * PI).prop_map(|(s, a, b)| [s, a, b])
}

pub fn s3_metrics() -> Vec<MetricSpec> {
    vec![
        MetricSpec::S3Round,
        MetricSpec::S3Squashed {
            k: 2.0,
            l: 1.0,
            a: 0.8,
        },
        MetricSpec::S3Conformal {
            k: 2.0,
            l: 3.0,
            a: 0.6,
        },
        MetricSpec::S3WeightedSasakian { k: 2.0, l: 3.0 },
    ]
}

pub fn all_geometries() -> Vec<Geometry> {
    let mut out: Vec<Geometry> = s3_metrics().into_iter().map(Geometry::s3).collect();
    out.push(Geometry::euclidean());
    out.push(Geometry::cylindrical());
    out.push(Geometry::r2xs1());
    out
}

/// A regular point of `geom`'s chart built from three fractions in `(0, 1)`.
pub fn point_in(geom: &Geometry, u: [f64; 3]) -> Point {
    std::array::from_fn(|c| {
        let d = geom.chart.domain[c];
        match (d.lo.is_finite(), d.hi.is_finite()) {
            (true, true) => d.lo + u[c] * (d.hi - d.lo),
            (true, false) => d.lo + 0.05 + 4.0 * u[c],
            _ => -3.0 + 6.0 * u[c],
        }
    })
}

pub fn fractions() -> impl Strategy<Value = [f64; 3]> {
    (0.03..0.97f64, 0.03..0.97f64, 0.03..0.97f64).prop_map(|(a, b, c)| [a, b, c])
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// A built-in case by name and parameters, as geometry, map and potential.
pub fn builtin_map(name: &str, params: &[(&str, i32)]) -> (Geometry, AnsatzMap, Potential) {
    let params: Params = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let cfg = builtin_config(name, &params).unwrap();
    let (geom, map, _) = build_map(&cfg).unwrap();
    (geom, map.expect("case has a map"), cfg.potential)
}

/// Every built-in case that carries a map, with the parameters used in the report.
pub fn reference_cases() -> Vec<(String, Geometry, AnsatzMap, Potential)> {
    let mut out = vec![];
    let mut push = |name: &str, params: &[(&str, i32)]| {
        let (g, m, p) = builtin_map(name, params);
        let tag: Vec<String> = params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let label = if tag.is_empty() {
            name.to_string()
        } else {
            format!("{name}[{}]", tag.join(","))
        };
        out.push((label, g, m, p));
    };
    push("r2xs1_winding", &[]);
    for k in 1..=3 {
        push("s3_harmonic_k", &[("k", k)]);
        push("s3_oldbaby_profile", &[("k", k)]);
    }
    for (k, l) in [(1, 1), (2, 1), (2, 2)] {
        push("s3_squashed_kl", &[("k", k), ("l", l)]);
        push("s3_conformal_kl", &[("k", k), ("l", l)]);
    }
    out
}

pub fn cached_cases() -> &'static [(String, Geometry, AnsatzMap, Potential)] {
    static CASES: std::sync::OnceLock<Vec<(String, Geometry, AnsatzMap, Potential)>> =
        std::sync::OnceLock::new();
    CASES.get_or_init(reference_cases)
}
