mod common;

use std::f64::consts::PI;

use common::cached_cases;
use hopfluid::chart::{Geometry, MetricSpec};
use hopfluid::field_maps::{AnsatzMap, Potential, ProfileFunction};
use hopfluid::integration::{integrate, integrate_1d, QuadratureSpec};
use hopfluid::variational::{energy, point_densities};

#[test]
fn doubling_the_orders_stays_within_the_error_estimate() {
    for (name, geom, map, pot) in cached_cases() {
        let base = QuadratureSpec::for_chart(&geom.chart);
        let doubled = QuadratureSpec::with_resolution(&geom.chart, 32, 4, 32);
        let e = energy(map, pot, 0.0, geom, &base).unwrap();
        let e2 = energy(map, pot, 0.0, geom, &doubled).unwrap();
        let change = (e2.total - e.total).abs();
        assert!(
            change <= e.quadrature_error_estimate.max(1e-12 * e.total.abs()),
            "{name}: change {change:e}, estimate {:e}",
            e.quadrature_error_estimate
        );
    }
}

#[test]
fn angle_independent_densities_factor_into_one_dimensional_integrals() {
    let cases = [
        (
            Geometry::s3(MetricSpec::S3Squashed {
                k: 2.0,
                l: 1.0,
                a: 0.8,
            }),
            AnsatzMap::alpha_hopf(2, 1, ProfileFunction::squashed(2.0, 1.0), 0.5),
            Potential::new_baby(),
        ),
        (
            Geometry::s3(MetricSpec::S3Round),
            AnsatzMap::alpha_hopf(3, 3, ProfileFunction::Harmonic { k: 3.0 }, 0.5),
            Potential::ChargeDependent { k: 3.0 },
        ),
        (
            Geometry::s3(MetricSpec::S3WeightedSasakian { k: 2.0, l: 3.0 }),
            AnsatzMap::alpha_hopf(1, 2, ProfileFunction::hopf().perturbed(0.3, 2), 0.5),
            Potential::old_baby(),
        ),
    ];
    for (geom, map, pot) in cases {
        let spec = QuadratureSpec::for_chart(&geom.chart);
        let density = |x: &[f64; 3]| {
            let d = point_densities(&map, &pot, &geom, x).unwrap();
            d[0] + d[2]
        };
        let full = integrate(|x| Ok(density(x)), &geom, &spec).unwrap();
        // The last level of the default rule has 8 Gauss panels on the s axis.
        let reduced = 4.0
            * PI
            * PI
            * integrate_1d(
                |s| density(&[s, 0.0, 0.0]) * geom.volume_density(&[s, 0.0, 0.0]).unwrap(),
                0.0,
                PI / 2.0,
                16,
                8,
            );
        assert!(
            (full.value - reduced).abs() <= 1e-12 * reduced.abs(),
            "{} vs {reduced}",
            full.value
        );
    }
}
