mod common;

use common::{cached_cases, config, fractions, point_in, rel};
use hopfluid::chart::{Geometry, MetricSpec, Point};
use hopfluid::error::{Error, Result};
use hopfluid::field_maps::{AnsatzMap, Potential, ProfileFunction};
use hopfluid::integration::QuadratureSpec;
use hopfluid::variational::{
    el_residual, energy, energy_derivative_fd, first_variation, stress_tensor_sigma2,
    tension_consistency, tension_sigma2,
};
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn off_shell() -> (Geometry, AnsatzMap) {
    let geom = Geometry::s3(MetricSpec::S3Conformal {
        k: 2.0,
        l: 3.0,
        a: 0.9,
    });
    let map = AnsatzMap::alpha_hopf(2, 3, ProfileFunction::hopf().perturbed(0.25, 3), 0.5);
    (geom, map)
}

/// `dφᵀτ + div S` with the divergence taken by central differences of `S`.
fn stress_identity_fd(map: &AnsatzMap, geom: &Geometry, x: &Point) -> Result<f64> {
    let tau = tension_sigma2(map, geom, x)?;
    let lhs = map.differential(geom, x)?.transpose() * tau;
    let ginv = geom.inverse_metric(x)?;
    let gamma = geom.christoffel_at(x)?;
    let s = stress_tensor_sigma2(map, geom, x)?;
    let ds: Vec<Matrix3<f64>> = (0..3)
        .map(|k| geom.partial(x, k, |y| stress_tensor_sigma2(map, geom, y)))
        .collect::<Result<_>>()?;
    let div = Vector3::from_fn(|j, _| {
        let mut acc = 0.0;
        for i in 0..3 {
            for k in 0..3 {
                let mut cov = ds[k][(i, j)];
                for l in 0..3 {
                    cov -= gamma[l][(k, i)] * s[(l, j)] + gamma[l][(k, j)] * s[(i, l)];
                }
                acc += ginv[(i, k)] * cov;
            }
        }
        acc
    });
    Ok((lhs + div).amax())
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn stress_divergence_identity_on_smooth_cases(u in fractions(), which in 0usize..13) {
        let (name, geom, map, _) = &cached_cases()[which];
        let x = point_in(geom, u);
        match stress_identity_fd(map, geom, &x) {
            Ok(d) => prop_assert!(d <= 1e-5, "{name}: defect {d} at {x:?}"),
            Err(Error::RankDeficient { .. }) | Err(Error::SingularPoint { .. }) => {}
            Err(e) => panic!("{name}: {e}"),
        }
    }

    #[test]
    fn stress_divergence_identity_off_shell(u in fractions()) {
        let (geom, map) = off_shell();
        let x = point_in(&geom, u);
        let d = stress_identity_fd(&map, &geom, &x).unwrap();
        prop_assert!(d <= 1e-5, "defect {d} at {x:?}");
    }

    #[test]
    fn constant_potential_leaves_the_residual_unchanged(u in fractions(), c in 0.0..5.0f64) {
        let (geom, map) = off_shell();
        let x = point_in(&geom, u);
        let a = el_residual(&map, &Potential::Constant { c }, &geom, &x).unwrap();
        let b = el_residual(&map, &Potential::zero(), &geom, &x).unwrap();
        for i in 0..3 {
            prop_assert!((a.vector_residual[i] - b.vector_residual[i]).abs() <= 1e-12 * b.norm.max(1.0));
        }
    }

    #[test]
    fn tension_and_residual_agree(u in fractions(), which in 0usize..13) {
        let (name, geom, map, pot) = &cached_cases()[which];
        let x = point_in(geom, u);
        match tension_consistency(map, pot, geom, &x) {
            Ok(d) => prop_assert!(d <= 1e-8, "{name}: {d}"),
            Err(Error::RankDeficient { .. }) => {}
            Err(e) => panic!("{name}: {e}"),
        }
    }
}

#[test]
fn energy_is_additive_in_kappa() {
    let (geom, map) = off_shell();
    let spec = QuadratureSpec::for_chart(&geom.chart);
    let pot = Potential::old_baby();
    let base = energy(&map, &pot, 0.0, &geom, &spec).unwrap();
    let dir = energy(&map, &Potential::zero(), 1.0, &geom, &spec)
        .unwrap()
        .dirichlet_term;
    for kappa in [0.5, 1.0, 3.0] {
        let full = energy(&map, &pot, kappa, &geom, &spec).unwrap();
        let sum = base.total + kappa * dir;
        assert!(rel(full.total, sum) <= 1e-10, "{} vs {sum}", full.total);
    }
}

#[test]
fn first_variation_matches_energy_difference_quotient() {
    let geom = Geometry::s3(MetricSpec::S3Round);
    let map = AnsatzMap::alpha_hopf(1, 2, ProfileFunction::hopf().perturbed(0.2, 2), 0.5);
    let pot = Potential::old_baby();
    let spec = QuadratureSpec::for_chart(&geom.chart);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..5 {
        let mode = rng.random_range(1..=6);
        let analytic = first_variation(&map, &pot, &geom, &spec, mode)
            .unwrap()
            .value;
        let fd = energy_derivative_fd(&map, &pot, &geom, &spec, mode, 1e-4).unwrap();
        assert!(
            (analytic - fd).abs() <= 1e-4 * fd.abs().max(1e-3),
            "mode {mode}: {analytic} vs {fd}"
        );
    }
}
