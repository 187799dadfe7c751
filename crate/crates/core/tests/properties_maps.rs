mod common;

use common::{builtin_map, cached_cases, config, fractions, point_in, rel};
use hopfluid::error::Error;
use hopfluid::field_maps::{smooth_at_poles, ProfileFunction};
use proptest::prelude::*;

proptest! {
    #![proptest_config(config())]

    #[test]
    fn area_density_is_product_of_strain_eigenvalues(u in fractions(), which in 0usize..13) {
        let (name, geom, map, _) = &cached_cases()[which];
        let x = point_in(geom, u);
        match map.strain_spectrum(geom, &x) {
            Ok(spec) => {
                let jet = map.jet(geom, &x).unwrap();
                let prod = spec.lambda1_sq * spec.lambda2_sq;
                prop_assert!(rel(jet.sigma2, prod) <= 1e-8, "{name}: {} vs {prod}", jet.sigma2);
            }
            Err(Error::RankDeficient { .. }) => {}
            Err(e) => panic!("{name}: {e}"),
        }
    }

    #[test]
    fn differential_kills_the_vertical_vector(u in fractions(), which in 0usize..13) {
        let (name, geom, map, _) = &cached_cases()[which];
        let x = point_in(geom, u);
        match map.vertical_unit(geom, &x) {
            Ok(v) => {
                let j = map.differential(geom, &x).unwrap();
                prop_assert!((j * v).amax() <= 1e-10, "{name}: dφ(U) = {:?}", j * v);
                prop_assert!((geom.norm(&x, &v).unwrap() - 1.0).abs() <= 1e-10);
            }
            Err(Error::RankDeficient { .. }) => {}
            Err(e) => panic!("{name}: {e}"),
        }
    }

    #[test]
    fn hopf_density_is_constant_one(u in fractions()) {
        let (geom, map, _) = builtin_map("s3_harmonic_k", &[("k", 1)]);
        let x = point_in(&geom, u);
        let s = map.strain_spectrum(&geom, &x).unwrap();
        prop_assert!((s.lambda1_sq * s.lambda2_sq - 1.0).abs() <= 1e-10);
        prop_assert!((s.lambda1_sq - s.lambda2_sq).abs() <= 1e-10);
    }
}

#[test]
fn smooth_exactly_for_windings_one_and_two() {
    for k in 1..=4 {
        for l in 1..=4 {
            let want = k <= 2 && l <= 2;
            let (kf, lf) = (k as f64, l as f64);
            for p in [
                ProfileFunction::squashed(kf, lf),
                ProfileFunction::conformal(kf, lf),
            ] {
                assert_eq!(smooth_at_poles(&p, k, l), want, "{p:?}");
            }
        }
    }
}
