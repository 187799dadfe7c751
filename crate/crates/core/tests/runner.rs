mod common;

use common::builtin_map;
use hopfluid::chart::MetricSpec;
use hopfluid::fluid::{dual_flow, khesin_flow, Poly};
use hopfluid::runner::{builtin_config, run_verify, to_json, CaseConfig, Params, RunOptions};

fn params(items: &[(&str, i32)]) -> Params {
    items.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let cfg = builtin_config("s3_squashed_kl", &params(&[("k", 2), ("l", 1)])).unwrap();
    let a = to_json(&run_verify(&cfg, RunOptions::default()).unwrap()).unwrap();
    let b = to_json(&run_verify(&cfg, RunOptions::default()).unwrap()).unwrap();
    assert_eq!(a, b);
    assert!(a.contains("\"schema\": 1"));
}

#[test]
fn every_builtin_case_passes_with_default_tolerances() {
    for (name, p) in [
        ("r2xs1_winding", params(&[])),
        ("s3_harmonic_k", params(&[("k", 2)])),
        ("s3_khesin", params(&[])),
        ("s3_oldbaby_profile", params(&[("k", 2)])),
        ("s3_squashed_kl", params(&[("k", 2), ("l", 1)])),
        ("s3_conformal_kl", params(&[("k", 2), ("l", 1)])),
        ("s3_weighted_reeb", params(&[])),
    ] {
        let cfg = builtin_config(name, &p).unwrap();
        let report = run_verify(&cfg, RunOptions::default()).unwrap();
        let failed: Vec<_> = report.gates.iter().filter(|g| !g.passed).collect();
        assert!(report.pass, "{name}: {failed:?}");
    }
}

#[test]
fn wrong_scale_factor_fails_the_gates() {
    let mut cfg = builtin_config("s3_squashed_kl", &params(&[("k", 2), ("l", 1)])).unwrap();
    if let MetricSpec::S3Squashed { a, .. } = &mut cfg.manifold {
        *a *= 1.1;
    }
    let cfg = CaseConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
    let report = run_verify(&cfg, RunOptions::default()).unwrap();
    assert!(!report.pass);
    assert!(report
        .gates
        .iter()
        .any(|g| g.name == "el_residual" && !g.passed));
}

#[test]
fn coupled_dual_flow_is_a_khesin_flow() {
    for k in 1..=3 {
        let (geom, map, pot) = builtin_map("s3_oldbaby_profile", &[("k", k)]);
        let dual = dual_flow(&map, &pot, &geom).unwrap();
        let kf = k as f64;
        let c = kf;
        // f₊(t) = k h(t) with h(t) = 1 + k⁻² − 2k⁻²t.
        let f_plus = Poly(vec![c * (1.0 + 1.0 / (kf * kf)), -2.0 * c / (kf * kf)]);
        let khesin = khesin_flow(Poly::zero(), f_plus);
        for x in [[0.2, 0.1, 0.3], [0.7, 2.0, 5.0], [1.3, 4.0, 1.0]] {
            let (v, w) = (dual.velocity(&x).unwrap(), khesin.velocity(&x).unwrap());
            assert!((v - w).amax() <= 1e-10, "k = {k} at {x:?}: {v:?} vs {w:?}");
        }
    }
}
