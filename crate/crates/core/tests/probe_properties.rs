use geoequiv::corpus;
use geoequiv::flow;
use geoequiv::probe::{self, ProbeOutcome, ProbeSettings, ReparamModel, Theorem2Verdict, VerdictClass, Witness};
use geoequiv::sampling;
use proptest::prelude::*;

fn null_class(c2: f64, c1: f64, c0: f64) -> VerdictClass {
    probe::classify_null(&ReparamModel::quadratic(c2, c1, c0)).unwrap().class
}

fn riemann_class(c: f64, cp: f64, cm: f64) -> VerdictClass {
    probe::classify_riemannian(&ReparamModel::exponential(c, cp, cm, 1.0)).unwrap().class
}

#[test]
fn null_truth_table() {
    use VerdictClass::*;
    let table = [
        ((0.0, 0.0, 2.0), AffineCompatible),
        ((0.0, 1.0, 2.0), FiniteTimeBlowup),
        ((1.0, 0.0, -1.0), FiniteTimeBlowup),
        ((1.0, 0.0, 1.0), BoundedRange),
        ((-1.0, 0.0, -1.0), BoundedRange),
        ((1.0, 2.0, 1.0), Ambiguous),
        ((1e-9, 0.0, 1.0), AffineCompatible),
    ];
    for ((c2, c1, c0), want) in table {
        assert_eq!(null_class(c2, c1, c0), want, "({c2}, {c1}, {c0})");
    }
    assert!(probe::classify_null(&ReparamModel::quadratic(0.0, 0.0, 0.0)).is_err());
}

#[test]
fn riemannian_truth_table() {
    use VerdictClass::*;
    assert_eq!(riemann_class(1.0, 0.0, 0.0), AffineCompatible);
    assert_eq!(riemann_class(1.0, 0.3, 0.0), Incomplete);
    assert_eq!(riemann_class(1.0, 0.0, 0.3), Incomplete);
    assert_eq!(riemann_class(1.0, 0.3, 0.3), Incomplete);
    assert!(probe::classify_null(&ReparamModel::exponential(1.0, 0.0, 0.0, 1.0)).is_err());
}

#[test]
fn range_width_matches_the_arctangent_integral() {
    let v = probe::classify_null(&ReparamModel::quadratic(1.0, 0.0, 1.0)).unwrap();
    match v.witness {
        Witness::RangeWidth { width } => assert!((width - std::f64::consts::PI).abs() < 1e-14),
        w => panic!("{w:?}"),
    }
    let v = probe::classify_null(&ReparamModel::quadratic(1.0, -3.0, 2.0)).unwrap();
    match v.witness {
        Witness::Roots { roots } => assert!((roots[0] - 1.0).abs() < 1e-14 && (roots[1] - 2.0).abs() < 1e-14),
        w => panic!("{w:?}"),
    }
}

#[test]
fn model_fit_rejects_the_wrong_family() {
    let ts: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
    let phi: Vec<f64> = ts.iter().map(|t| -0.5 * (1.0 + t.sin().powi(2) * 0.5).ln()).collect();
    assert!(probe::fit_reparam_model(&ts, &phi, probe::Branch::NullQuadratic, None, probe::MODEL_TOL).is_err());
    let phi: Vec<f64> = ts.iter().map(|t| -0.5 * (1.0 + 0.2 * t + 0.05 * t * t).ln()).collect();
    let m = probe::fit_reparam_model(&ts, &phi, probe::Branch::NullQuadratic, None, probe::MODEL_TOL).unwrap();
    assert!(m.residual < 1e-12 && m.positive);
    assert!(probe::fit_reparam_model(&ts, &phi, probe::Branch::RiemannExponential, None, 1.0).is_err());
}

fn classes(probes: &[probe::GeodesicProbe]) -> Vec<Option<VerdictClass>> {
    probes.iter().map(|p| p.class()).collect()
}

#[test]
fn affine_pairs_probe_as_affine_compatible() {
    for e in [corpus::affine_pair(3, (2, 1), 2.0).unwrap(), corpus::affine_bounded().unwrap()] {
        let (g, gbar) = e.pair().unwrap();
        let probes = probe::probe_null(g, gbar, &ProbeSettings { seed: 1, ..Default::default() }).unwrap();
        assert_eq!(probes.len(), 20);
        assert!(classes(&probes).iter().all(|c| *c == Some(VerdictClass::AffineCompatible)), "{}", e.name);
    }
}

#[test]
fn pseudo_beltrami_null_geodesics_blow_up() {
    let e = corpus::beltrami_pair(3, (2, 1)).unwrap();
    let (g, gbar) = e.pair().unwrap();
    let probes = probe::probe_null(g, gbar, &ProbeSettings { seed: 2, ..Default::default() }).unwrap();
    assert!(classes(&probes).iter().all(|c| *c == Some(VerdictClass::FiniteTimeBlowup)));
    for p in &probes {
        let ProbeOutcome::Classified { model, .. } = &p.result else { unreachable!() };
        assert!(model.residual < probe::MODEL_TOL);
    }
}

#[test]
fn riemannian_probes_follow_the_sign_of_b() {
    let e = corpus::sphere_flat_pair(3).unwrap();
    let (sphere, flat) = e.pair().unwrap();
    let pts = sampling::points_in(flat.domain(), 10, 3, 0.8);
    let b = probe::pair_b(flat, sphere, &pts).unwrap().unwrap();
    assert!(b.abs() < 1e-9);
    let pts = sampling::points_in(sphere.domain(), 10, 3, 0.8);
    assert!((probe::pair_b(sphere, flat, &pts).unwrap().unwrap() + 1.0).abs() < 1e-8);

    let e = corpus::beltrami_pair(3, (3, 0)).unwrap();
    let (g, gbar) = e.pair().unwrap();
    let settings = ProbeSettings { seed: 4, count: 6, ..Default::default() };
    let trajs = flow::integrate_batch(g, &flow::seeded_initial_data(g, 6, 4, 0.9, false, 0.1).unwrap(), (0.0, 10.0), 1e-10)
        .into_iter()
        .map(|t| {
            let mut t = t.unwrap();
            t.set_grid(200).unwrap();
            t
        })
        .collect::<Vec<_>>();
    let quad = probe::probe_quadratic(g, gbar, &trajs).unwrap();
    assert!(quad.iter().all(|p| p.class().is_some()));
    assert!(probe::probe_riemannian(g, gbar, -1.0, &settings).is_err());
    let affine = corpus::affine_pair(3, (3, 0), 3.0).unwrap();
    let (g, gbar) = affine.pair().unwrap();
    let probes = probe::probe_riemannian(g, gbar, 1.0, &settings).unwrap();
    assert!(classes(&probes).iter().all(|c| *c == Some(VerdictClass::AffineCompatible)));
}

#[test]
fn bounded_chart_gives_affine_equivalence() {
    let e = corpus::affine_bounded().unwrap();
    let (g, gbar) = e.pair().unwrap();
    let trajs = probe::null_geodesics(g, &ProbeSettings { seed: 5, ..Default::default() }).unwrap();
    let r = probe::theorem2_boundedness_test(g, gbar, &trajs, true).unwrap();
    assert_eq!(r.verdict, Theorem2Verdict::AffineEquivalent);
    assert!(r.max_c2_c1 < probe::THEOREM2_TOL);
    let r = probe::theorem2_boundedness_test(g, gbar, &trajs, false).unwrap();
    assert_eq!(r.verdict, Theorem2Verdict::NotApplicable);

    let e = corpus::beltrami_pair(3, (2, 1)).unwrap();
    let (g, gbar) = e.pair().unwrap();
    let trajs = probe::null_geodesics(g, &ProbeSettings { seed: 6, ..Default::default() }).unwrap();
    let r = probe::theorem2_boundedness_test(g, gbar, &trajs, true).unwrap();
    assert_eq!(r.verdict, Theorem2Verdict::Falsified);
}

#[test]
fn non_equivalent_pair_is_refused() {
    let e = corpus::non_equivalent3().unwrap();
    let (g, gbar) = e.pair().unwrap();
    assert!(probe::probe_null(g, gbar, &ProbeSettings::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn null_class_survives_time_shift_and_scaling(c2 in -2.0f64..2.0, c1 in -2.0f64..2.0, c0 in 0.1f64..2.0,
                                                  s in -1.0f64..1.0, k in 0.01f64..100.0, zero2 in any::<bool>()) {
        let c2 = if zero2 { 0.0 } else { c2 };
        let disc = c1 * c1 - 4.0 * c2 * c0;
        prop_assume!(disc.abs() > 1e-6);
        prop_assume!(c2 == 0.0 || c2.abs() > 1e-3);
        prop_assume!(c1.abs() > 1e-3 || c2 != 0.0);
        let base = null_class(c2, c1, c0);
        let shifted = null_class(c2, c1 + 2.0 * c2 * s, c0 + c1 * s + c2 * s * s);
        prop_assert_eq!(base, shifted);
        prop_assert_eq!(base, null_class(k * c2, k * c1, k * c0));
    }

    #[test]
    fn riemannian_class_survives_time_shift_and_scaling(c in 0.1f64..2.0, cp in -1.0f64..1.0, cm in -1.0f64..1.0,
                                                        s in -1.0f64..1.0, k in 0.01f64..100.0, affine in any::<bool>()) {
        let (cp, cm) = if affine { (0.0, 0.0) } else { (cp, cm) };
        prop_assume!(affine || cp.abs().max(cm.abs()) > 1e-3);
        let base = riemann_class(c, cp, cm);
        prop_assert_eq!(base, riemann_class(c, cp * s.exp(), cm * (-s).exp()));
        prop_assert_eq!(base, riemann_class(k * c, k * cp, k * cm));
    }
}
