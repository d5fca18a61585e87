use std::sync::Arc;

use geoequiv::corpus::{self, CorpusEntry};
use geoequiv::linalg;
use geoequiv::pair::{self, PairAField};
use geoequiv::sampling;
use geoequiv::tensor::{ChartMetric, DomainBox, TensorField};
use proptest::prelude::*;

const TOL: f64 = 1e-7;

fn pairs() -> Vec<CorpusEntry> {
    corpus::all().unwrap().into_iter().filter(|e| e.gbar.is_some()).collect()
}

fn scaled(m: &ChartMetric, c: f64) -> ChartMetric {
    let rows = m
        .source_rows()
        .into_iter()
        .map(|r| r.into_iter().map(|s| format!("({c:?})*({s})")).collect())
        .collect();
    ChartMetric::new(m.coords().to_vec(), rows, m.domain().clone(), format!("{}_scaled", m.label())).unwrap()
}

#[test]
fn criteria_agree_pointwise_on_every_pair() {
    for e in pairs() {
        let (g, gbar) = e.pair().unwrap();
        let pts = sampling::points_in(g.domain(), 30, 7, 0.9);
        for r in pair::sweep(g, gbar, &pts).unwrap() {
            let verdicts = [r.geodesic_equivalence < TOL, r.lc < TOL, r.basic < TOL];
            assert!(verdicts.iter().all(|v| *v == verdicts[0]), "{} at {:?}: {verdicts:?}", e.name, r.point);
            assert_eq!(verdicts[0], e.truth.equivalent, "{} at {:?}", e.name, r.point);
        }
    }
}

#[test]
fn identity_chain_holds_on_equivalent_pairs() {
    for e in pairs().into_iter().filter(|e| e.truth.equivalent) {
        let (g, gbar) = e.pair().unwrap();
        let pts = sampling::points_in(g.domain(), 30, 8, 0.9);
        for r in pair::sweep(g, gbar, &pts).unwrap() {
            assert!(r.int1.residual < TOL, "{} int1 {:e}", e.name, r.int1.residual);
            assert!(r.ricci_commute < TOL, "{} ricci {:e}", e.name, r.ricci_commute);
        }
    }
}

#[test]
fn lambda_gradient_matches_closed_form_at_every_point() {
    for e in pairs().into_iter().filter(|e| e.truth.equivalent) {
        let (g, gbar) = e.pair().unwrap();
        for x in sampling::points_in(g.domain(), 30, 9, 0.9) {
            let c = pair::lambda_sign_check(g, gbar, &x).unwrap();
            let scale = c.gradient.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            assert!(c.as_written < 1e-10 * scale, "{} at {x:?}: {:e}", e.name, c.as_written);
        }
    }
}

#[test]
fn affine_flag_means_equal_connections() {
    for e in pairs() {
        let (g, gbar) = e.pair().unwrap();
        for x in sampling::points_in(g.domain(), 10, 3, 0.9) {
            let gam = geoequiv::tensor::LocalGeometry::new(g, &x, 1).unwrap().christoffel_values();
            let bar = geoequiv::tensor::LocalGeometry::new(gbar, &x, 1).unwrap().christoffel_values();
            let diff = gam.iter().zip(&bar).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert_eq!(diff < 1e-12, e.truth.affine, "{} at {x:?}: {diff:e}", e.name);
        }
    }
}

#[test]
fn b_is_constant_and_shared_on_the_sphere() {
    let sphere = corpus::sphere_flat_pair(3).unwrap().g;
    let dom = sphere.domain().clone();
    let partners = [
        corpus::constant_metric(&[1.0, 1.0, 1.0], dom.clone(), "flat").unwrap(),
        corpus::constant_metric(&[2.0, 1.0, 0.5], dom.clone(), "flat_skew").unwrap(),
        corpus::beltrami_metric(&[2.0, 1.0, 1.0], dom.clone(), "beltrami_skew").unwrap(),
    ];
    let pts = sampling::points_in(&dom, 50, 4, 0.9);
    let mut means = Vec::new();
    for gbar in &partners {
        let a = PairAField::new(&sphere, gbar).unwrap();
        let mut bs = Vec::new();
        for x in &pts {
            let f = pair::fit_b_mu(&sphere, &a, x).unwrap();
            assert!(f.residual < 1e-6, "{} at {x:?}: {:e}", gbar.label(), f.residual);
            bs.push(f.b.expect("nonconstant solution"));
        }
        let (mean, std) = linalg::mean_std(&bs);
        assert!(std < 1e-6);
        means.push(mean);
    }
    for m in &means {
        assert!((m - means[0]).abs() < 1e-6);
        assert!((m + 1.0).abs() < 1e-6);
    }
}

#[test]
fn hessian_fit_is_exact_on_coordinate_planes() {
    let e = corpus::sphere_flat_pair(3).unwrap();
    let (g, gbar) = e.pair().unwrap();
    let a = PairAField::new(g, gbar).unwrap();
    for x in [[-0.1, 0.0, 0.2], [0.3, 0.0, 0.0], [0.0, 0.0, 0.2], [0.3, 0.2, 0.0], [0.0, 0.5, 0.0]] {
        let f = pair::fit_b_mu(g, &a, &x).unwrap();
        assert!(f.residual < 1e-10, "{x:?}: {:e}", f.residual);
        assert!((f.b.unwrap() + 1.0).abs() < 1e-10, "{x:?}: {:?}", f.b);
    }
}

#[test]
fn trace_identity_has_a_plus_sign() {
    let e = corpus::sphere_flat_pair(3).unwrap();
    let (g, gbar) = e.pair().unwrap();
    let a = PairAField::new(g, gbar).unwrap();
    for x in sampling::points_in(g.domain(), 20, 5, 0.9) {
        let f = pair::fit_b_mu(g, &a, &x).unwrap();
        assert!((f.mu - f.mu_from_trace).abs() < 1e-10);
        assert!((f.mu - f.mu_from_trace_alt_sign).abs() > 1e-3);
    }
}

#[test]
fn tanno_equation_on_the_sphere() {
    let e = corpus::sphere_flat_pair(3).unwrap();
    let (g, gbar) = e.pair().unwrap();
    let lam = pair::lambda_field(g, Arc::new(PairAField::new(g, gbar).unwrap())).unwrap();
    for x in sampling::points_in(g.domain(), 20, 6, 0.9) {
        assert!(pair::residual_tanno(g, &lam, -1.0, &x).unwrap() < 1e-8);
        assert!(pair::residual_tanno(g, &lam, 1.0, &x).unwrap() > 1e-4);
    }
}

#[test]
fn f1_constants_match_the_hessian_constant() {
    for e in [corpus::sphere_flat_pair(3).unwrap(), corpus::beltrami_pair(3, (2, 1)).unwrap(), corpus::beltrami_pair(4, (4, 0)).unwrap()] {
        let (g, gbar) = e.pair().unwrap();
        let pts = sampling::points_in(g.domain(), 30, 2, 0.9);
        let fit = pair::fit_f1_constants(g, gbar, &pts).unwrap();
        assert!(fit.residual < 1e-8, "{}: {:e}", e.name, fit.residual);
        let a = PairAField::new(g, gbar).unwrap();
        let b = pair::fit_b_mu(g, &a, &pts[0]).unwrap().b.unwrap();
        assert!((fit.b - b).abs() < 1e-6, "{}: {} vs {}", e.name, fit.b, b);
        for x in &pts {
            assert!(pair::residual_f1(g, gbar, fit.b, fit.b_bar, x).unwrap() < 1e-8);
        }
    }
}

#[test]
fn reconstruction_round_trips() {
    for e in pairs().into_iter().filter(|e| e.truth.equivalent) {
        let (g, gbar) = e.pair().unwrap();
        let a = PairAField::new(g, gbar).unwrap();
        for x in sampling::points_in(g.domain(), 50, 12, 0.9) {
            let rec = pair::reconstruct_gbar(g, &a, &x).unwrap();
            let want = gbar.values(&x).unwrap();
            let err = rec.iter().zip(&want).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
            assert!(err < 1e-10, "{} at {x:?}: {err:e}", e.name);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scaling_gbar_shifts_phi_by_a_constant(c in 0.2f64..5.0, u in [0.05f64..0.95, 0.05..0.95, 0.05..0.95], which in 0usize..3) {
        let e = [corpus::beltrami_pair(3, (2, 1)), corpus::sphere_flat_pair(3), corpus::non_equivalent3()][which].clone().unwrap();
        let (g, gbar) = e.pair().unwrap();
        let gc = scaled(gbar, c);
        let x = g.domain().from_unit(&u);
        let f = pair::pair_frame(g, gbar, &x).unwrap();
        let fc = pair::pair_frame(g, &gc, &x).unwrap();
        let shift = 3.0 * c.ln() / 8.0;
        prop_assert!((fc.phi - f.phi - shift).abs() < 1e-12);
        for (p, q) in f.phi_grad.iter().zip(&fc.phi_grad) {
            prop_assert!((p - q).abs() < 1e-12);
        }
        let (r, rc) = (pair::residual_lc(g, gbar, &x).unwrap(), pair::residual_lc(g, &gc, &x).unwrap());
        prop_assert!((r - rc).abs() < 1e-12);
    }

    #[test]
    fn proportional_solutions_have_constant_ratio(c in 0.2f64..5.0, which in 0usize..3) {
        let e = [corpus::beltrami_pair(3, (2, 1)), corpus::sphere_flat_pair(3), corpus::warped3()][which].clone().unwrap();
        let (g, gbar) = e.pair().unwrap();
        let a = PairAField::new(g, gbar).unwrap();
        let big_a = PairAField::new(g, &scaled(gbar, c)).unwrap();
        let ratios: Vec<f64> = sampling::points_in(g.domain(), 25, 3, 0.9)
            .iter()
            .map(|x| {
                let (f, misfit) = pair::pointwise_ratio(&a, &big_a, x).unwrap();
                assert!(misfit < 1e-10);
                f
            })
            .collect();
        let (mean, std) = linalg::mean_std(&ratios);
        prop_assert!(std < 1e-8);
        // a scales as c^{-1/(n+1)} when ḡ scales by c
        prop_assert!((mean - c.powf(0.25)).abs() < 1e-10 * mean);
    }
}

#[test]
fn dimension_mismatch_is_an_error() {
    let g = corpus::flat(3, (3, 0)).unwrap().g;
    let h = ChartMetric::diagonal_constant(&[1.0, 1.0, 1.0, 1.0], DomainBox::cube(4, 1.0), "flat4").unwrap();
    assert!(pair::residual_lc(&g, &h, &[0.0, 0.0, 0.0]).is_err());
    assert!(PairAField::new(&g, &h).is_err());
    let a = PairAField::new(&g, &g).unwrap();
    assert_eq!(a.rank(), 2);
}
