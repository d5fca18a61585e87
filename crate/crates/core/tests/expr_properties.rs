mod common;

use geoequiv::expr::Expression;
use proptest::prelude::*;

/// A polynomial in three variables as (coefficient, exponents) terms.
fn polynomial() -> impl Strategy<Value = Vec<(f64, [u32; 3])>> {
    prop::collection::vec((-3.0f64..3.0, [0u32..=4, 0u32..=4, 0u32..=4]), 1..6).prop_map(|terms| {
        terms
            .into_iter()
            .map(|(c, mut e)| {
                while e.iter().sum::<u32>() > 4 {
                    let k = e.iter().position(|&v| v > 0).unwrap();
                    e[k] -= 1;
                }
                (c, e)
            })
            .collect()
    })
}

fn poly_source(terms: &[(f64, [u32; 3])]) -> String {
    terms
        .iter()
        .map(|(c, e)| format!("({c:?})*x1^{}*x2^{}*x3^{}", e[0], e[1], e[2]))
        .collect::<Vec<_>>()
        .join("+")
}

fn falling(p: u32, k: u32) -> f64 {
    (0..k).map(|i| p as f64 - i as f64).product()
}

/// ∂^d of the polynomial with `d[i]` derivatives in variable `i`.
fn poly_derivative(terms: &[(f64, [u32; 3])], d: [u32; 3], x: &[f64]) -> f64 {
    terms
        .iter()
        .map(|(c, e)| {
            let mut v = *c;
            for i in 0..3 {
                if d[i] > e[i] {
                    return 0.0;
                }
                v *= falling(e[i], d[i]) * x[i].powi((e[i] - d[i]) as i32);
            }
            v
        })
        .sum()
}

fn multi_index(idx: &[usize]) -> [u32; 3] {
    let mut d = [0u32; 3];
    for &i in idx {
        d[i] += 1;
    }
    d
}

fn analytic_source(a: f64, b: f64, c: f64) -> String {
    format!("sin({a:?}*x1+x2)*exp({b:?}*x3) + log(2+cos(x1*x2)) + x3/(1.5+{c:?}*x1^2) + sqrt(4+x1*x3) + tanh(x2-x3)")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn polynomial_partials_match_hand_derivatives(terms in polynomial(), x in [-1.5f64..1.5, -1.5f64..1.5, -1.5f64..1.5]) {
        let e = Expression::parse(&poly_source(&terms), 3).unwrap();
        let j = e.eval_taylor(&x, 3).unwrap();
        let scale = terms.iter().map(|(c, _)| c.abs()).sum::<f64>() * 200.0;
        let close = |got: f64, want: f64| (got - want).abs() <= 1e-12 * scale.max(want.abs());
        prop_assert!(close(j.value(), poly_derivative(&terms, [0, 0, 0], &x)));
        for i in 0..3 {
            prop_assert!(close(j.d1(i), poly_derivative(&terms, multi_index(&[i]), &x)));
            for k in 0..3 {
                prop_assert!(close(j.d2(i, k), poly_derivative(&terms, multi_index(&[i, k]), &x)));
                for l in 0..3 {
                    prop_assert!(close(j.d3(i, k, l), poly_derivative(&terms, multi_index(&[i, k, l]), &x)));
                }
            }
        }
    }

    #[test]
    fn derivative_storage_is_permutation_symmetric(a in -2.0f64..2.0, b in -1.0f64..1.0, c in 0.0f64..1.0,
                                                   x in [-0.8f64..0.8, -0.8f64..0.8, -0.8f64..0.8]) {
        let e = Expression::parse(&analytic_source(a, b, c), 3).unwrap();
        let j = e.eval_taylor(&x, 3).unwrap();
        for i in 0..3 {
            for k in 0..3 {
                prop_assert_eq!(j.d2(i, k).to_bits(), j.d2(k, i).to_bits());
                for l in 0..3 {
                    let v = j.d3(i, k, l).to_bits();
                    for (p, q, r) in [(i, l, k), (k, i, l), (k, l, i), (l, i, k), (l, k, i)] {
                        prop_assert_eq!(v, j.d3(p, q, r).to_bits());
                    }
                }
            }
        }
    }

    #[test]
    fn gradients_converge_at_second_order(a in -2.0f64..2.0, b in -1.0f64..1.0, c in 0.0f64..1.0,
                                          x in [-0.8f64..0.8, -0.8f64..0.8, -0.8f64..0.8]) {
        let e = Expression::parse(&analytic_source(a, b, c), 3).unwrap();
        let j = e.eval_taylor(&x, 1).unwrap();
        for i in 0..3 {
            let err = |h: f64| {
                let mut p = x;
                let mut m = x;
                p[i] += h;
                m[i] -= h;
                ((e.eval(&p).unwrap() - e.eval(&m).unwrap()) / (2.0 * h) - j.d1(i)).abs()
            };
            // skip directions where the third derivative nearly vanishes
            if err(0.02) > 1e-9 {
                prop_assert!(common::observed_order(err, 0.02) >= 1.9, "order {}", common::observed_order(err, 0.02));
            }
        }
    }

    #[test]
    fn display_reparses_to_the_same_values(a in -2.0f64..2.0, b in -1.0f64..1.0, c in 0.0f64..1.0,
                                           x in [-0.8f64..0.8, -0.8f64..0.8, -0.8f64..0.8]) {
        let e = Expression::parse(&analytic_source(a, b, c), 3).unwrap();
        let again = Expression::parse(&e.to_string(), 3).unwrap();
        prop_assert_eq!(e.eval(&x).unwrap().to_bits(), again.eval(&x).unwrap().to_bits());
    }
}

#[test]
fn zero_base_integer_powers_keep_derivatives() {
    let e = Expression::parse("x1^2*x2^3", 2).unwrap();
    let j = e.eval_taylor(&[0.0, 0.0], 3).unwrap();
    assert_eq!(j.value(), 0.0);
    assert_eq!(j.d3(0, 0, 1), 0.0);
    let j = e.eval_taylor(&[0.0, 1.0], 2).unwrap();
    assert_eq!(j.d2(0, 0), 2.0);
}
