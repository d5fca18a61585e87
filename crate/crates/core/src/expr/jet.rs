//! Truncated multivariate Taylor values ("jets") up to third order.
//!
//! A [`Jet`] carries the value of a function together with all of its mixed
//! partial derivatives of total order `<= order` at one point. Arithmetic and
//! elementary functions propagate the partials exactly through the Leibniz
//! rule and Faà di Bruno's formula, so derivatives never pick up a
//! discretisation error.
//!
//! Storage is dense (`n`, `n^2`, `n^3`) but only index tuples with
//! `i <= j <= k` are computed; the remaining entries are copies, which makes
//! the Hessian and third-order arrays bit-identical under index permutation.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Highest derivative order a [`Jet`] can carry.
pub const MAX_ORDER: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    nvars: usize,
    order: usize,
    value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
    third: Vec<f64>,
}

impl Jet {
    pub fn constant(nvars: usize, order: usize, c: f64) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        Jet {
            nvars,
            order,
            value: c,
            grad: if order >= 1 { vec![0.0; nvars] } else { Vec::new() },
            hess: if order >= 2 { vec![0.0; nvars * nvars] } else { Vec::new() },
            third: if order >= 3 { vec![0.0; nvars * nvars * nvars] } else { Vec::new() },
        }
    }

    /// The coordinate function `x_idx` expanded at a point whose `idx`-th
    /// coordinate is `at`.
    pub fn variable(nvars: usize, order: usize, idx: usize, at: f64) -> Self {
        assert!(idx < nvars);
        let mut j = Jet::constant(nvars, order, at);
        if order >= 1 {
            j.grad[idx] = 1.0;
        }
        j
    }

    pub fn zero_like(&self) -> Self {
        Jet::constant(self.nvars, self.order, 0.0)
    }

    pub fn constant_like(&self, c: f64) -> Self {
        Jet::constant(self.nvars, self.order, c)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// First partials. Empty when `order == 0`.
    pub fn gradient(&self) -> &[f64] {
        &self.grad
    }

    /// Row-major `n x n` second partials. Empty when `order < 2`.
    pub fn hessian(&self) -> &[f64] {
        &self.hess
    }

    /// Row-major `n x n x n` third partials. Empty when `order < 3`.
    pub fn third(&self) -> &[f64] {
        &self.third
    }

    pub fn d1(&self, i: usize) -> f64 {
        self.grad[i]
    }

    pub fn d2(&self, i: usize, j: usize) -> f64 {
        self.hess[i * self.nvars + j]
    }

    pub fn d3(&self, i: usize, j: usize, k: usize) -> f64 {
        self.third[(i * self.nvars + j) * self.nvars + k]
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.iter().all(|v| v.is_finite())
            && self.hess.iter().all(|v| v.is_finite())
            && self.third.iter().all(|v| v.is_finite())
    }

    /// Drops every coefficient above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order {
            return self.clone();
        }
        Jet {
            nvars: self.nvars,
            order,
            value: self.value,
            grad: if order >= 1 { self.grad.clone() } else { Vec::new() },
            hess: if order >= 2 { self.hess.clone() } else { Vec::new() },
            third: Vec::new(),
        }
    }

    /// The jet of `∂f/∂x_k`, one order lower than `self`.
    pub fn partial(&self, k: usize) -> Jet {
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        let n = self.nvars;
        let order = self.order - 1;
        let mut out = Jet::constant(n, order, self.grad[k]);
        if order >= 1 {
            for i in 0..n {
                out.grad[i] = self.hess[k * n + i];
            }
        }
        if order >= 2 {
            for i in 0..n {
                for j in 0..n {
                    out.hess[i * n + j] = self.third[(k * n + i) * n + j];
                }
            }
        }
        out
    }

    fn combined_order(&self, other: &Jet) -> usize {
        debug_assert_eq!(self.nvars, other.nvars, "jets over different variable counts");
        self.order.min(other.order)
    }

    fn zip_linear(&self, other: &Jet, fa: f64, fb: f64) -> Jet {
        let order = self.combined_order(other);
        let mut out = Jet::constant(self.nvars, order, fa * self.value + fb * other.value);
        let lin = |dst: &mut Vec<f64>, a: &[f64], b: &[f64]| {
            for (d, (x, y)) in dst.iter_mut().zip(a.iter().zip(b)) {
                *d = fa * x + fb * y;
            }
        };
        if order >= 1 {
            lin(&mut out.grad, &self.grad, &other.grad);
        }
        if order >= 2 {
            lin(&mut out.hess, &self.hess, &other.hess);
        }
        if order >= 3 {
            lin(&mut out.third, &self.third, &other.third);
        }
        out
    }

    pub fn scale(&self, c: f64) -> Jet {
        let mut out = self.clone();
        out.value *= c;
        out.grad.iter_mut().for_each(|v| *v *= c);
        out.hess.iter_mut().for_each(|v| *v *= c);
        out.third.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn offset(&self, c: f64) -> Jet {
        let mut out = self.clone();
        out.value += c;
        out
    }

    pub fn mul_jet(&self, b: &Jet) -> Jet {
        let a = self;
        let n = a.nvars;
        let order = a.combined_order(b);
        let mut out = Jet::constant(n, order, a.value * b.value);
        if order >= 1 {
            for i in 0..n {
                out.grad[i] = a.grad[i] * b.value + a.value * b.grad[i];
            }
        }
        if order >= 2 {
            for i in 0..n {
                for j in i..n {
                    let v = a.hess[i * n + j] * b.value
                        + a.grad[i] * b.grad[j]
                        + a.grad[j] * b.grad[i]
                        + a.value * b.hess[i * n + j];
                    out.hess[i * n + j] = v;
                    out.hess[j * n + i] = v;
                }
            }
        }
        if order >= 3 {
            for i in 0..n {
                for j in i..n {
                    for k in j..n {
                        let v = a.third[(i * n + j) * n + k] * b.value
                            + a.hess[i * n + j] * b.grad[k]
                            + a.hess[i * n + k] * b.grad[j]
                            + a.hess[j * n + k] * b.grad[i]
                            + a.grad[i] * b.hess[j * n + k]
                            + a.grad[j] * b.hess[i * n + k]
                            + a.grad[k] * b.hess[i * n + j]
                            + a.value * b.third[(i * n + j) * n + k];
                        set_sym3(&mut out.third, n, i, j, k, v);
                    }
                }
            }
        }
        out
    }

    /// `f(self)` for a univariate `f`, given `d = [f, f', f'', f''']`
    /// evaluated at `self.value()`.
    pub fn compose(&self, d: [f64; 4]) -> Jet {
        let n = self.nvars;
        let order = self.order;
        let g = &self.grad;
        let h = &self.hess;
        let mut out = Jet::constant(n, order, d[0]);
        if order >= 1 {
            for i in 0..n {
                out.grad[i] = d[1] * g[i];
            }
        }
        if order >= 2 {
            for i in 0..n {
                for j in i..n {
                    let v = d[2] * g[i] * g[j] + d[1] * h[i * n + j];
                    out.hess[i * n + j] = v;
                    out.hess[j * n + i] = v;
                }
            }
        }
        if order >= 3 {
            for i in 0..n {
                for j in i..n {
                    for k in j..n {
                        let v = d[3] * g[i] * g[j] * g[k]
                            + d[2] * (h[i * n + j] * g[k] + h[i * n + k] * g[j] + h[j * n + k] * g[i])
                            + d[1] * self.third[(i * n + j) * n + k];
                        set_sym3(&mut out.third, n, i, j, k, v);
                    }
                }
            }
        }
        out
    }

    pub fn recip(&self) -> Jet {
        let x = self.value;
        let r = 1.0 / x;
        self.compose([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r])
    }

    pub fn exp(&self) -> Jet {
        let e = self.value.exp();
        self.compose([e, e, e, e])
    }

    /// Natural log. The caller guarantees a positive value.
    pub fn ln(&self) -> Jet {
        let x = self.value;
        self.compose([x.ln(), 1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x)])
    }

    /// `log|f|`; valid wherever `f != 0`.
    pub fn ln_abs(&self) -> Jet {
        let x = self.value;
        self.compose([x.abs().ln(), 1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x)])
    }

    pub fn sqrt(&self) -> Jet {
        let s = self.value.sqrt();
        let x = self.value;
        self.compose([s, 0.5 / s, -0.25 / (s * x), 0.375 / (s * x * x)])
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value.sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value.sin_cos();
        self.compose([c, -s, -c, s])
    }

    pub fn tan(&self) -> Jet {
        let t = self.value.tan();
        let sec2 = 1.0 + t * t;
        self.compose([t, sec2, 2.0 * t * sec2, 2.0 * sec2 * (1.0 + 3.0 * t * t)])
    }

    pub fn sinh(&self) -> Jet {
        let (s, c) = (self.value.sinh(), self.value.cosh());
        self.compose([s, c, s, c])
    }

    pub fn cosh(&self) -> Jet {
        let (s, c) = (self.value.sinh(), self.value.cosh());
        self.compose([c, s, c, s])
    }

    pub fn tanh(&self) -> Jet {
        let t = self.value.tanh();
        let sech2 = 1.0 - t * t;
        self.compose([t, sech2, -2.0 * t * sech2, 2.0 * sech2 * (3.0 * t * t - 1.0)])
    }

    /// Integer power by repeated multiplication (negative exponents go
    /// through one reciprocal).
    pub fn powi(&self, k: i32) -> Jet {
        if k == 0 {
            return self.constant_like(1.0);
        }
        let base = if k < 0 { self.recip() } else { self.clone() };
        let mut e = k.unsigned_abs();
        let mut acc: Option<Jet> = None;
        let mut sq = base;
        loop {
            if e & 1 == 1 {
                acc = Some(match acc {
                    None => sq.clone(),
                    Some(a) => a.mul_jet(&sq),
                });
            }
            e >>= 1;
            if e == 0 {
                break;
            }
            sq = sq.mul_jet(&sq);
        }
        acc.expect("nonzero exponent")
    }
}

fn set_sym3(t: &mut [f64], n: usize, i: usize, j: usize, k: usize, v: f64) {
    for (a, b, c) in [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
        t[(a * n + b) * n + c] = v;
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.zip_linear(rhs, 1.0, 1.0)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.zip_linear(rhs, 1.0, -1.0)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_jet(rhs)
    }
}

impl Div for &Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        self.mul_jet(&rhs.recip())
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet { (&self).$m(&rhs) }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet { (&self).$m(rhs) }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet { self.$m(&rhs) }
        }
    )*};
}
forward_owned!(Add add, Sub sub, Mul mul, Div div);

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        self.offset(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(n: usize, i: usize, at: f64) -> Jet {
        Jet::variable(n, 3, i, at)
    }

    #[test]
    fn bilinear_product() {
        let j = &var(2, 0, 1.0) * &var(2, 1, 1.0);
        assert_eq!(j.value(), 1.0);
        assert_eq!(j.gradient(), &[1.0, 1.0]);
        assert_eq!(j.hessian(), &[0.0, 1.0, 1.0, 0.0]);
        assert!(j.third().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exp_at_zero_has_unit_coefficients() {
        let j = var(1, 0, 0.0).exp();
        assert_eq!(j.value(), 1.0);
        assert_eq!(j.d1(0), 1.0);
        assert_eq!(j.d2(0, 0), 1.0);
        assert_eq!(j.d3(0, 0, 0), 1.0);
    }

    #[test]
    fn partial_shifts_coefficients() {
        // f = x^2 y, ∂f/∂x = 2xy
        let x = var(2, 0, 1.5);
        let y = var(2, 1, -0.5);
        let f = &(&x * &x) * &y;
        let fx = f.partial(0);
        assert_eq!(fx.order(), 2);
        assert!((fx.value() - 2.0 * 1.5 * -0.5).abs() < 1e-15);
        assert!((fx.d1(0) - 2.0 * -0.5).abs() < 1e-15);
        assert!((fx.d1(1) - 3.0).abs() < 1e-15);
        assert!((fx.d2(0, 1) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn mixed_orders_truncate_to_minimum() {
        let a = Jet::variable(2, 3, 0, 0.3);
        let b = Jet::variable(2, 1, 1, 0.7);
        let c = &a * &b;
        assert_eq!(c.order(), 1);
        assert_eq!(c.hessian().len(), 0);
    }

    #[test]
    fn powi_matches_repeated_product() {
        let x = &var(2, 0, 0.7) + &var(2, 1, -0.2);
        let p = x.powi(5);
        let mut q = x.clone();
        for _ in 0..4 {
            q = &q * &x;
        }
        for (a, b) in p.third().iter().zip(q.third()) {
            assert!((a - b).abs() < 1e-12);
        }
        let inv = x.powi(-2);
        let direct = (&x * &x).recip();
        assert!((inv.d3(0, 1, 1) - direct.d3(0, 1, 1)).abs() < 1e-10);
    }

    #[test]
    fn third_order_storage_is_symmetric() {
        let x = var(3, 0, 0.3);
        let y = var(3, 1, -0.4);
        let z = var(3, 2, 0.9);
        let f = (&(&x * &y).sin() * &z.exp()).tanh();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    assert_eq!(f.d3(i, j, k).to_bits(), f.d3(k, i, j).to_bits());
                    assert_eq!(f.d3(i, j, k).to_bits(), f.d3(j, i, k).to_bits());
                }
            }
        }
    }
}
