//! Least-squares model fits on sampled scalar series.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::linalg;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolyFit {
    /// Coefficients in ascending powers of `t`.
    pub coeffs: Vec<f64>,
    /// Max absolute deviation of the fit from the samples.
    pub residual: f64,
}

impl PolyFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }
}

/// Polynomial least squares. The fit is carried out in `t / max|t|` and
/// mapped back, which keeps the Vandermonde matrix well conditioned.
pub fn polyfit(ts: &[f64], ys: &[f64], degree: usize) -> PolyFit {
    assert_eq!(ts.len(), ys.len());
    let scale = ts.iter().fold(0.0f64, |m, t| m.max(t.abs())).max(f64::MIN_POSITIVE);
    let m = ts.len();
    let design = DMatrix::from_fn(m, degree + 1, |r, c| (ts[r] / scale).powi(c as i32));
    let sol = linalg::lstsq(&design, &DVector::from_column_slice(ys));
    let coeffs: Vec<f64> = (0..=degree).map(|k| sol[k] / scale.powi(k as i32)).collect();
    let fit = PolyFit { coeffs, residual: 0.0 };
    let residual = ts.iter().zip(ys).fold(0.0f64, |w, (t, y)| w.max((fit.eval(*t) - y).abs()));
    PolyFit { residual, ..fit }
}

/// Solutions of `p''' = κ p'` for a fixed `κ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum ThirdOrderModel {
    /// `C + C₊ e^{ωt} + C₋ e^{−ωt}`, `ω = √κ`.
    Exponential { c: f64, c_plus: f64, c_minus: f64, omega: f64 },
    /// `C + A cos(ωt) + S sin(ωt)`, `ω = √−κ`.
    Trigonometric { c: f64, a: f64, s: f64, omega: f64 },
    /// `C₂ t² + C₁ t + C₀`.
    Quadratic { c2: f64, c1: f64, c0: f64 },
}

impl ThirdOrderModel {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            ThirdOrderModel::Exponential { c, c_plus, c_minus, omega } => c + c_plus * (omega * t).exp() + c_minus * (-omega * t).exp(),
            ThirdOrderModel::Trigonometric { c, a, s, omega } => c + a * (omega * t).cos() + s * (omega * t).sin(),
            ThirdOrderModel::Quadratic { c2, c1, c0 } => c0 + t * (c1 + t * c2),
        }
    }
}

/// Fits the general solution of `p''' = κ p'`; returns the model and the
/// max absolute deviation.
pub fn fit_third_order(ts: &[f64], ys: &[f64], kappa: f64) -> (ThirdOrderModel, f64) {
    let model = if kappa.abs() < 1e-14 {
        let p = polyfit(ts, ys, 2);
        ThirdOrderModel::Quadratic {
            c2: p.coeffs[2],
            c1: p.coeffs[1],
            c0: p.coeffs[0],
        }
    } else {
        let omega = kappa.abs().sqrt();
        let mid = 0.5 * (ts[0] + ts[ts.len() - 1]);
        let m = ts.len();
        let design = if kappa > 0.0 {
            DMatrix::from_fn(m, 3, |r, c| match c {
                0 => 1.0,
                1 => (omega * (ts[r] - mid)).exp(),
                _ => (-omega * (ts[r] - mid)).exp(),
            })
        } else {
            DMatrix::from_fn(m, 3, |r, c| match c {
                0 => 1.0,
                1 => (omega * ts[r]).cos(),
                _ => (omega * ts[r]).sin(),
            })
        };
        let sol = linalg::lstsq(&design, &DVector::from_column_slice(ys));
        if kappa > 0.0 {
            ThirdOrderModel::Exponential {
                c: sol[0],
                c_plus: sol[1] * (-omega * mid).exp(),
                c_minus: sol[2] * (omega * mid).exp(),
                omega,
            }
        } else {
            ThirdOrderModel::Trigonometric {
                c: sol[0],
                a: sol[1],
                s: sol[2],
                omega,
            }
        }
    };
    let res = ts.iter().zip(ys).fold(0.0f64, |w, (t, y)| w.max((model.eval(*t) - y).abs()));
    (model, res)
}

/// Second-order accurate derivative of uniformly sampled data.
pub fn uniform_derivative(ys: &[f64], dt: f64) -> Vec<f64> {
    let m = ys.len();
    assert!(m >= 3, "need at least three samples");
    let mut out = vec![0.0; m];
    out[0] = (-3.0 * ys[0] + 4.0 * ys[1] - ys[2]) / (2.0 * dt);
    out[m - 1] = (3.0 * ys[m - 1] - 4.0 * ys[m - 2] + ys[m - 3]) / (2.0 * dt);
    for i in 1..m - 1 {
        out[i] = (ys[i + 1] - ys[i - 1]) / (2.0 * dt);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cubic() {
        let ts: Vec<f64> = (0..60).map(|i| i as f64 * 0.2).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 1.0 - 2.0 * t + 0.5 * t * t + 0.01 * t * t * t).collect();
        let f = polyfit(&ts, &ys, 3);
        for (got, want) in f.coeffs.iter().zip([1.0, -2.0, 0.5, 0.01]) {
            assert!((got - want).abs() < 1e-10);
        }
        assert!(f.residual < 1e-10);
    }

    #[test]
    fn recovers_exponential_and_trigonometric_models() {
        let ts: Vec<f64> = (0..80).map(|i| i as f64 * 0.05).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 2.0 + 0.5 * (1.5 * t).exp() - 0.25 * (-1.5 * t).exp()).collect();
        let (m, r) = fit_third_order(&ts, &ys, 2.25);
        assert!(r < 1e-10);
        match m {
            ThirdOrderModel::Exponential { c, c_plus, c_minus, .. } => {
                assert!((c - 2.0).abs() < 1e-9 && (c_plus - 0.5).abs() < 1e-9 && (c_minus + 0.25).abs() < 1e-9)
            }
            _ => panic!("wrong family"),
        }
        let ys: Vec<f64> = ts.iter().map(|t| 1.0 + (2.0 * t).cos() - 3.0 * (2.0 * t).sin()).collect();
        let (_, r) = fit_third_order(&ts, &ys, -4.0);
        assert!(r < 1e-12);
    }

    #[test]
    fn derivative_is_exact_on_quadratics() {
        let ys: Vec<f64> = (0..10).map(|i| (i as f64 * 0.1).powi(2)).collect();
        let d = uniform_derivative(&ys, 0.1);
        for (i, v) in d.iter().enumerate() {
            assert!((v - 2.0 * i as f64 * 0.1).abs() < 1e-12);
        }
    }
}
