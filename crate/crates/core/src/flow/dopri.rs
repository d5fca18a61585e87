//! Dormand–Prince 5(4) with Hairer's continuous extension.

use crate::error::{GeomError, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Clone, Copy, Debug)]
pub struct Options {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

/// Continuous extension on one accepted step.
#[derive(Clone, Debug)]
pub(crate) struct DenseStep {
    pub t0: f64,
    pub h: f64,
    r: [Vec<f64>; 5],
}

impl DenseStep {
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let s = (t - self.t0) / self.h;
        let u = 1.0 - s;
        let [r1, r2, r3, r4, r5] = &self.r;
        (0..r1.len())
            .map(|i| r1[i] + s * (r2[i] + u * (r3[i] + s * (r4[i] + u * r5[i]))))
            .collect()
    }

    /// Time derivative of the interpolant.
    pub fn eval_derivative(&self, t: f64) -> Vec<f64> {
        let s = (t - self.t0) / self.h;
        let u = 1.0 - s;
        let [_, r2, r3, r4, r5] = &self.r;
        (0..r2.len())
            .map(|i| {
                (r2[i] + (1.0 - 2.0 * s) * r3[i] + (2.0 * s * u - s * s) * r4[i] + (2.0 * s * u * u - 2.0 * s * s * u) * r5[i])
                    / self.h
            })
            .collect()
    }
}

pub(crate) struct Solution {
    pub ts: Vec<f64>,
    pub ys: Vec<Vec<f64>>,
    pub dense: Vec<DenseStep>,
    pub accepted: usize,
    pub rejected: usize,
    pub evals: usize,
    pub exit_time: Option<f64>,
}

fn axpy(y: &[f64], h: f64, terms: &[(f64, &[f64])]) -> Vec<f64> {
    let mut out = y.to_vec();
    for (c, k) in terms {
        for (o, v) in out.iter_mut().zip(k.iter()) {
            *o += h * c * v;
        }
    }
    out
}

fn err_norm(y0: &[f64], y1: &[f64], e: &[f64], o: &Options) -> f64 {
    let s: f64 = (0..y0.len())
        .map(|i| {
            let sk = o.atol + o.rtol * y0[i].abs().max(y1[i].abs());
            (e[i] / sk).powi(2)
        })
        .sum();
    (s / y0.len() as f64).sqrt()
}

/// Integrates `y' = f(t, y)` from `t0` to `t1`. `inside` is checked after
/// every accepted step; the first crossing is located on the dense output
/// and ends the integration.
pub(crate) fn solve<F, P>(f: F, y0: &[f64], t0: f64, t1: f64, opts: &Options, inside: P) -> Result<Solution>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
    P: Fn(&[f64]) -> bool,
{
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    let mut sol = Solution {
        ts: vec![t0],
        ys: vec![y0.to_vec()],
        dense: Vec::new(),
        accepted: 0,
        rejected: 0,
        evals: 0,
        exit_time: None,
    };
    if span == 0.0 {
        return Ok(sol);
    }
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = f(t, &y)?;
    sol.evals += 1;

    // initial step guess
    let scale = |v: &[f64], i: usize| opts.atol + opts.rtol * v[i].abs();
    let d0 = ((0..y.len()).map(|i| (y[i] / scale(&y, i)).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
    let d1 = ((0..y.len()).map(|i| (k1[i] / scale(&y, i)).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(span);
    let y_try = axpy(&y, dir * h, &[(1.0, &k1)]);
    if let Ok(f1) = f(t + dir * h, &y_try) {
        sol.evals += 1;
        let d2 = ((0..y.len()).map(|i| ((f1[i] - k1[i]) / scale(&y, i)).powi(2)).sum::<f64>() / y.len() as f64).sqrt() / h;
        let m = d1.max(d2);
        let h1 = if m <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / m).powf(0.2) };
        h = (100.0 * h).min(h1).min(span);
    }

    let h_min = 1e-14 * span.max(t0.abs()).max(1.0);
    let mut last_rejected = false;
    while (t1 - t) * dir > 0.0 {
        if sol.accepted + sol.rejected >= opts.max_steps {
            return Err(GeomError::StepUnderflow { t });
        }
        if h < h_min {
            return Err(GeomError::StepUnderflow { t });
        }
        let last = (t + dir * h - t1) * dir >= 0.0;
        if last {
            h = (t1 - t).abs();
        }
        let hs = dir * h;
        let stages = (|| -> Result<_> {
            let k2 = f(t + C2 * hs, &axpy(&y, hs, &[(A21, &k1)]))?;
            let k3 = f(t + C3 * hs, &axpy(&y, hs, &[(A31, &k1), (A32, &k2)]))?;
            let k4 = f(t + C4 * hs, &axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
            let k5 = f(t + C5 * hs, &axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
            let k6 = f(t + hs, &axpy(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]))?;
            let y1 = axpy(&y, hs, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let k7 = f(t + hs, &y1)?;
            Ok((k2, k3, k4, k5, k6, k7, y1))
        })();
        sol.evals += 6;
        let (_k2, k3, k4, k5, k6, k7, y1) = match stages {
            Ok(v) => v,
            Err(_) => {
                sol.rejected += 1;
                h *= 0.25;
                last_rejected = true;
                continue;
            }
        };
        let e: Vec<f64> = (0..y.len())
            .map(|i| hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]))
            .collect();
        let err = err_norm(&y, &y1, &e, opts);
        if !err.is_finite() || err > 1.0 {
            sol.rejected += 1;
            let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.2, 1.0) } else { 0.2 };
            h *= fac;
            last_rejected = true;
            continue;
        }
        let ydiff: Vec<f64> = (0..y.len()).map(|i| y1[i] - y[i]).collect();
        let bspl: Vec<f64> = (0..y.len()).map(|i| hs * k1[i] - ydiff[i]).collect();
        let r4: Vec<f64> = (0..y.len()).map(|i| ydiff[i] - hs * k7[i] - bspl[i]).collect();
        let r5: Vec<f64> = (0..y.len())
            .map(|i| hs * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]))
            .collect();
        let step = DenseStep {
            t0: t,
            h: hs,
            r: [y.clone(), ydiff, bspl, r4, r5],
        };
        sol.accepted += 1;
        let t_new = if last { t1 } else { t + hs };
        if !inside(&y1) {
            // bisect for the last parameter still inside the box
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if inside(&step.eval(t + mid * hs)) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let te = t + lo * hs;
            let ye = step.eval(te);
            sol.dense.push(step);
            if lo > 0.0 {
                sol.ts.push(te);
                sol.ys.push(ye);
            }
            sol.exit_time = Some(te);
            return Ok(sol);
        }
        sol.dense.push(step);
        sol.ts.push(t_new);
        sol.ys.push(y1.clone());
        t = t_new;
        y = y1;
        k1 = k7;
        let mut fac = (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 10.0);
        if last_rejected {
            fac = fac.min(1.0);
        }
        last_rejected = false;
        h *= fac;
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(tol: f64) -> Options {
        Options {
            rtol: tol,
            atol: tol,
            max_steps: 100_000,
        }
    }

    #[test]
    fn exponential_growth() {
        let s = solve(|_, y| Ok(vec![y[0]]), &[1.0], 0.0, 2.0, &opts(1e-12), |_| true).unwrap();
        let y = s.ys.last().unwrap()[0];
        assert!((y - 2f64.exp()).abs() < 1e-10 * 2f64.exp());
    }

    #[test]
    fn dense_output_tracks_harmonic_oscillator() {
        let s = solve(|_, y| Ok(vec![y[1], -y[0]]), &[0.0, 1.0], 0.0, 6.0, &opts(1e-11), |_| true).unwrap();
        for st in &s.dense {
            for q in [0.1, 0.37, 0.8] {
                let t = st.t0 + q * st.h;
                let v = st.eval(t);
                assert!((v[0] - t.sin()).abs() < 1e-9, "{t}");
                let d = st.eval_derivative(t);
                assert!((d[0] - t.cos()).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn backward_integration() {
        let s = solve(|_, y| Ok(vec![-y[0]]), &[1.0], 0.0, -1.0, &opts(1e-12), |_| true).unwrap();
        assert!((s.ys.last().unwrap()[0] - 1f64.exp()).abs() < 1e-10 * 3.0);
    }

    #[test]
    fn exit_is_located() {
        let s = solve(|_, _| Ok(vec![1.0]), &[0.0], 0.0, 5.0, &opts(1e-10), |y| y[0] < 1.5).unwrap();
        let te = s.exit_time.unwrap();
        assert!((te - 1.5).abs() < 1e-9);
    }
}
