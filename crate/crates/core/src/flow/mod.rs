//! Geodesics of a chart metric and the scalar quantities monitored along
//! them.
//!
//! Geodesics are integrated as the first-order system `ẋ = v`,
//! `v̇^i = −Γ^i_jk v^j v^k` with an embedded Dormand–Prince 5(4) pair and
//! its continuous extension, so monitors can be sampled on uniform grids.

mod dopri;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::expr::Jet;
use crate::fit::{self, PolyFit, ThirdOrderModel};
use crate::linalg;
use crate::pair::{lambda_field, phi_field, residual_geodesic_equivalence, PairAField};
use crate::sampling;
use crate::tensor::{covariant_derivative, signature_of, ChartMetric, LocalGeometry, TensorField};

use dopri::DenseStep;

/// Fewest uniform samples accepted by the along-geodesic checks.
pub const MIN_SAMPLES: usize = 50;

/// Name of the monitor holding `g(γ̇,γ̇)`.
pub const SPEED_MONITOR: &str = "g(v,v)";

/// `|g(v,v)| / Σ|g_ij v^i v^j|` below which a velocity counts as null.
pub const NULL_THRESHOLD: f64 = 1e-9;

/// Local error tolerance of the solver relative to the requested tolerance.
const SOLVER_TOLERANCE_FACTOR: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    pub tolerance: f64,
}

/// A geodesic segment with dense output and optional monitor series on a
/// uniform grid.
#[derive(Clone, Debug)]
pub struct Trajectory {
    metric: ChartMetric,
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    dense: Vec<DenseStep>,
    stats: IntegratorStats,
    exit_time: Option<f64>,
    grid: Vec<f64>,
    monitors: BTreeMap<String, Vec<f64>>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn metric(&self) -> &ChartMetric {
        &self.metric
    }

    /// Times of the accepted steps, starting with the initial time.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// `(x, ẋ)` concatenated, at [`Trajectory::times`].
    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn stats(&self) -> &IntegratorStats {
        &self.stats
    }

    /// Time at which the curve left the chart box, if it did.
    pub fn exit_time(&self) -> Option<f64> {
        self.exit_time
    }

    pub fn exited(&self) -> bool {
        self.exit_time.is_some()
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }

    /// Position and velocity at any time of the integrated interval.
    pub fn state_at(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let (a, b) = (self.t_start().min(self.t_end()), self.t_start().max(self.t_end()));
        let slack = 1e-12 * (b - a).abs().max(1.0);
        if t < a - slack || t > b + slack {
            return Err(GeomError::Precondition(format!("t = {t} outside the integrated interval [{a}, {b}]")));
        }
        let n = self.dim();
        if self.dense.is_empty() {
            let s = &self.states[0];
            return Ok((s[..n].to_vec(), s[n..].to_vec()));
        }
        let dir = self.dense[0].h.signum();
        let k = self.dense.partition_point(|d| (t - d.t0) * dir >= 0.0).saturating_sub(1);
        let y = self.dense[k].eval(t);
        Ok((y[..n].to_vec(), y[n..].to_vec()))
    }

    /// Uniform sample times of the monitors.
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn grid_step(&self) -> f64 {
        if self.grid.len() < 2 {
            0.0
        } else {
            self.grid[1] - self.grid[0]
        }
    }

    pub fn monitor(&self, name: &str) -> Option<&[f64]> {
        self.monitors.get(name).map(Vec::as_slice)
    }

    pub fn monitors(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.monitors
    }

    /// Resamples on `samples` uniform times over the integrated interval,
    /// dropping previous monitors and recording `g(γ̇,γ̇)`.
    pub fn set_grid(&mut self, samples: usize) -> Result<()> {
        if samples < 2 {
            return Err(GeomError::InsufficientSamples(format!("a grid needs at least 2 samples, got {samples}")));
        }
        let (t0, t1) = (self.t_start(), self.t_end());
        self.grid = (0..samples).map(|k| t0 + (t1 - t0) * k as f64 / (samples - 1) as f64).collect();
        self.monitors.clear();
        let n = self.dim();
        let mut speed = Vec::with_capacity(samples);
        for &t in &self.grid {
            let (x, v) = self.state_at(t)?;
            speed.push(quadratic_form(&self.metric.values(&x)?, &v, n));
        }
        self.monitors.insert(SPEED_MONITOR.to_string(), speed);
        Ok(())
    }

    /// Records a scalar field along the grid.
    pub fn add_monitor(&mut self, name: &str, field: &dyn TensorField) -> Result<()> {
        if field.rank() != 0 || field.dim() != self.dim() {
            return Err(GeomError::Precondition("monitor must be a scalar field of the trajectory's dimension".into()));
        }
        let vals = self.sample_grid(|x, _| Ok(field.values(x)?[0]))?;
        self.monitors.insert(name.to_string(), vals);
        Ok(())
    }

    fn require_grid(&self, min: usize) -> Result<()> {
        if self.grid.len() < min {
            return Err(GeomError::InsufficientSamples(format!(
                "need a uniform grid of at least {min} samples, have {}",
                self.grid.len()
            )));
        }
        Ok(())
    }

    fn sample_grid<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        F: Fn(&[f64], &[f64]) -> Result<T> + Sync,
        T: Send,
    {
        self.grid
            .par_iter()
            .map(|&t| {
                let (x, v) = self.state_at(t)?;
                f(&x, &v)
            })
            .collect()
    }

    /// Max of `|g(γ̇,γ̇) − g(γ̇,γ̇)(t₀)|` over the grid.
    pub fn speed_drift(&self) -> Option<f64> {
        let s = self.monitors.get(SPEED_MONITOR)?;
        Some(s.iter().fold(0.0f64, |m, v| m.max((v - s[0]).abs())))
    }

    /// Max of `|ẍ + Γ(ẋ,ẋ)|` on the grid, with `ẍ` from the dense output.
    pub fn geodesic_residual(&self) -> Result<f64> {
        self.require_grid(2)?;
        let n = self.dim();
        if self.dense.is_empty() {
            return Ok(0.0);
        }
        let dir = self.dense[0].h.signum();
        let mut worst = 0.0f64;
        for &t in &self.grid {
            let k = self.dense.partition_point(|d| (t - d.t0) * dir >= 0.0).saturating_sub(1);
            let y = self.dense[k].eval(t);
            let dy = self.dense[k].eval_derivative(t);
            let acc = geodesic_acceleration(&self.metric, &y[..n], &y[n..])?;
            for i in 0..n {
                worst = worst.max((dy[n + i] - acc[i]).abs());
            }
        }
        Ok(worst)
    }

    /// CSV with columns `t, x.., v.., monitors..` on the grid (or at the
    /// accepted steps when no grid is set), 17 significant digits.
    pub fn to_csv(&self) -> Result<String> {
        let n = self.dim();
        let mut out = String::from("t");
        for c in self.metric.coords() {
            write!(out, ",{c}").expect("string write");
        }
        for c in self.metric.coords() {
            write!(out, ",d{c}").expect("string write");
        }
        let names: Vec<&String> = if self.grid.is_empty() { Vec::new() } else { self.monitors.keys().collect() };
        for m in &names {
            write!(out, ",{m}").expect("string write");
        }
        out.push('\n');
        let rows: Vec<(f64, Vec<f64>)> = if self.grid.is_empty() {
            self.times.iter().copied().zip(self.states.iter().cloned()).collect()
        } else {
            self.grid
                .iter()
                .map(|&t| {
                    let (x, v) = self.state_at(t)?;
                    Ok((t, [x, v].concat()))
                })
                .collect::<Result<_>>()?
        };
        for (r, (t, y)) in rows.iter().enumerate() {
            write!(out, "{t:.16e}").expect("string write");
            for v in &y[..2 * n] {
                write!(out, ",{v:.16e}").expect("string write");
            }
            for m in &names {
                write!(out, ",{:.16e}", self.monitors[*m][r]).expect("string write");
            }
            out.push('\n');
        }
        Ok(out)
    }
}

fn quadratic_form(g: &[f64], v: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += g[i * n + j] * v[i] * v[j];
        }
    }
    s
}

fn abs_quadratic_form(g: &[f64], v: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += (g[i * n + j] * v[i] * v[j]).abs();
        }
    }
    s
}

fn contract_gamma(gamma: &[f64], v: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let mut s = 0.0;
            for j in 0..n {
                for k in 0..n {
                    s += gamma[(i * n + j) * n + k] * v[j] * v[k];
                }
            }
            s
        })
        .collect()
}

/// `−Γ^i_jk v^j v^k` at `x`.
pub fn geodesic_acceleration(metric: &ChartMetric, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let geo = LocalGeometry::new(metric, x, 1)?;
    Ok(contract_gamma(&geo.christoffel_values(), v, x.len()).into_iter().map(|a| -a).collect())
}

/// Integrates the geodesic through `x0` with velocity `v0` over `t_span`.
/// Leaving the chart box ends the integration with a flag, not an error.
pub fn integrate(metric: &ChartMetric, x0: &[f64], v0: &[f64], t_span: (f64, f64), tol: f64) -> Result<Trajectory> {
    let n = metric.dim();
    for len in [x0.len(), v0.len()] {
        if len != n {
            return Err(GeomError::DimensionMismatch { expected: n, got: len });
        }
    }
    if !metric.domain().contains(x0) {
        return Err(GeomError::OutsideDomain { point: x0.to_vec() });
    }
    if v0.iter().all(|v| *v == 0.0) {
        return Err(GeomError::Precondition("initial velocity is zero".into()));
    }
    if !(tol > 0.0) || !t_span.0.is_finite() || !t_span.1.is_finite() {
        return Err(GeomError::Precondition("tolerance must be positive and the time span finite".into()));
    }
    let opts = dopri::Options {
        rtol: SOLVER_TOLERANCE_FACTOR * tol,
        atol: SOLVER_TOLERANCE_FACTOR * tol,
        max_steps: 2_000_000,
    };
    let rhs = |_t: f64, y: &[f64]| -> Result<Vec<f64>> {
        let (x, v) = y.split_at(n);
        let acc = geodesic_acceleration(metric, x, v)?;
        Ok([v, acc.as_slice()].concat())
    };
    let domain = metric.domain().clone();
    let y0 = [x0, v0].concat();
    let sol = dopri::solve(rhs, &y0, t_span.0, t_span.1, &opts, |y| domain.contains(&y[..n]))?;
    Ok(Trajectory {
        metric: metric.clone(),
        times: sol.ts,
        states: sol.ys,
        dense: sol.dense,
        stats: IntegratorStats {
            accepted: sol.accepted,
            rejected: sol.rejected,
            evaluations: sol.evals,
            tolerance: tol,
        },
        exit_time: sol.exit_time,
        grid: Vec::new(),
        monitors: BTreeMap::new(),
    })
}

/// Independent integrations in parallel, results in input order.
pub fn integrate_batch(metric: &ChartMetric, inits: &[(Vec<f64>, Vec<f64>)], t_span: (f64, f64), tol: f64) -> Vec<Result<Trajectory>> {
    inits.par_iter().map(|(x, v)| integrate(metric, x, v, t_span, tol)).collect()
}

/// A seeded null vector of the metric values `g` (row-major `n×n`), scaled
/// to unit max-norm.
pub fn null_vector(g: &[f64], n: usize, seed: u64) -> Result<Vec<f64>> {
    let (pos, neg) = signature_of(g, n).ok_or_else(|| GeomError::InvalidMetric("metric values are degenerate".into()))?;
    if pos == 0 || neg == 0 {
        return Err(GeomError::DefiniteSignature);
    }
    let (vals, vecs) = linalg::symmetric_eigen(g, n);
    let mut rng = sampling::rng(seed, 0x4e55_4c4c);
    let mut combine = |idx: Vec<usize>| -> Vec<f64> {
        let single = idx.len() == 1;
        let mut u = vec![0.0; n];
        for k in idx {
            let w: f64 = StandardNormal.sample(&mut rng);
            let w = if single { w.abs().max(1e-3) } else { w };
            for i in 0..n {
                u[i] += w * vecs[k][i];
            }
        }
        u
    };
    let u = combine((0..n).filter(|&k| vals[k] > 0.0).collect());
    let w = combine((0..n).filter(|&k| vals[k] < 0.0).collect());
    let su = quadratic_form(g, &u, n).sqrt();
    let sw = (-quadratic_form(g, &w, n)).sqrt();
    let mut v: Vec<f64> = (0..n).map(|i| u[i] / su + w[i] / sw).collect();
    let m = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    v.iter_mut().for_each(|x| *x /= m);
    Ok(v)
}

/// [`null_vector`] for the metric at `x`.
pub fn null_vector_at(metric: &ChartMetric, x: &[f64], seed: u64) -> Result<Vec<f64>> {
    null_vector(&metric.values(x)?, metric.dim(), seed)
}

/// Seeded initial data inside `metric`'s box shrunk by `margin`. Velocities
/// are null when `null` is set, otherwise random directions, and have
/// max-norm `speed`.
pub fn seeded_initial_data(
    metric: &ChartMetric,
    count: usize,
    seed: u64,
    margin: f64,
    null: bool,
    speed: f64,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let n = metric.dim();
    let points = sampling::points_in(metric.domain(), count, seed, margin);
    let mut rng = sampling::rng(seed, 0x5645_4c53);
    points
        .into_iter()
        .enumerate()
        .map(|(k, x)| {
            let v = if null {
                null_vector_at(metric, &x, seed.wrapping_add(k as u64))?
            } else {
                let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                let m = v.iter().fold(0.0f64, |m, x: &f64| m.max(x.abs()));
                v.iter_mut().for_each(|c| *c /= m);
                v
            };
            Ok((x, v.into_iter().map(|c| c * speed).collect()))
        })
        .collect()
}

/// `I(x,ξ) = g_pq co(a)^p_γ ξ^γ ξ^q` with `co` the adjugate of
/// `a^i_j = g^{ip} a_pj`, and the sum of the absolute values of its terms.
pub fn integral_i(g: &[f64], a: &[f64], xi: &[f64], n: usize) -> Result<(f64, f64)> {
    let (ginv, _) = linalg::inverse_via_adjugate(g, n, 0.0).ok_or_else(|| GeomError::InvalidMetric("metric values are degenerate".into()))?;
    let co = linalg::adjugate(&linalg::matmul(&ginv, a, n), n);
    let (mut val, mut scale) = (0.0, 0.0);
    for p in 0..n {
        for q in 0..n {
            for c in 0..n {
                let term = g[p * n + q] * co[p * n + c] * xi[c] * xi[q];
                val += term;
                scale += term.abs();
            }
        }
    }
    Ok((val, scale))
}

/// The comatrix integral sampled on a trajectory's grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegralSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// `max |I(t) − I(t₀)|` divided by the size of the terms of `I(t₀)`.
    pub drift: f64,
}

pub fn monitor_integral_i(g: &ChartMetric, a: &dyn TensorField, traj: &Trajectory) -> Result<IntegralSeries> {
    traj.require_grid(2)?;
    let n = g.dim();
    let vals = traj.sample_grid(|x, v| integral_i(&g.values(x)?, &a.values(x)?, v, n))?;
    let (i0, s0) = vals[0];
    let floor = s0.max(f64::MIN_POSITIVE);
    let drift = vals.iter().fold(0.0f64, |m, (v, _)| m.max((v - i0).abs())) / floor;
    Ok(IntegralSeries {
        times: traj.grid.clone(),
        values: vals.into_iter().map(|(v, _)| v).collect(),
        drift,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PainleveCheck {
    /// Max discrepancy relative to the term size of the comatrix form.
    pub max_discrepancy: f64,
    pub max_absolute: f64,
}

/// Compares the comatrix form of `I` with
/// `sgn(det g/det ḡ) |det g/det ḡ|^{2/(n+1)} ḡ(ξ,ξ)` along the grid.
pub fn painleve_cross_check(g: &ChartMetric, gbar: &ChartMetric, traj: &Trajectory) -> Result<PainleveCheck> {
    traj.require_grid(2)?;
    let n = g.dim();
    let a = PairAField::new(g, gbar)?;
    let rows = traj.sample_grid(|x, v| {
        let gv = g.values(x)?;
        let bv = gbar.values(x)?;
        let (ic, scale) = integral_i(&gv, &a.values(x)?, v, n)?;
        let r = linalg::det(&gv, n) / linalg::det(&bv, n);
        let ip = r.signum() * r.abs().powf(2.0 / (n as f64 + 1.0)) * quadratic_form(&bv, v, n);
        Ok(((ic - ip).abs(), scale.max(ip.abs())))
    })?;
    Ok(PainleveCheck {
        max_discrepancy: rows.iter().fold(0.0f64, |m, (d, s)| m.max(if *s > 0.0 { d / s } else { *d })),
        max_absolute: rows.iter().fold(0.0f64, |m, (d, _)| m.max(*d)),
    })
}

/// Along-geodesic check of `λ‴ = 4B g(γ̇,γ̇) λ′`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LambdaOdeCheck {
    pub samples: usize,
    pub lambda: Vec<f64>,
    /// Max of `|λ‴ − 4B g(γ̇,γ̇) λ′|`.
    pub residual: f64,
    /// Leading coefficient of a cubic least-squares fit of `λ(t)`.
    pub cubic_coefficient: f64,
    pub quadratic_fit: PolyFit,
}

pub fn check_lambda_ode(g: &ChartMetric, a: Arc<dyn TensorField>, traj: &Trajectory, b: f64) -> Result<LambdaOdeCheck> {
    traj.require_grid(MIN_SAMPLES)?;
    let n = g.dim();
    let lf = lambda_field(g, a)?;
    let rows = traj.sample_grid(|x, v| {
        let j = lf.jets(x, 1)?;
        let d1: f64 = (0..n).map(|i| j[0].d1(i) * v[i]).sum();
        let hess = covariant_derivative(g, &lf, x, 2)?;
        Ok((j[0].value(), d1, quadratic_form(&hess, v, n), quadratic_form(&g.values(x)?, v, n)))
    })?;
    let lambda: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let second: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let third = fit::uniform_derivative(&second, traj.grid_step());
    let residual = rows
        .iter()
        .zip(&third)
        .fold(0.0f64, |m, (r, l3)| m.max((l3 - 4.0 * b * r.3 * r.1).abs()));
    let rel: Vec<f64> = traj.grid.iter().map(|t| t - traj.grid[0]).collect();
    let cubic = fit::polyfit(&rel, &lambda, 3);
    Ok(LambdaOdeCheck {
        samples: lambda.len(),
        residual,
        cubic_coefficient: cubic.coeffs[3],
        quadratic_fit: fit::polyfit(&rel, &lambda, 2),
        lambda,
    })
}

fn require_equivalent_along(g: &ChartMetric, gbar: &ChartMetric, traj: &Trajectory) -> Result<()> {
    let picks = 5.min(traj.grid.len());
    for k in 0..picks {
        let t = traj.grid[k * (traj.grid.len() - 1) / (picks - 1).max(1)];
        let (x, _) = traj.state_at(t)?;
        let r = residual_geodesic_equivalence(g, gbar, &x)?;
        if !(r < 1e-6) {
            return Err(GeomError::Precondition(format!(
                "pair is not geodesically equivalent along the trajectory (residual {r:.3e} at t = {t})"
            )));
        }
    }
    Ok(())
}

fn require_null(traj: &Trajectory) -> Result<()> {
    let (x, v) = traj.state_at(traj.t_start())?;
    let gv = traj.metric.values(&x)?;
    let n = traj.dim();
    let q = quadratic_form(&gv, &v, n);
    let s = abs_quadratic_form(&gv, &v, n);
    if q.abs() > NULL_THRESHOLD * s {
        return Err(GeomError::Precondition(format!("trajectory is not lightlike (g(v,v) = {q:.3e})")));
    }
    Ok(())
}

/// Quadratic fit of `p(t) = e^{−2φ(γ(t))}` along a lightlike geodesic.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhiOdeCheck {
    pub samples: usize,
    pub p: Vec<f64>,
    /// Fit in absolute grid time, ascending powers.
    pub fit: PolyFit,
}

pub fn check_phi_ode(g: &ChartMetric, gbar: &ChartMetric, traj: &Trajectory) -> Result<PhiOdeCheck> {
    traj.require_grid(MIN_SAMPLES)?;
    require_null(traj)?;
    require_equivalent_along(g, gbar, traj)?;
    let pf = phi_field(g, gbar)?;
    let p = traj.sample_grid(|x, _| Ok((-2.0 * pf.values(x)?[0]).exp()))?;
    Ok(PhiOdeCheck {
        samples: p.len(),
        fit: fit::polyfit(&traj.grid, &p, 2),
        p,
    })
}

/// Fit of `p = e^{−2φ}` to the solutions of `p‴ = 4B g(γ̇,γ̇) p′` along a
/// geodesic of any causal type.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhiModelCheck {
    pub samples: usize,
    pub kappa: f64,
    pub model: ThirdOrderModel,
    pub residual: f64,
}

pub fn check_phi_model(g: &ChartMetric, gbar: &ChartMetric, traj: &Trajectory, b: f64) -> Result<PhiModelCheck> {
    traj.require_grid(MIN_SAMPLES)?;
    require_equivalent_along(g, gbar, traj)?;
    let pf = phi_field(g, gbar)?;
    let p = traj.sample_grid(|x, _| Ok((-2.0 * pf.values(x)?[0]).exp()))?;
    let speed = traj.monitors[SPEED_MONITOR][0];
    let kappa = 4.0 * b * speed;
    let (model, residual) = fit::fit_third_order(&traj.grid, &p, kappa);
    Ok(PhiModelCheck {
        samples: p.len(),
        kappa,
        model,
        residual,
    })
}

const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_08,
    0.478_628_670_499_366_47,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
];

/// The parameter `τ` turning a `g`-geodesic into a `ḡ`-geodesic.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Reparametrization {
    pub times: Vec<f64>,
    pub tau: Vec<f64>,
    pub tau_dot: Vec<f64>,
    /// Max of `|x'' + Γ̄(x',x')|` with primes in `τ`.
    pub gbar_residual: f64,
}

pub fn recover_reparametrization(g: &ChartMetric, gbar: &ChartMetric, traj: &Trajectory) -> Result<Reparametrization> {
    traj.require_grid(2)?;
    require_equivalent_along(g, gbar, traj)?;
    let n = g.dim();
    let pf = phi_field(g, gbar)?;
    let (x0, _) = traj.state_at(traj.grid[0])?;
    let phi0 = pf.values(&x0)?[0];
    let tau_dot_at = |t: f64| -> Result<f64> {
        let (x, _) = traj.state_at(t)?;
        Ok((2.0 * (pf.values(&x)?[0] - phi0)).exp())
    };
    let mut tau = vec![0.0];
    for w in traj.grid.windows(2) {
        let (mid, half) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
        let mut acc = 0.0;
        for (node, wt) in GL_NODES.iter().zip(GL_WEIGHTS) {
            acc += wt * tau_dot_at(mid + half * node)?;
        }
        tau.push(tau.last().expect("nonempty") + half * acc);
    }
    let rows = traj.sample_grid(|x, v| {
        let phi: Jet = pf.jets(x, 1)?.remove(0);
        let td = (2.0 * (phi.value() - phi0)).exp();
        let tdd = td * 2.0 * (0..n).map(|i| phi.d1(i) * v[i]).sum::<f64>();
        let acc = geodesic_acceleration(g, x, v)?;
        let gbar_geo = LocalGeometry::new(gbar, x, 1)?;
        let xp: Vec<f64> = v.iter().map(|c| c / td).collect();
        let gam = contract_gamma(&gbar_geo.christoffel_values(), &xp, n);
        let res = (0..n).fold(0.0f64, |m, i| m.max(((acc[i] * td - v[i] * tdd) / td.powi(3) + gam[i]).abs()));
        Ok((td, res))
    })?;
    Ok(Reparametrization {
        times: traj.grid.clone(),
        tau,
        tau_dot: rows.iter().map(|r| r.0).collect(),
        gbar_residual: rows.iter().fold(0.0f64, |m, r| m.max(r.1)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::DomainBox;

    fn flat(diag: &[f64]) -> ChartMetric {
        ChartMetric::diagonal_constant(diag, DomainBox::cube(diag.len(), 5.0), "flat").unwrap()
    }

    #[test]
    fn straight_line_in_flat_space() {
        let g = flat(&[1.0, 1.0, 1.0]);
        let tr = integrate(&g, &[0.0; 3], &[1.0, 0.0, 0.0], (0.0, 1.0), 1e-10).unwrap();
        let (x, v) = tr.state_at(1.0).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && x[1].abs() < 1e-12 && x[2].abs() < 1e-12);
        assert!((v[0] - 1.0).abs() < 1e-12);
        assert!(!tr.exited());
    }

    #[test]
    fn domain_exit_is_flagged() {
        let g = flat(&[1.0, 1.0, 1.0]);
        let tr = integrate(&g, &[0.0; 3], &[1.0, 0.0, 0.0], (0.0, 10.0), 1e-10).unwrap();
        assert!((tr.exit_time().unwrap() - 5.0).abs() < 1e-8);
    }

    #[test]
    fn null_vectors() {
        let v = null_vector(&[1.0, 0.0, 0.0, -1.0], 2, 3).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15);
        let g = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0];
        for seed in 0..20 {
            let v = null_vector(&g, 3, seed).unwrap();
            assert!(quadratic_form(&g, &v, 3).abs() < 1e-12);
            assert!((v.iter().fold(0.0f64, |m, x| m.max(x.abs())) - 1.0).abs() < 1e-15);
        }
        assert!(matches!(null_vector(&[1.0, 0.0, 0.0, 1.0], 2, 0), Err(GeomError::DefiniteSignature)));
    }

    #[test]
    fn integral_of_scaled_metric() {
        let g = [1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, -1.0];
        let a: Vec<f64> = g.iter().map(|v| 3.0 * v).collect();
        let xi = [0.3, -0.2, 0.5];
        let (i, _) = integral_i(&g, &a, &xi, 3).unwrap();
        assert!((i - 9.0 * quadratic_form(&g, &xi, 3)).abs() < 1e-14);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let g = flat(&[1.0, 1.0]);
        let mut tr = integrate(&g, &[0.0, 0.0], &[1.0, 1.0], (0.0, 1.0), 1e-10).unwrap();
        tr.set_grid(5).unwrap();
        let csv = tr.to_csv().unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x1,x2,dx1,dx2,g(v,v)");
        assert_eq!(lines.len(), 6);
        assert!(lines[5].starts_with("1.0000000000000000e0,"));
    }
}
