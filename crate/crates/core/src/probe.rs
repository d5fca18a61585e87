//! Completeness classification from the explicit solutions `p(t)` of the
//! reparametrization equation, and the bounded-chart test for lightlike
//! geodesics.
//!
//! Along a geodesic, `p = e^{−2φ}` solves `p‴ = 4B g(γ̇,γ̇) p′`, and the
//! projective parameter satisfies `τ̇ = 1/p` up to a constant factor.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::fit::{self, ThirdOrderModel};
use crate::flow::{self, Trajectory};
use crate::pair::{fit_b_mu, lambda_field, phi_field, residual_geodesic_equivalence, PairAField};
use crate::tensor::{ChartMetric, TensorField};

/// Coefficients below this fraction of the largest one count as zero.
pub const COEFFICIENT_TOL: f64 = 1e-7;
/// Half-width of the band around a zero discriminant, relative to the
/// squared coefficient scale.
pub const DISCRIMINANT_BAND: f64 = 1e-12;
/// Default max deviation for a model fit to be trusted.
pub const MODEL_TOL: f64 = 1e-6;
/// Bound on `max(|C2|, |C1|)` for the bounded-chart test.
pub const THEOREM2_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Branch {
    NullQuadratic,
    RiemannExponential,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "family")]
pub enum Coefficients {
    /// `p = C2 t² + C1 t + C0`.
    Quadratic { c2: f64, c1: f64, c0: f64 },
    /// `p = C + C₊ e^{ωt} + C₋ e^{−ωt}`.
    Exponential { c: f64, c_plus: f64, c_minus: f64, omega: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReparamModel {
    pub branch: Branch,
    pub coefficients: Coefficients,
    pub residual: f64,
    pub samples: usize,
    /// The fitted `p` stays positive on the sampled window.
    pub positive: bool,
}

impl ReparamModel {
    pub fn quadratic(c2: f64, c1: f64, c0: f64) -> Self {
        ReparamModel {
            branch: Branch::NullQuadratic,
            coefficients: Coefficients::Quadratic { c2, c1, c0 },
            residual: 0.0,
            samples: 0,
            positive: true,
        }
    }

    pub fn exponential(c: f64, c_plus: f64, c_minus: f64, omega: f64) -> Self {
        ReparamModel {
            branch: Branch::RiemannExponential,
            coefficients: Coefficients::Exponential { c, c_plus, c_minus, omega },
            residual: 0.0,
            samples: 0,
            positive: true,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self.coefficients {
            Coefficients::Quadratic { c2, c1, c0 } => c0 + t * (c1 + t * c2),
            Coefficients::Exponential { c, c_plus, c_minus, omega } => c + c_plus * (omega * t).exp() + c_minus * (-omega * t).exp(),
        }
    }
}

/// Parameters of the exponential branch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentialParams {
    pub b: f64,
    /// `g(γ̇,γ̇)`.
    pub speed: f64,
}

/// Fits `p = e^{−2φ}` in the model family of `branch`; the fit is rejected
/// when its max deviation exceeds `tol`.
pub fn fit_reparam_model(times: &[f64], phi: &[f64], branch: Branch, params: Option<ExponentialParams>, tol: f64) -> Result<ReparamModel> {
    if times.len() != phi.len() {
        return Err(GeomError::DimensionMismatch {
            expected: times.len(),
            got: phi.len(),
        });
    }
    if times.len() < flow::MIN_SAMPLES {
        return Err(GeomError::InsufficientSamples(format!(
            "model fits need at least {} samples, got {}",
            flow::MIN_SAMPLES,
            times.len()
        )));
    }
    let p: Vec<f64> = phi.iter().map(|f| (-2.0 * f).exp()).collect();
    let (coefficients, residual) = match branch {
        Branch::NullQuadratic => {
            let f = fit::polyfit(times, &p, 2);
            (
                Coefficients::Quadratic {
                    c2: f.coeffs[2],
                    c1: f.coeffs[1],
                    c0: f.coeffs[0],
                },
                f.residual,
            )
        }
        Branch::RiemannExponential => {
            let ExponentialParams { b, speed } =
                params.ok_or_else(|| GeomError::Precondition("the exponential branch needs B and g(γ̇,γ̇)".into()))?;
            if !(b > 0.0 && speed > 0.0) {
                return Err(GeomError::Precondition(format!(
                    "the exponential branch needs B > 0 and g(γ̇,γ̇) > 0, got B = {b}, g(γ̇,γ̇) = {speed}"
                )));
            }
            let omega = 2.0 * (b * speed).sqrt();
            match fit::fit_third_order(times, &p, omega * omega) {
                (ThirdOrderModel::Exponential { c, c_plus, c_minus, omega }, r) => (Coefficients::Exponential { c, c_plus, c_minus, omega }, r),
                _ => unreachable!("positive rate gives the exponential family"),
            }
        }
    };
    if !(residual <= tol) {
        return Err(GeomError::ModelRejected { residual, tol });
    }
    let mut model = ReparamModel {
        branch,
        coefficients,
        residual,
        samples: times.len(),
        positive: true,
    };
    model.positive = times.iter().all(|t| model.eval(*t) > 0.0);
    Ok(model)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum VerdictClass {
    AffineCompatible,
    FiniteTimeBlowup,
    BoundedRange,
    Incomplete,
    /// Discriminant inside the guard band; no class is asserted.
    Ambiguous,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Witness {
    /// `τ̇ = 1/C0` (or `1/C`).
    AffineRate { tau_dot: f64 },
    /// Real roots of `p`, where `τ` explodes.
    Roots { roots: Vec<f64> },
    /// `sup τ − inf τ` over the whole line.
    RangeWidth { width: f64 },
    /// A nonzero exponential coefficient.
    Coefficient { name: String, value: f64 },
    Discriminant { value: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompletenessVerdict {
    pub class: VerdictClass,
    pub witness: Witness,
}

fn zero_scale(cs: &[f64]) -> Result<f64> {
    let s = cs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if !(s > 0.0) || !s.is_finite() {
        return Err(GeomError::Precondition("model coefficients vanish or are not finite".into()));
    }
    Ok(s)
}

/// Classifies `τ̇ = 1/(C2 t² + C1 t + C0)`.
pub fn classify_null(model: &ReparamModel) -> Result<CompletenessVerdict> {
    let Coefficients::Quadratic { c2, c1, c0 } = model.coefficients else {
        return Err(GeomError::Precondition("classify_null needs a quadratic model".into()));
    };
    let scale = zero_scale(&[c2, c1, c0])?;
    let zero = |c: f64| c.abs() <= COEFFICIENT_TOL * scale;
    let verdict = |class, witness| Ok(CompletenessVerdict { class, witness });
    if zero(c2) && zero(c1) {
        return verdict(VerdictClass::AffineCompatible, Witness::AffineRate { tau_dot: 1.0 / c0 });
    }
    if zero(c2) {
        return verdict(VerdictClass::FiniteTimeBlowup, Witness::Roots { roots: vec![-c0 / c1] });
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc.abs() <= DISCRIMINANT_BAND * scale * scale {
        return verdict(VerdictClass::Ambiguous, Witness::Discriminant { value: disc });
    }
    if disc > 0.0 {
        let q = -0.5 * (c1 + c1.signum() * disc.sqrt());
        let mut roots = vec![q / c2, c0 / q];
        roots.sort_by(f64::total_cmp);
        return verdict(VerdictClass::FiniteTimeBlowup, Witness::Roots { roots });
    }
    verdict(
        VerdictClass::BoundedRange,
        Witness::RangeWidth {
            width: 2.0 * PI / (-disc).sqrt(),
        },
    )
}

/// Classifies `τ̇ = 1/(C + C₊ e^{ωt} + C₋ e^{−ωt})`.
pub fn classify_riemannian(model: &ReparamModel) -> Result<CompletenessVerdict> {
    let Coefficients::Exponential { c, c_plus, c_minus, .. } = model.coefficients else {
        return Err(GeomError::Precondition("classify_riemannian needs an exponential model".into()));
    };
    let scale = zero_scale(&[c, c_plus, c_minus])?;
    let zero = |v: f64| v.abs() <= COEFFICIENT_TOL * scale;
    let (class, witness) = if zero(c_plus) && zero(c_minus) {
        (VerdictClass::AffineCompatible, Witness::AffineRate { tau_dot: 1.0 / c })
    } else {
        let (name, value) = if c_plus.abs() >= c_minus.abs() { ("C+", c_plus) } else { ("C-", c_minus) };
        (
            VerdictClass::Incomplete,
            Witness::Coefficient {
                name: name.to_string(),
                value,
            },
        )
    };
    Ok(CompletenessVerdict { class, witness })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "outcome")]
pub enum ProbeOutcome {
    Classified { model: ReparamModel, verdict: CompletenessVerdict },
    /// The model family does not fit `p` within tolerance.
    Rejected { residual: f64, tol: f64 },
}

/// One probed geodesic.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeodesicProbe {
    pub start: Vec<f64>,
    pub velocity: Vec<f64>,
    pub t_end: f64,
    pub exited: bool,
    pub result: ProbeOutcome,
}

impl GeodesicProbe {
    pub fn class(&self) -> Option<VerdictClass> {
        match &self.result {
            ProbeOutcome::Classified { verdict, .. } => Some(verdict.class),
            ProbeOutcome::Rejected { .. } => None,
        }
    }
}

fn require_equivalent(g: &ChartMetric, gbar: &ChartMetric, points: &[Vec<f64>]) -> Result<()> {
    for x in points {
        let r = residual_geodesic_equivalence(g, gbar, x)?;
        if !(r < 1e-6) {
            return Err(GeomError::Precondition(format!(
                "pair is not geodesically equivalent (residual {r:.3e} at {x:?})"
            )));
        }
    }
    Ok(())
}

/// Sampling of a probe batch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProbeSettings {
    pub count: usize,
    pub seed: u64,
    pub t_span: (f64, f64),
    pub tol: f64,
    pub samples: usize,
    pub speed: f64,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        ProbeSettings {
            count: 20,
            seed: 0,
            t_span: (0.0, 10.0),
            tol: 1e-10,
            samples: 200,
            speed: 0.1,
        }
    }
}

/// Seeded lightlike geodesics of `g`, with their grids set.
pub fn null_geodesics(g: &ChartMetric, settings: &ProbeSettings) -> Result<Vec<Trajectory>> {
    let inits = flow::seeded_initial_data(g, settings.count, settings.seed, 0.5, true, settings.speed)?;
    flow::integrate_batch(g, &inits, settings.t_span, settings.tol)
        .into_iter()
        .map(|t| {
            let mut t = t?;
            t.set_grid(settings.samples)?;
            Ok(t)
        })
        .collect()
}

fn scalar_series(phi: &dyn TensorField, traj: &Trajectory) -> Result<Vec<f64>> {
    traj.grid()
        .par_iter()
        .map(|&t| {
            let (x, _) = traj.state_at(t)?;
            Ok(phi.values(&x)?[0])
        })
        .collect()
}

/// Fits and classifies the quadratic model along lightlike geodesics of `g`.
pub fn probe_null(g: &ChartMetric, gbar: &ChartMetric, settings: &ProbeSettings) -> Result<Vec<GeodesicProbe>> {
    if !g.is_indefinite()? {
        return Err(GeomError::DefiniteSignature);
    }
    let trajs = null_geodesics(g, settings)?;
    probe_quadratic(g, gbar, &trajs)
}

/// Quadratic model along given geodesics. Applies to lightlike geodesics,
/// and to all geodesics when `B = 0`.
pub fn probe_quadratic(g: &ChartMetric, gbar: &ChartMetric, trajs: &[Trajectory]) -> Result<Vec<GeodesicProbe>> {
    let starts: Vec<Vec<f64>> = trajs.iter().map(|t| t.states()[0][..g.dim()].to_vec()).collect();
    require_equivalent(g, gbar, &starts)?;
    let phi = phi_field(g, gbar)?;
    trajs
        .iter()
        .map(|traj| {
            let fitted = fit_reparam_model(traj.grid(), &scalar_series(&phi, traj)?, Branch::NullQuadratic, None, MODEL_TOL);
            probe_record(traj, fitted, classify_null)
        })
        .collect()
}

fn probe_record(
    traj: &Trajectory,
    fitted: Result<ReparamModel>,
    classify: fn(&ReparamModel) -> Result<CompletenessVerdict>,
) -> Result<GeodesicProbe> {
    let result = match fitted {
        Ok(model) => ProbeOutcome::Classified {
            verdict: classify(&model)?,
            model,
        },
        Err(GeomError::ModelRejected { residual, tol }) => ProbeOutcome::Rejected { residual, tol },
        Err(e) => return Err(e),
    };
    let n = traj.dim();
    Ok(GeodesicProbe {
        start: traj.states()[0][..n].to_vec(),
        velocity: traj.states()[0][n..].to_vec(),
        t_end: traj.t_end(),
        exited: traj.exited(),
        result,
    })
}

/// `B` of the pair as the mean of the pointwise Hessian fits; `None` when
/// `a ∝ g` at every point.
pub fn pair_b(g: &ChartMetric, gbar: &ChartMetric, points: &[Vec<f64>]) -> Result<Option<f64>> {
    let a = PairAField::new(g, gbar)?;
    let bs: Vec<f64> = points
        .par_iter()
        .map(|x| Ok(fit_b_mu(g, &a, x)?.b))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok((!bs.is_empty()).then(|| bs.iter().sum::<f64>() / bs.len() as f64))
}

/// Fits and classifies the exponential model along unit-speed geodesics of
/// a Riemannian `g` for the given `B > 0`.
pub fn probe_riemannian(g: &ChartMetric, gbar: &ChartMetric, b: f64, settings: &ProbeSettings) -> Result<Vec<GeodesicProbe>> {
    if g.is_indefinite()? {
        return Err(GeomError::Precondition("the exponential branch is for definite metrics".into()));
    }
    let inits = flow::seeded_initial_data(g, settings.count, settings.seed, 0.5, false, settings.speed)?;
    let starts: Vec<Vec<f64>> = inits.iter().map(|(x, _)| x.clone()).collect();
    require_equivalent(g, gbar, &starts)?;
    let phi = phi_field(g, gbar)?;
    flow::integrate_batch(g, &inits, settings.t_span, settings.tol)
        .into_iter()
        .map(|traj| {
            let mut traj = traj?;
            traj.set_grid(settings.samples)?;
            let speed = traj.monitor(flow::SPEED_MONITOR).expect("grid set")[0];
            let fitted = fit_reparam_model(
                traj.grid(),
                &scalar_series(&phi, &traj)?,
                Branch::RiemannExponential,
                Some(ExponentialParams { b, speed }),
                MODEL_TOL,
            );
            probe_record(&traj, fitted, classify_riemannian)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Theorem2Verdict {
    AffineEquivalent,
    /// Bounded chart with a nonconstant `λ` along some lightlike geodesic.
    Falsified,
    /// The chart carries no boundedness flag.
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LambdaQuadratic {
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Theorem2Report {
    pub geodesics: Vec<LambdaQuadratic>,
    pub max_c2_c1: f64,
    pub bounded_emulation: bool,
    pub verdict: Theorem2Verdict,
    pub note: String,
}

/// Fits `λ(γ(t))` to a quadratic along each lightlike geodesic. On charts
/// flagged bounded, a nonconstant `λ` would be unbounded on the closed
/// manifold the chart stands for, so `C2 = C1 = 0` is asserted there.
pub fn theorem2_boundedness_test(g: &ChartMetric, gbar: &ChartMetric, geodesics: &[Trajectory], bounded_emulation: bool) -> Result<Theorem2Report> {
    if !g.is_indefinite()? {
        return Err(GeomError::DefiniteSignature);
    }
    let starts: Vec<Vec<f64>> = geodesics.iter().map(|t| t.states()[0][..g.dim()].to_vec()).collect();
    require_equivalent(g, gbar, &starts)?;
    let lf = lambda_field(g, std::sync::Arc::new(PairAField::new(g, gbar)?))?;
    let fits: Vec<LambdaQuadratic> = geodesics
        .iter()
        .map(|traj| {
            if traj.grid().len() < flow::MIN_SAMPLES {
                return Err(GeomError::InsufficientSamples(format!(
                    "geodesic grid has {} samples, need {}",
                    traj.grid().len(),
                    flow::MIN_SAMPLES
                )));
            }
            let lam = scalar_series(&lf, traj)?;
            let rel: Vec<f64> = traj.grid().iter().map(|t| t - traj.grid()[0]).collect();
            let f = fit::polyfit(&rel, &lam, 2);
            Ok(LambdaQuadratic {
                c2: f.coeffs[2],
                c1: f.coeffs[1],
                c0: f.coeffs[0],
                residual: f.residual,
            })
        })
        .collect::<Result<_>>()?;
    let max_c2_c1 = fits.iter().fold(0.0f64, |m, f| m.max(f.c2.abs()).max(f.c1.abs()));
    let verdict = match (bounded_emulation, max_c2_c1 < THEOREM2_TOL) {
        (false, _) => Theorem2Verdict::NotApplicable,
        (true, true) => Theorem2Verdict::AffineEquivalent,
        (true, false) => Theorem2Verdict::Falsified,
    };
    let note = if bounded_emulation {
        "compactness emulated by a chart with periodic metric components; not equivalent to a closed manifold".to_string()
    } else {
        "chart carries no boundedness flag; the test is not applicable (non-compact)".to_string()
    };
    Ok(Theorem2Report {
        geodesics: fits,
        max_c2_c1,
        bounded_emulation,
        verdict,
        note,
    })
}
