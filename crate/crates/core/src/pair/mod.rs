//! Projective data `(φ, a, λ)` of a metric pair on one chart and the
//! pointwise identities relating it to the curvature of `g`.
//!
//! ```text
//! φ       = log|det ḡ / det g| / (2(n+1))
//! a_ij    = e^{2φ} ḡ^{pq} g_pi g_qj
//! λ       = ½ g^{pq} a_pq,   λ_i = ∂_i λ
//! ```
//!
//! Every quantity is computed on jets, so derivatives of `φ`, `a` and `λ`
//! are exact through the determinant and adjugate.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::expr::Jet;
use crate::linalg;
use crate::tensor::{frame_at, is_degenerate, ChartMetric, FnField, LocalGeometry, TensorField};

/// Relative sign between `a_ip R^p_jkl + a_pj R^p_ikl` in this crate's
/// curvature convention and the right-hand side
/// `λ_{l,i} g_jk + λ_{l,j} g_ik − λ_{k,i} g_jl − λ_{k,j} g_il`.
pub const INT1_CURVATURE_SIGN: f64 = 1.0;

/// `a ∝ g` when `‖a − (2λ/n) g‖ / ‖a‖` falls below this.
pub const PROPORTIONALITY_THRESHOLD: f64 = 1e-10;

pub(crate) fn inverse_jets(m: &[Jet], n: usize, x: &[f64]) -> Result<(Vec<Jet>, Jet)> {
    let det = linalg::det(m, n);
    let vals: Vec<f64> = m.iter().map(Jet::value).collect();
    if is_degenerate(det.value(), &vals, n) {
        return Err(GeomError::DegenerateMetric {
            point: x.to_vec(),
            det: det.value(),
        });
    }
    let r = det.recip();
    Ok((linalg::adjugate(m, n).iter().map(|c| c * &r).collect(), det))
}

/// `½ g^{pq} a_pq` on jets.
pub(crate) fn lambda_from(ginv: &[Jet], a: &[Jet]) -> Jet {
    let mut acc = ginv[0].mul_jet(&a[0]);
    for k in 1..a.len() {
        acc = &acc + &ginv[k].mul_jet(&a[k]);
    }
    acc.scale(0.5)
}

fn check_dims(g: &ChartMetric, gbar: &ChartMetric) -> Result<()> {
    if g.dim() != gbar.dim() {
        return Err(GeomError::DimensionMismatch {
            expected: g.dim(),
            got: gbar.dim(),
        });
    }
    Ok(())
}

fn check_point(g: &ChartMetric, x: &[f64]) -> Result<()> {
    if !g.domain().contains(x) {
        return Err(GeomError::OutsideDomain { point: x.to_vec() });
    }
    Ok(())
}

fn max_abs(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Jets of the projective data of a pair at one point.
#[derive(Clone, Debug)]
pub(crate) struct PairJets {
    pub g: Vec<Jet>,
    pub ginv: Vec<Jet>,
    pub gbar_inv: Vec<Jet>,
    pub phi: Jet,
    pub a: Vec<Jet>,
    pub lambda: Jet,
}

pub(crate) fn pair_jets(g: &dyn TensorField, gbar: &dyn TensorField, x: &[f64], order: usize) -> Result<PairJets> {
    let n = g.dim();
    let gj = g.jets(x, order)?;
    let bj = gbar.jets(x, order)?;
    let (ginv, det_g) = inverse_jets(&gj, n, x)?;
    let (binv, det_b) = inverse_jets(&bj, n, x)?;
    let phi = (&det_b.ln_abs() - &det_g.ln_abs()).scale(1.0 / (2.0 * (n as f64 + 1.0)));
    let e2phi = phi.scale(2.0).exp();
    // m^p_j = ḡ^{pq} g_qj
    let mut m = Vec::with_capacity(n * n);
    for p in 0..n {
        for j in 0..n {
            let mut acc = binv[p * n].mul_jet(&gj[j]);
            for q in 1..n {
                acc = &acc + &binv[p * n + q].mul_jet(&gj[q * n + j]);
            }
            m.push(acc);
        }
    }
    let mut a: Vec<Option<Jet>> = vec![None; n * n];
    for i in 0..n {
        for j in i..n {
            let mut acc = gj[i].mul_jet(&m[j]);
            for p in 1..n {
                acc = &acc + &gj[p * n + i].mul_jet(&m[p * n + j]);
            }
            let v = acc.mul_jet(&e2phi);
            a[j * n + i] = Some(v.clone());
            a[i * n + j] = Some(v);
        }
    }
    let a: Vec<Jet> = a.into_iter().map(|v| v.expect("filled")).collect();
    let lambda = lambda_from(&ginv, &a);
    Ok(PairJets {
        g: gj,
        ginv,
        gbar_inv: binv,
        phi,
        a,
        lambda,
    })
}

/// The field `a_ij` built from a pair.
#[derive(Clone, Debug)]
pub struct PairAField {
    g: ChartMetric,
    gbar: ChartMetric,
}

impl PairAField {
    pub fn new(g: &ChartMetric, gbar: &ChartMetric) -> Result<Self> {
        check_dims(g, gbar)?;
        Ok(PairAField {
            g: g.clone(),
            gbar: gbar.clone(),
        })
    }
}

impl TensorField for PairAField {
    fn dim(&self) -> usize {
        self.g.dim()
    }
    fn rank(&self) -> usize {
        2
    }
    fn jets(&self, x: &[f64], order: usize) -> Result<Vec<Jet>> {
        Ok(pair_jets(&self.g, &self.gbar, x, order)?.a)
    }
}

/// Scalar field `λ = ½ g^{pq} a_pq` for a metric and an `a`-field.
pub fn lambda_field(g: &ChartMetric, a: Arc<dyn TensorField>) -> Result<FnField> {
    if a.dim() != g.dim() || a.rank() != 2 {
        return Err(GeomError::Precondition("a-field must be a rank-2 field of the metric's dimension".into()));
    }
    let g = g.clone();
    let n = g.dim();
    Ok(FnField::new(n, 0, move |x, order| {
        let gj = g.jets(x, order)?;
        let (ginv, _) = inverse_jets(&gj, n, x)?;
        Ok(vec![lambda_from(&ginv, &a.jets(x, order)?)])
    }))
}

/// Scalar field `φ` of a pair.
pub fn phi_field(g: &ChartMetric, gbar: &ChartMetric) -> Result<FnField> {
    check_dims(g, gbar)?;
    let (g, gbar) = (g.clone(), gbar.clone());
    let n = g.dim();
    Ok(FnField::new(n, 0, move |x, order| {
        let gd = linalg::det(&g.jets(x, order)?, n);
        let bd = linalg::det(&gbar.jets(x, order)?, n);
        if gd.value() == 0.0 || bd.value() == 0.0 {
            return Err(GeomError::DegenerateMetric {
                point: x.to_vec(),
                det: gd.value() * bd.value(),
            });
        }
        Ok(vec![(&bd.ln_abs() - &gd.ln_abs()).scale(1.0 / (2.0 * (n as f64 + 1.0)))])
    }))
}

/// Result of fitting `λ_{,ij} = μ g_ij + B a_ij` at a point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BFitResult {
    pub mu: f64,
    /// Absent when `a ∝ g` at the point.
    pub b: Option<f64>,
    /// Frobenius norm of `λ_{,ij} − μ g_ij − B a_ij`.
    pub residual: f64,
    pub degenerate: bool,
    /// `μ` recovered from the trace `λ^i_{,i} = nμ + 2Bλ`.
    pub mu_from_trace: f64,
    /// `μ` recovered from the trace with the opposite sign on `2Bλ`.
    pub mu_from_trace_alt_sign: f64,
}

pub(crate) fn fit_values(g: &[f64], ginv: &[f64], a: &[f64], lambda: f64, hess: &[f64], n: usize) -> BFitResult {
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| p * q).sum::<f64>();
    let a_norm = dot(a, a).sqrt();
    let c = 2.0 * lambda / n as f64;
    let tf: f64 = a.iter().zip(g).map(|(ai, gi)| (ai - c * gi).powi(2)).sum::<f64>().sqrt();
    let degenerate = !(a_norm > 0.0) || tf / a_norm < PROPORTIONALITY_THRESHOLD;
    let (mu, b) = if degenerate {
        (dot(g, hess) / dot(g, g), None)
    } else {
        let (gg, ga, aa) = (dot(g, g), dot(g, a), dot(a, a));
        let (gh, ah) = (dot(g, hess), dot(a, hess));
        let det = gg * aa - ga * ga;
        ((gh * aa - ga * ah) / det, Some((gg * ah - ga * gh) / det))
    };
    let bv = b.unwrap_or(0.0);
    let residual = hess
        .iter()
        .zip(g.iter().zip(a))
        .map(|(h, (gi, ai))| (h - mu * gi - bv * ai).powi(2))
        .sum::<f64>()
        .sqrt();
    let trace = dot(ginv, hess);
    BFitResult {
        mu,
        b,
        residual,
        degenerate,
        mu_from_trace: (trace - 2.0 * bv * lambda) / n as f64,
        mu_from_trace_alt_sign: (trace + 2.0 * bv * lambda) / n as f64,
    }
}

/// Projective data of a pair at one point.
#[derive(Clone, Debug, Serialize)]
pub struct PairFrame {
    pub point: Vec<f64>,
    pub phi: f64,
    pub phi_grad: Vec<f64>,
    pub a: Vec<f64>,
    /// `a^i_j = g^{ip} a_pj`.
    pub a_mixed: Vec<f64>,
    pub lambda: f64,
    pub lambda_grad: Vec<f64>,
    pub lambda_hessian: Vec<f64>,
    pub fit: BFitResult,
}

pub fn pair_frame(g: &ChartMetric, gbar: &ChartMetric, x: &[f64]) -> Result<PairFrame> {
    check_dims(g, gbar)?;
    check_point(g, x)?;
    let n = g.dim();
    let pj = pair_jets(g, gbar, x, 2)?;
    let geo = LocalGeometry::from_jets(pj.g.clone(), x)?;
    let d1 = geo.covariant_derivative(std::slice::from_ref(&pj.lambda), 0)?;
    let hess: Vec<f64> = geo.covariant_derivative(&d1, 1)?.iter().map(Jet::value).collect();
    let gv: Vec<f64> = pj.g.iter().map(Jet::value).collect();
    let ginv: Vec<f64> = pj.ginv.iter().map(Jet::value).collect();
    let a: Vec<f64> = pj.a.iter().map(Jet::value).collect();
    let fit = fit_values(&gv, &ginv, &a, pj.lambda.value(), &hess, n);
    Ok(PairFrame {
        point: x.to_vec(),
        phi: pj.phi.value(),
        phi_grad: pj.phi.gradient().to_vec(),
        a_mixed: linalg::matmul(&ginv, &a, n),
        a,
        lambda: pj.lambda.value(),
        lambda_grad: pj.lambda.gradient().to_vec(),
        lambda_hessian: hess,
        fit,
    })
}

fn phi_jet(geo_g: &LocalGeometry, geo_b: &LocalGeometry) -> Jet {
    let n = geo_g.dim() as f64;
    (&geo_b.det().ln_abs() - &geo_g.det().ln_abs()).scale(1.0 / (2.0 * (n + 1.0)))
}

/// Max of `|Γ̄^i_jk − Γ^i_jk − δ^i_k φ_j − δ^i_j φ_k|`.
pub fn residual_geodesic_equivalence(g: &ChartMetric, gbar: &ChartMetric, x: &[f64]) -> Result<f64> {
    check_dims(g, gbar)?;
    let n = g.dim();
    let geo_g = LocalGeometry::new(g, x, 1)?;
    let geo_b = LocalGeometry::new(gbar, x, 1)?;
    let phi = phi_jet(&geo_g, &geo_b);
    let dphi = phi.gradient();
    let gam = geo_g.christoffel();
    let gamb = geo_b.christoffel();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let idx = (i * n + j) * n + k;
                let mut r = gamb[idx].value() - gam[idx].value();
                if i == k {
                    r -= dphi[j];
                }
                if i == j {
                    r -= dphi[k];
                }
                worst = worst.max(r.abs());
            }
        }
    }
    Ok(worst)
}

/// Max of `|ḡ_{ij,k} − 2ḡ_ij φ_k − ḡ_ik φ_j − ḡ_jk φ_i|`, comma being `∇` of `g`,
/// divided by `max |ḡ_ij|` so that rescaling `ḡ` leaves it unchanged.
pub fn residual_lc(g: &ChartMetric, gbar: &ChartMetric, x: &[f64]) -> Result<f64> {
    check_dims(g, gbar)?;
    let n = g.dim();
    let geo_g = LocalGeometry::new(g, x, 1)?;
    let geo_b = LocalGeometry::new(gbar, x, 1)?;
    let dphi = phi_jet(&geo_g, &geo_b).gradient().to_vec();
    let gb = geo_b.g_values();
    let cov = geo_g.covariant_derivative(geo_b.g(), 2)?;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let r = cov[(i * n + j) * n + k].value()
                    - 2.0 * gb[i * n + j] * dphi[k]
                    - gb[i * n + k] * dphi[j]
                    - gb[j * n + k] * dphi[i];
                worst = worst.max(r.abs());
            }
        }
    }
    Ok(worst / max_abs(gb.iter().copied()))
}

/// Max of `|a_{ij,k} − λ_i g_jk − λ_j g_ik|`.
pub fn residual_basic(g: &ChartMetric, a: &dyn TensorField, x: &[f64]) -> Result<f64> {
    let n = g.dim();
    let geo = LocalGeometry::new(g, x, 1)?;
    let aj = a.jets(x, 1)?;
    let dl = lambda_from(geo.ginv(), &aj).gradient().to_vec();
    let gv = geo.g_values();
    let cov = geo.covariant_derivative(&aj, 2)?;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let r = cov[(i * n + j) * n + k].value() - dl[i] * gv[j * n + k] - dl[j] * gv[i * n + k];
                worst = worst.max(r.abs());
            }
        }
    }
    Ok(worst)
}

/// Residual of the integrability condition with both sides reported.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SidedResidual {
    pub residual: f64,
    pub lhs_max: f64,
    pub rhs_max: f64,
}

struct SecondOrder {
    geo: LocalGeometry,
    a: Vec<f64>,
    lambda: f64,
    hess: Vec<f64>,
}

fn second_order(g: &ChartMetric, a: &dyn TensorField, x: &[f64]) -> Result<SecondOrder> {
    let geo = LocalGeometry::new(g, x, 2)?;
    let aj = a.jets(x, 2)?;
    let have = aj.iter().map(Jet::order).min().unwrap_or(0);
    if have < 2 {
        return Err(GeomError::InsufficientOrder { needed: 2, have });
    }
    let lam = lambda_from(geo.ginv(), &aj);
    let d1 = geo.covariant_derivative(std::slice::from_ref(&lam), 0)?;
    let hess = geo.covariant_derivative(&d1, 1)?.iter().map(Jet::value).collect();
    Ok(SecondOrder {
        a: aj.iter().map(Jet::value).collect(),
        lambda: lam.value(),
        hess,
        geo,
    })
}

/// `a_ip R^p_jkl + a_pj R^p_ikl = λ_{l,i} g_jk + λ_{l,j} g_ik − λ_{k,i} g_jl − λ_{k,j} g_il`.
pub fn residual_int1(g: &ChartMetric, a: &dyn TensorField, x: &[f64]) -> Result<SidedResidual> {
    let n = g.dim();
    let so = second_order(g, a, x)?;
    let r: Vec<f64> = so.geo.riemann()?.iter().map(Jet::value).collect();
    let gv = so.geo.g_values();
    let (av, h) = (&so.a, &so.hess);
    let r4 = |i: usize, j: usize, k: usize, l: usize| r[((i * n + j) * n + k) * n + l];
    let mut out = SidedResidual {
        residual: 0.0,
        lhs_max: 0.0,
        rhs_max: 0.0,
    };
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let lhs: f64 = INT1_CURVATURE_SIGN
                        * (0..n).map(|p| av[i * n + p] * r4(p, j, k, l) + av[p * n + j] * r4(p, i, k, l)).sum::<f64>();
                    let rhs = h[l * n + i] * gv[j * n + k] + h[l * n + j] * gv[i * n + k]
                        - h[k * n + i] * gv[j * n + l]
                        - h[k * n + j] * gv[i * n + l];
                    out.residual = out.residual.max((lhs - rhs).abs());
                    out.lhs_max = out.lhs_max.max(lhs.abs());
                    out.rhs_max = out.rhs_max.max(rhs.abs());
                }
            }
        }
    }
    Ok(out)
}

/// Max of `|a^p_i R_pj − a^p_j R_ip|`.
pub fn residual_ricci_commute(g: &ChartMetric, a: &dyn TensorField, x: &[f64]) -> Result<f64> {
    let n = g.dim();
    let f = frame_at(g, x)?;
    let av = a.values(x)?;
    let mixed = linalg::matmul(&f.ginv, &av, n);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let s: f64 = (0..n)
                .map(|p| mixed[p * n + i] * f.ricci[p * n + j] - mixed[p * n + j] * f.ricci[i * n + p])
                .sum();
            worst = worst.max(s.abs());
        }
    }
    Ok(worst)
}

/// Least-squares `(μ, B)` in `λ_{,ij} = μ g_ij + B a_ij` at `x`, using the
/// plain Frobenius inner product on components.
pub fn fit_b_mu(g: &ChartMetric, a: &dyn TensorField, x: &[f64]) -> Result<BFitResult> {
    let so = second_order(g, a, x)?;
    Ok(fit_values(&so.geo.g_values(), &so.geo.ginv_values(), &so.a, so.lambda, &so.hess, g.dim()))
}

/// Max of `|λ_{,ijk} − B(2λ_k g_ij + λ_j g_ik + λ_i g_jk)|`.
pub fn residual_tanno(g: &ChartMetric, lambda: &dyn TensorField, b: f64, x: &[f64]) -> Result<f64> {
    if lambda.rank() != 0 {
        return Err(GeomError::Precondition("λ must be a scalar field".into()));
    }
    let n = g.dim();
    let geo = LocalGeometry::new(g, x, 3)?;
    let lj = lambda.jets(x, 3)?;
    if lj[0].order() < 3 {
        return Err(GeomError::InsufficientOrder {
            needed: 3,
            have: lj[0].order(),
        });
    }
    let d1 = geo.covariant_derivative(&lj, 0)?;
    let d2 = geo.covariant_derivative(&d1, 1)?;
    let d3 = geo.covariant_derivative(&d2, 2)?;
    let gv = geo.g_values();
    let dl: Vec<f64> = d1.iter().map(Jet::value).collect();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let model = b * (2.0 * dl[k] * gv[i * n + j] + dl[j] * gv[i * n + k] + dl[i] * gv[j * n + k]);
                worst = worst.max((d3[(i * n + j) * n + k].value() - model).abs());
            }
        }
    }
    Ok(worst)
}

/// `(φ_{i,j} − φ_i φ_j, g_ij, ḡ_ij)` at a point.
fn f1_terms(g: &ChartMetric, gbar: &ChartMetric, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    check_dims(g, gbar)?;
    let n = g.dim();
    let geo_g = LocalGeometry::new(g, x, 2)?;
    let geo_b = LocalGeometry::new(gbar, x, 2)?;
    let phi = phi_jet(&geo_g, &geo_b);
    let d1 = geo_g.covariant_derivative(std::slice::from_ref(&phi), 0)?;
    let h = geo_g.covariant_derivative(&d1, 1)?;
    let dp = phi.gradient();
    let f = (0..n * n).map(|k| h[k].value() - dp[k / n] * dp[k % n]).collect();
    Ok((f, geo_g.g_values(), geo_b.g_values()))
}

/// Max of `|φ_{i,j} − φ_iφ_j + B g_ij − B̄ ḡ_ij|`.
pub fn residual_f1(g: &ChartMetric, gbar: &ChartMetric, b: f64, b_bar: f64, x: &[f64]) -> Result<f64> {
    let (f, gv, bv) = f1_terms(g, gbar, x)?;
    Ok(max_abs((0..f.len()).map(|k| f[k] + b * gv[k] - b_bar * bv[k])))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct F1Fit {
    pub b: f64,
    pub b_bar: f64,
    /// Max residual over all sample points with the fitted constants.
    pub residual: f64,
    pub points: usize,
}

/// Fits global constants `(B, B̄)` over `points`, then evaluates the
/// residual at every point.
pub fn fit_f1_constants(g: &ChartMetric, gbar: &ChartMetric, points: &[Vec<f64>]) -> Result<F1Fit> {
    let n = g.dim();
    if points.is_empty() {
        return Err(GeomError::InsufficientSamples("f1 fit needs at least one point".into()));
    }
    let terms: Vec<_> = points.par_iter().map(|p| f1_terms(g, gbar, p)).collect::<Result<_>>()?;
    let per = n * (n + 1) / 2;
    let mut design = DMatrix::zeros(per * terms.len(), 2);
    let mut rhs = DVector::zeros(per * terms.len());
    let mut row = 0;
    for (f, gv, bv) in &terms {
        for i in 0..n {
            for j in i..n {
                design[(row, 0)] = -gv[i * n + j];
                design[(row, 1)] = bv[i * n + j];
                rhs[row] = f[i * n + j];
                row += 1;
            }
        }
    }
    let sol = linalg::lstsq(&design, &rhs);
    let (b, b_bar) = (sol[0], sol[1]);
    let residual = terms
        .iter()
        .map(|(f, gv, bv)| max_abs((0..f.len()).map(|k| f[k] + b * gv[k] - b_bar * bv[k])))
        .fold(0.0, f64::max);
    Ok(F1Fit {
        b,
        b_bar,
        residual,
        points: points.len(),
    })
}

/// Recovers `ḡ_ij` from `g` and `a` via `e^{−2φ} = |det a^i_j|` and
/// `ḡ^{ij} = |det a^i_j| a^i_p g^{pj}`.
pub fn reconstruct_gbar(g: &ChartMetric, a: &dyn TensorField, x: &[f64]) -> Result<Vec<f64>> {
    let n = g.dim();
    let gv = g.values(x)?;
    let (ginv, _) = linalg::inverse_via_adjugate(&gv, n, 0.0).ok_or_else(|| GeomError::DegenerateMetric {
        point: x.to_vec(),
        det: 0.0,
    })?;
    let av = a.values(x)?;
    let mixed = linalg::matmul(&ginv, &av, n);
    let det_a = linalg::det(&mixed, n);
    if is_degenerate(det_a, &mixed, n) {
        return Err(GeomError::DegenerateTensor(format!("a^i_j is singular at {x:?}")));
    }
    let up: Vec<f64> = linalg::matmul(&mixed, &ginv, n).iter().map(|v| v * det_a.abs()).collect();
    let (out, _) = linalg::inverse_via_adjugate(&up, n, 0.0).ok_or_else(|| GeomError::DegenerateTensor("ḡ^{ij} is singular".into()))?;
    Ok(out)
}

/// Compares `λ_i = ∂_i λ` with the closed form `−e^{2φ} φ_p ḡ^{pq} g_qi`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LambdaSignCheck {
    pub gradient: Vec<f64>,
    pub closed_form: Vec<f64>,
    /// Max of `|∂λ − closed form|`.
    pub as_written: f64,
    /// Max of `|∂λ + closed form|`.
    pub flipped: f64,
}

pub fn lambda_sign_check(g: &ChartMetric, gbar: &ChartMetric, x: &[f64]) -> Result<LambdaSignCheck> {
    check_dims(g, gbar)?;
    let n = g.dim();
    let pj = pair_jets(g, gbar, x, 1)?;
    let e2 = (2.0 * pj.phi.value()).exp();
    let dphi = pj.phi.gradient();
    let mut closed = vec![0.0; n];
    for (i, c) in closed.iter_mut().enumerate() {
        for p in 0..n {
            for q in 0..n {
                *c -= e2 * dphi[p] * pj.gbar_inv[p * n + q].value() * pj.g[q * n + i].value();
            }
        }
    }
    let grad = pj.lambda.gradient().to_vec();
    Ok(LambdaSignCheck {
        as_written: max_abs((0..n).map(|i| grad[i] - closed[i])),
        flipped: max_abs((0..n).map(|i| grad[i] + closed[i])),
        gradient: grad,
        closed_form: closed,
    })
}

/// Least-squares factor `f` with `a ≈ f·A` at `x`, and the relative misfit.
pub fn pointwise_ratio(a: &dyn TensorField, big_a: &dyn TensorField, x: &[f64]) -> Result<(f64, f64)> {
    let av = a.values(x)?;
    let bv = big_a.values(x)?;
    let bb: f64 = bv.iter().map(|v| v * v).sum();
    if bb == 0.0 {
        return Err(GeomError::DegenerateTensor("reference field vanishes".into()));
    }
    let f = av.iter().zip(&bv).map(|(p, q)| p * q).sum::<f64>() / bb;
    let mis = av.iter().zip(&bv).map(|(p, q)| (p - f * q).powi(2)).sum::<f64>().sqrt() / bb.sqrt();
    Ok((f, mis))
}

/// All pointwise residuals of a pair at one sample point.
#[derive(Clone, Debug, Serialize)]
pub struct PointResiduals {
    pub point: Vec<f64>,
    pub geodesic_equivalence: f64,
    pub lc: f64,
    pub basic: f64,
    pub int1: SidedResidual,
    pub ricci_commute: f64,
    pub fit: BFitResult,
    pub lambda_sign: LambdaSignCheck,
}

pub fn point_residuals(g: &ChartMetric, gbar: &ChartMetric, x: &[f64]) -> Result<PointResiduals> {
    check_dims(g, gbar)?;
    check_point(g, x)?;
    let a = PairAField::new(g, gbar)?;
    Ok(PointResiduals {
        point: x.to_vec(),
        geodesic_equivalence: residual_geodesic_equivalence(g, gbar, x)?,
        lc: residual_lc(g, gbar, x)?,
        basic: residual_basic(g, &a, x)?,
        int1: residual_int1(g, &a, x)?,
        ricci_commute: residual_ricci_commute(g, &a, x)?,
        fit: fit_b_mu(g, &a, x)?,
        lambda_sign: lambda_sign_check(g, gbar, x)?,
    })
}

/// [`point_residuals`] over many points, in input order.
pub fn sweep(g: &ChartMetric, gbar: &ChartMetric, points: &[Vec<f64>]) -> Result<Vec<PointResiduals>> {
    points.par_iter().map(|p| point_residuals(g, gbar, p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{DomainBox, ExprField};

    fn flat3() -> ChartMetric {
        ChartMetric::diagonal_constant(&[1.0, 1.0, 1.0], DomainBox::cube(3, 1.0), "flat").unwrap()
    }

    #[test]
    fn identity_pair() {
        let g = flat3();
        let f = pair_frame(&g, &g, &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(f.phi, 0.0);
        assert!((f.lambda - 1.5).abs() < 1e-15);
        assert!(f.lambda_grad.iter().all(|v| *v == 0.0));
        assert!(f.fit.degenerate && f.fit.b.is_none() && f.fit.mu == 0.0);
    }

    #[test]
    fn scaled_pair_in_dimension_three() {
        let g = ChartMetric::from_rows(
            &[&["1+x1^2", "0", "0"], &["0", "2", "x1"], &["0", "x1", "-1"]],
            DomainBox::cube(3, 0.8),
            "g",
        )
        .unwrap();
        let c = 3.0;
        let gb = ChartMetric::from_rows(
            &[&["3*(1+x1^2)", "0", "0"], &["0", "3*2", "3*x1"], &["0", "3*x1", "3*(-1)"]],
            DomainBox::cube(3, 0.8),
            "3g",
        )
        .unwrap();
        let x = [0.3, -0.1, 0.2];
        let f = pair_frame(&g, &gb, &x).unwrap();
        assert!((f.phi - 0.375 * f64::ln(c)).abs() < 1e-14);
        let gv = g.values(&x).unwrap();
        let s = c.powf(-0.25);
        for k in 0..9 {
            assert!((f.a[k] - s * gv[k]).abs() < 1e-13);
        }
        assert!(f.lambda_grad.iter().all(|v| v.abs() < 1e-13));
        assert!(residual_geodesic_equivalence(&g, &gb, &x).unwrap() < 1e-12);
        assert!(residual_lc(&g, &gb, &x).unwrap() < 1e-12);
    }

    #[test]
    fn x1_times_flat_metric_is_not_a_solution() {
        let g = flat3();
        let a = ExprField::symmetric(&[&["x1", "0", "0"], &["0", "x1", "0"], &["0", "0", "x1"]]).unwrap();
        assert!(residual_basic(&g, &a, &[0.2, 0.1, 0.0]).unwrap() > 0.4);
    }

    #[test]
    fn quadratic_solution_on_flat_space() {
        let g = flat3();
        let rows = [["x1*x1", "x1*x2", "x1*x3"], ["x1*x2", "x2*x2", "x2*x3"], ["x1*x3", "x2*x3", "x3*x3"]];
        let r: Vec<&[&str]> = rows.iter().map(|r| r.as_slice()).collect();
        let a = ExprField::symmetric(&r).unwrap();
        let x = [0.3, -0.4, 0.5];
        assert!(residual_basic(&g, &a, &x).unwrap() < 1e-14);
        let s = residual_int1(&g, &a, &x).unwrap();
        assert_eq!((s.lhs_max, s.rhs_max, s.residual), (0.0, 0.0, 0.0));
        let fit = fit_b_mu(&g, &a, &x).unwrap();
        assert!((fit.mu - 1.0).abs() < 1e-12);
        assert!(fit.b.unwrap().abs() < 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn tanno_for_half_square_norm() {
        let g = flat3();
        let lam = ExprField::scalar("(x1^2+x2^2+x3^2)/2", 3).unwrap();
        assert!(residual_tanno(&g, &lam, 0.0, &[0.2, 0.5, -0.3]).unwrap() < 1e-10);
        assert!(residual_tanno(&g, &lam, 0.5, &[0.2, 0.5, -0.3]).unwrap() > 0.1);
        let c = ExprField::scalar("4", 3).unwrap();
        assert_eq!(residual_tanno(&g, &c, 0.0, &[0.2, 0.5, -0.3]).unwrap(), 0.0);
    }
}
