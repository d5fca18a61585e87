//! Degree of mobility by collocation: `a_{ij,k} = λ_i g_jk + λ_j g_ik` is
//! imposed on a finite ansatz at sample points and the numerical nullspace
//! of the resulting linear system is read off an SVD.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::expr::{Expression, Jet};
use crate::linalg;
use crate::pair::{fit_b_mu, residual_basic, residual_int1, residual_ricci_commute};
use crate::sampling;
use crate::tensor::{ChartMetric, LocalGeometry, TensorField};

/// Default relative singular-value threshold.
pub const DEFAULT_SVD_TOL: f64 = 1e-8;
/// Smallest accepted ratio between the last kept and first discarded
/// singular value.
pub const MIN_GAP_RATIO: f64 = 1e3;
/// `residual_basic` bound for a nullspace vector to count as a solution.
pub const VERIFY_TOL: f64 = 1e-7;
pub const VERIFY_POINTS: usize = 20;

/// Symmetric tensor fields `w(x) · x^m · E_ij`, one family per weight `w`,
/// with monomials of total degree at most `degree`.
#[derive(Clone, Debug)]
pub struct AnsatzBasis {
    dim: usize,
    degree: usize,
    weight_sources: Vec<String>,
    weights: Vec<Option<Expression>>,
    exponents: Vec<Vec<u32>>,
    pairs: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BasisSpec {
    pub degree: usize,
    pub weights: Vec<String>,
    pub count: usize,
}

fn exponents(dim: usize, degree: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for total in 0..=degree as u32 {
        let mut cur = vec![0u32; dim];
        fill(&mut out, &mut cur, 0, total);
    }
    out
}

fn fill(out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>, pos: usize, left: u32) {
    if pos == cur.len() - 1 {
        cur[pos] = left;
        out.push(cur.clone());
        return;
    }
    for e in (0..=left).rev() {
        cur[pos] = e;
        fill(out, cur, pos + 1, left - e);
    }
}

impl AnsatzBasis {
    /// Plain monomial basis.
    pub fn monomial(dim: usize, degree: usize) -> Self {
        AnsatzBasis {
            dim,
            degree,
            weight_sources: vec!["1".into()],
            weights: vec![None],
            exponents: exponents(dim, degree),
            pairs: (0..dim).flat_map(|i| (i..dim).map(move |j| (i, j))).collect(),
        }
    }

    /// One monomial family per weight expression, written in `metric`'s
    /// coordinates.
    pub fn weighted(metric: &ChartMetric, degree: usize, weights: &[&str]) -> Result<Self> {
        if weights.is_empty() {
            return Err(GeomError::Precondition("at least one weight is required".into()));
        }
        let mut b = AnsatzBasis::monomial(metric.dim(), degree);
        b.weight_sources = weights.iter().map(|w| w.to_string()).collect();
        b.weights = weights
            .iter()
            .map(|w| {
                let e = Expression::parse_with_names(w, metric.coords())?;
                Ok(if e.is_constant() && e.eval(&vec![0.0; metric.dim()])? == 1.0 { None } else { Some(e) })
            })
            .collect::<Result<_>>()?;
        Ok(b)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn count(&self) -> usize {
        self.weights.len() * self.exponents.len() * self.pairs.len()
    }

    pub fn spec(&self) -> BasisSpec {
        BasisSpec {
            degree: self.degree,
            weights: self.weight_sources.clone(),
            count: self.count(),
        }
    }

    /// Column `α` as (family, monomial, index pair).
    fn split(&self, alpha: usize) -> (usize, usize, (usize, usize)) {
        let np = self.pairs.len();
        let nm = self.exponents.len();
        (alpha / (nm * np), (alpha / np) % nm, self.pairs[alpha % np])
    }

    /// Scalar coefficient jets `w · x^m` of every (family, monomial).
    fn scalar_jets(&self, x: &[f64], order: usize) -> Result<Vec<Jet>> {
        let n = self.dim;
        let vars: Vec<Jet> = (0..n).map(|i| Jet::variable(n, order, i, x[i])).collect();
        let monos: Vec<Jet> = self
            .exponents
            .iter()
            .map(|e| {
                e.iter()
                    .enumerate()
                    .fold(Jet::constant(n, order, 1.0), |acc, (i, &p)| if p == 0 { acc } else { acc.mul_jet(&vars[i].powi(p as i32)) })
            })
            .collect();
        let mut out = Vec::with_capacity(self.weights.len() * monos.len());
        for w in &self.weights {
            match w {
                None => out.extend(monos.iter().cloned()),
                Some(e) => {
                    let wj = e.eval_taylor(x, order)?;
                    out.extend(monos.iter().map(|m| m.mul_jet(&wj)));
                }
            }
        }
        Ok(out)
    }

    /// Gram matrix rank of the basis fields' values over `points`.
    pub fn numerical_rank(&self, points: &[Vec<f64>]) -> Result<usize> {
        let cols = self.count();
        let mut m = DMatrix::<f64>::zeros(points.len() * self.pairs.len(), cols);
        for (r, x) in points.iter().enumerate() {
            let s = self.scalar_jets(x, 0)?;
            for alpha in 0..cols {
                let (f, mono, (i, j)) = self.split(alpha);
                let row = r * self.pairs.len() + self.pairs.iter().position(|p| *p == (i, j)).expect("pair");
                m[(row, alpha)] = s[f * self.exponents.len() + mono].value();
            }
        }
        let sv = m.singular_values();
        let top = sv.max();
        Ok(sv.iter().filter(|s| **s > 1e-10 * top).count())
    }

    /// The field `Σ c_α B^α`.
    pub fn field(self: &Arc<Self>, coefficients: Vec<f64>) -> Result<AnsatzField> {
        if coefficients.len() != self.count() {
            return Err(GeomError::DimensionMismatch {
                expected: self.count(),
                got: coefficients.len(),
            });
        }
        Ok(AnsatzField {
            basis: Arc::clone(self),
            coefficients,
        })
    }
}

/// A symmetric field given by coefficients on an [`AnsatzBasis`].
#[derive(Clone, Debug)]
pub struct AnsatzField {
    basis: Arc<AnsatzBasis>,
    coefficients: Vec<f64>,
}

impl AnsatzField {
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }
}

impl TensorField for AnsatzField {
    fn dim(&self) -> usize {
        self.basis.dim
    }
    fn rank(&self) -> usize {
        2
    }
    fn jets(&self, x: &[f64], order: usize) -> Result<Vec<Jet>> {
        let n = self.basis.dim;
        let s = self.basis.scalar_jets(x, order)?;
        let mut out = vec![Jet::constant(n, order, 0.0); n * n];
        for (alpha, c) in self.coefficients.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            let (f, mono, (i, j)) = self.basis.split(alpha);
            let term = s[f * self.basis.exponents.len() + mono].scale(*c);
            out[i * n + j] = &out[i * n + j] + &term;
            if i != j {
                out[j * n + i] = &out[j * n + i] + &term;
            }
        }
        Ok(out)
    }
}

/// Rows `a_{pq,k} − λ_p g_qk − λ_q g_pk` (for `p ≤ q`, all `k`) of every
/// basis field at every point, one row block per point.
pub fn assemble_constraints(metric: &ChartMetric, basis: &AnsatzBasis, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = metric.dim();
    if basis.dim != n {
        return Err(GeomError::DimensionMismatch { expected: n, got: basis.dim });
    }
    let block = n * basis.pairs.len();
    let cols = basis.count();
    if points.len() * block < cols {
        return Err(GeomError::InsufficientSamples(format!(
            "{} points give {} rows for {cols} unknowns",
            points.len(),
            points.len() * block
        )));
    }
    let blocks: Vec<Vec<f64>> = points.par_iter().map(|x| row_block(metric, basis, x)).collect::<Result<_>>()?;
    let mut m = DMatrix::<f64>::zeros(points.len() * block, cols);
    for (b, vals) in blocks.iter().enumerate() {
        for r in 0..block {
            for c in 0..cols {
                m[(b * block + r, c)] = vals[r * cols + c];
            }
        }
    }
    Ok(m)
}

fn row_block(metric: &ChartMetric, basis: &AnsatzBasis, x: &[f64]) -> Result<Vec<f64>> {
    let n = metric.dim();
    let geo = LocalGeometry::new(metric, x, 1)?;
    let g = geo.g_values();
    let gam = geo.christoffel_values();
    let ginv = geo.ginv();
    let s = basis.scalar_jets(x, 1)?;
    let pairs = &basis.pairs;
    let cols = basis.count();
    let block = n * pairs.len();
    let mut out = vec![0.0; block * cols];
    for alpha in 0..cols {
        let (f, mono, (i, j)) = basis.split(alpha);
        let sj = &s[f * basis.exponents.len() + mono];
        let (sv, sg) = (sj.value(), sj.gradient());
        // a_pq = s E_pq with E the symmetric unit tensor at (i, j)
        let e = |p: usize, q: usize| if (p == i && q == j) || (p == j && q == i) { 1.0 } else { 0.0 };
        // λ = ½ s tr_g E
        let tr = if i == j { ginv[i * n + i].clone() } else { &ginv[i * n + j] + &ginv[j * n + i] };
        let dl: Vec<f64> = (0..n).map(|k| 0.5 * (sg[k] * tr.value() + sv * tr.d1(k))).collect();
        for k in 0..n {
            for (pi, &(p, q)) in pairs.iter().enumerate() {
                let mut cov = sg[k] * e(p, q);
                for r in 0..n {
                    cov -= sv * (gam[(r * n + k) * n + p] * e(r, q) + gam[(r * n + k) * n + q] * e(p, r));
                }
                let row = k * pairs.len() + pi;
                out[row * cols + alpha] = cov - dl[p] * g[q * n + k] - dl[q] * g[p * n + k];
            }
        }
    }
    Ok(out)
}

/// Verification of one nullspace vector at fresh points.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolutionRecord {
    /// Coefficients on the basis, scaled so the field's largest component
    /// over the verification points is 1.
    pub coefficients: Vec<f64>,
    pub basic: f64,
    pub int1: f64,
    pub ricci_commute: f64,
    pub verified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MobilityReport {
    pub metric: String,
    pub basis: BasisSpec,
    pub points: usize,
    pub verify_seed: u64,
    pub svd_tol: f64,
    /// Verified solution count.
    pub dimension: usize,
    /// Singular values below `svd_tol` times the largest.
    pub raw_dimension: usize,
    /// Singular values of the column-equilibrated constraint matrix,
    /// descending.
    pub singular_values: Vec<f64>,
    /// Last kept over first discarded singular value.
    pub gap_ratio: Option<f64>,
    pub ambiguous: bool,
    pub solutions: Vec<SolutionRecord>,
    pub warnings: Vec<String>,
}

pub fn estimate_mobility(metric: &ChartMetric, basis: &AnsatzBasis, points: &[Vec<f64>], svd_tol: f64, verify_seed: u64) -> Result<MobilityReport> {
    let mut m = assemble_constraints(metric, basis, points)?;
    let cols = m.ncols();
    let raw_norms: Vec<f64> = (0..cols).map(|c| m.column(c).norm()).collect();
    let biggest = raw_norms.iter().copied().fold(0.0f64, f64::max);
    // columns that vanish up to rounding stay unscaled so they remain null
    let norms: Vec<f64> = raw_norms.iter().map(|&v| if v > 1e-10 * biggest { v } else { 1.0 }).collect();
    for (c, s) in norms.iter().enumerate() {
        m.column_mut(c).scale_mut(1.0 / s);
    }
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|a, b| svd.singular_values[*b].total_cmp(&svd.singular_values[*a]));
    let sv: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let top = sv[0];
    let raw = if top == 0.0 { cols } else { sv.iter().filter(|s| **s < svd_tol * top).count() };
    let kept = cols - raw;
    let gap_ratio = if raw == 0 || kept == 0 {
        None
    } else if sv[kept] == 0.0 {
        Some(f64::MAX)
    } else {
        Some(sv[kept - 1] / sv[kept])
    };
    let ambiguous = gap_ratio.is_some_and(|g| g < MIN_GAP_RATIO);

    let fresh = sampling::points_in(metric.domain(), VERIFY_POINTS, verify_seed, 0.8);
    let basis = Arc::new(basis.clone());
    let mut solutions = Vec::with_capacity(raw);
    let mut warnings = Vec::new();
    for (idx, &k) in order[kept..].iter().enumerate() {
        let coeffs: Vec<f64> = (0..cols).map(|c| v_t[(k, c)] / norms[c]).collect();
        let rec = verify(metric, &basis, coeffs, &fresh)?;
        if !rec.verified {
            warnings.push(format!(
                "nullspace vector {idx} fails verification (basic residual {:.3e}); dimension reduced",
                rec.basic
            ));
        }
        solutions.push(rec);
    }
    if ambiguous {
        warnings.push(format!("no clear spectral gap (ratio {:.3e})", gap_ratio.unwrap_or(0.0)));
    }
    Ok(MobilityReport {
        metric: metric.label().to_string(),
        basis: basis.spec(),
        points: points.len(),
        verify_seed,
        svd_tol,
        dimension: solutions.iter().filter(|s| s.verified).count(),
        raw_dimension: raw,
        singular_values: sv,
        gap_ratio,
        ambiguous,
        solutions,
        warnings,
    })
}

fn verify(metric: &ChartMetric, basis: &Arc<AnsatzBasis>, coeffs: Vec<f64>, fresh: &[Vec<f64>]) -> Result<SolutionRecord> {
    let field = basis.field(coeffs)?;
    let mut peak = 0.0f64;
    for x in fresh {
        peak = peak.max(field.values(x)?.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    let scale = if peak > 0.0 { 1.0 / peak } else { 1.0 };
    let field = basis.field(field.coefficients.iter().map(|c| c * scale).collect())?;
    let per_point: Vec<(f64, f64, f64)> = fresh
        .par_iter()
        .map(|x| {
            Ok((
                residual_basic(metric, &field, x)?,
                residual_int1(metric, &field, x)?.residual,
                residual_ricci_commute(metric, &field, x)?,
            ))
        })
        .collect::<Result<_>>()?;
    let worst = |f: fn(&(f64, f64, f64)) -> f64| per_point.iter().map(f).fold(0.0f64, f64::max);
    let basic = worst(|r| r.0);
    Ok(SolutionRecord {
        coefficients: field.coefficients,
        basic,
        int1: worst(|r| r.1),
        ricci_commute: worst(|r| r.2),
        verified: peak > 0.0 && basic < VERIFY_TOL,
    })
}

/// Hessian fits of several solutions of one metric.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lemma3Report {
    pub solutions: Vec<SolutionFit>,
    /// Mean of the per-solution `B` values.
    pub common_b: Option<f64>,
    /// Largest difference between per-solution mean `B` values.
    pub b_spread: f64,
    /// Every fit below `tol` and every `B` within `tol` of the others.
    pub passed: bool,
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolutionFit {
    /// Points where the solution is not proportional to `g`.
    pub points_used: usize,
    pub max_residual: f64,
    pub b_mean: Option<f64>,
    pub b_std: Option<f64>,
}

/// Fits `λ_{,ij} = μ g_ij + B a_ij` for each solution at every point and
/// compares the fitted `B` across points and solutions.
pub fn lemma3_property_check(metric: &ChartMetric, solutions: &[Arc<dyn TensorField>], points: &[Vec<f64>], tol: f64) -> Result<Lemma3Report> {
    if solutions.len() < 3 {
        return Err(GeomError::Precondition(format!(
            "needs at least three independent solutions, got {}",
            solutions.len()
        )));
    }
    let fits: Vec<SolutionFit> = solutions
        .iter()
        .map(|a| {
            let rows = points.par_iter().map(|x| fit_b_mu(metric, a.as_ref(), x)).collect::<Result<Vec<_>>>()?;
            let bs: Vec<f64> = rows.iter().filter_map(|r| r.b).collect();
            let max_residual = rows.iter().filter(|r| !r.degenerate).map(|r| r.residual).fold(0.0f64, f64::max);
            let (mean, std) = linalg::mean_std(&bs);
            Ok(SolutionFit {
                points_used: bs.len(),
                max_residual,
                b_mean: (!bs.is_empty()).then_some(mean),
                b_std: (!bs.is_empty()).then_some(std),
            })
        })
        .collect::<Result<_>>()?;
    let means: Vec<f64> = fits.iter().filter_map(|f| f.b_mean).collect();
    let spread = if means.is_empty() {
        0.0
    } else {
        means.iter().copied().fold(f64::MIN, f64::max) - means.iter().copied().fold(f64::MAX, f64::min)
    };
    let passed = fits.iter().all(|f| f.max_residual < tol && f.b_std.is_none_or(|s| s < tol)) && spread < tol;
    Ok(Lemma3Report {
        common_b: (!means.is_empty()).then(|| means.iter().sum::<f64>() / means.len() as f64),
        solutions: fits,
        b_spread: spread,
        passed,
        tol,
    })
}

/// Verified solutions of a report as fields.
pub fn solution_fields(basis: &AnsatzBasis, report: &MobilityReport) -> Result<Vec<Arc<dyn TensorField>>> {
    let basis = Arc::new(basis.clone());
    report
        .solutions
        .iter()
        .filter(|s| s.verified)
        .map(|s| Ok(Arc::new(basis.field(s.coefficients.clone())?) as Arc<dyn TensorField>))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::DomainBox;

    #[test]
    fn monomial_counts() {
        assert_eq!(exponents(3, 2).len(), 10);
        assert_eq!(AnsatzBasis::monomial(3, 2).count(), 60);
        assert_eq!(AnsatzBasis::monomial(4, 2).count(), 150);
    }

    #[test]
    fn constants_solve_on_flat_space() {
        let g = ChartMetric::diagonal_constant(&[1.0, 1.0, -1.0], DomainBox::cube(3, 1.0), "flat").unwrap();
        let b = AnsatzBasis::monomial(3, 0);
        let pts = sampling::points_in(g.domain(), 5, 1, 0.9);
        let m = assemble_constraints(&g, &b, &pts).unwrap();
        assert!(m.iter().all(|v| *v == 0.0));
        let r = estimate_mobility(&g, &b, &pts, DEFAULT_SVD_TOL, 2).unwrap();
        assert_eq!(r.dimension, 6);
    }

    #[test]
    fn too_few_points() {
        let g = ChartMetric::diagonal_constant(&[1.0, 1.0, 1.0], DomainBox::cube(3, 1.0), "flat").unwrap();
        let pts = sampling::points_in(g.domain(), 2, 1, 0.9);
        assert!(matches!(
            assemble_constraints(&g, &AnsatzBasis::monomial(3, 2), &pts),
            Err(GeomError::InsufficientSamples(_))
        ));
    }

    #[test]
    fn ansatz_field_matches_basis_layout() {
        let b = Arc::new(AnsatzBasis::monomial(2, 1));
        // columns: monomials [1, x1, x2] × pairs [(0,0), (0,1), (1,1)]
        let mut c = vec![0.0; 9];
        c[4] = 2.0; // x1 · E_01
        let f = b.field(c).unwrap();
        let v = f.values(&[0.5, 0.3]).unwrap();
        assert_eq!(v, vec![0.0, 1.0, 1.0, 0.0]);
    }
}
