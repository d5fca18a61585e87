use serde::Serialize;

use super::{signature_of, ChartMetric, LocalGeometry, TensorField};
use crate::error::{GeomError, Result};
use crate::expr::Jet;

/// Curvature data of a metric at one point. Index layout is row-major in
/// the order the indices are written, e.g. `riemann[((i*n+j)*n+k)*n+l]`
/// is `R^i_{jkl}`.
#[derive(Clone, Debug, Serialize)]
pub struct CurvatureFrame {
    pub point: Vec<f64>,
    pub n: usize,
    pub g: Vec<f64>,
    pub ginv: Vec<f64>,
    pub det_g: f64,
    pub signature: (usize, usize),
    pub christoffel: Vec<f64>,
    pub riemann: Vec<f64>,
    pub ricci: Vec<f64>,
    pub scalar: f64,
    /// `P_{ij}`; empty for `n = 2`.
    pub schouten: Vec<f64>,
    /// `C^h_{ijk}`; all zero for `n <= 3`.
    pub weyl: Vec<f64>,
}

impl CurvatureFrame {
    pub(crate) fn from_geometry(geo: &LocalGeometry) -> Result<Self> {
        let n = geo.dim();
        let riemann: Vec<f64> = geo.riemann()?.iter().map(Jet::value).collect();
        let g = geo.g_values();
        let ginv = geo.ginv_values();
        let signature = signature_of(&g, n).ok_or_else(|| GeomError::DegenerateMetric {
            point: geo.point().to_vec(),
            det: geo.det().value(),
        })?;
        let mut ricci = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                ricci[i * n + j] = (0..n).map(|p| riemann[((p * n + i) * n + p) * n + j]).sum();
            }
        }
        let scalar = (0..n * n).map(|k| ginv[k] * ricci[k]).sum();
        let mut frame = CurvatureFrame {
            point: geo.point().to_vec(),
            n,
            g,
            ginv,
            det_g: geo.det().value(),
            signature,
            christoffel: geo.christoffel_values(),
            riemann,
            ricci,
            scalar,
            schouten: Vec::new(),
            weyl: vec![0.0; n * n * n * n],
        };
        if n >= 3 {
            let c = 1.0 / (2.0 * (n as f64 - 1.0));
            frame.schouten = (0..n * n)
                .map(|k| (frame.ricci[k] - c * scalar * frame.g[k]) / (n as f64 - 2.0))
                .collect();
        }
        if n >= 4 {
            let d = frame.schouten_part();
            frame.weyl = frame.riemann.iter().zip(&d).map(|(r, d)| r - d).collect();
        }
        Ok(frame)
    }

    fn idx4(&self, a: usize, b: usize, c: usize, d: usize) -> usize {
        let n = self.n;
        ((a * n + b) * n + c) * n + d
    }

    /// `δ^h_j P_ik − δ^h_k P_ij + P^h_j g_ik − P^h_k g_ij`, the part of the
    /// curvature determined by the Ricci tensor. Requires `n >= 3`.
    pub fn schouten_part(&self) -> Vec<f64> {
        let n = self.n;
        assert!(n >= 3, "schouten part needs n >= 3");
        let p = &self.schouten;
        let mut p_up = vec![0.0; n * n];
        for h in 0..n {
            for j in 0..n {
                p_up[h * n + j] = (0..n).map(|q| self.ginv[h * n + q] * p[q * n + j]).sum();
            }
        }
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let mut out = vec![0.0; n * n * n * n];
        for h in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        out[self.idx4(h, i, j, k)] = delta(h, j) * p[i * n + k] - delta(h, k) * p[i * n + j]
                            + p_up[h * n + j] * self.g[i * n + k]
                            - p_up[h * n + k] * self.g[i * n + j];
                    }
                }
            }
        }
        out
    }

    /// `R_{ijkl} = g_{ip} R^p_{jkl}`.
    pub fn riemann_lowered(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        out[self.idx4(i, j, k, l)] = (0..n).map(|p| self.g[i * n + p] * self.riemann[self.idx4(p, j, k, l)]).sum();
                    }
                }
            }
        }
        out
    }

    pub fn inverse_residual(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let s: f64 = (0..n).map(|p| self.ginv[i * n + p] * self.g[p * n + j]).sum();
                worst = worst.max((s - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        worst
    }

    /// Max of `|R^p_{ikl} + R^p_{kli} + R^p_{lik}|`.
    pub fn bianchi_residual(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for p in 0..n {
            for i in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let s = self.riemann[self.idx4(p, i, k, l)] + self.riemann[self.idx4(p, k, l, i)] + self.riemann[self.idx4(p, l, i, k)];
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }

    /// Max of `|R_{ijkl} − R_{klij}|`.
    pub fn pair_symmetry_residual(&self) -> f64 {
        let low = self.riemann_lowered();
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        worst = worst.max((low[self.idx4(i, j, k, l)] - low[self.idx4(k, l, i, j)]).abs());
                    }
                }
            }
        }
        worst
    }

    /// Max of `|R^i_{jkl} + R^i_{jlk}|`.
    pub fn antisymmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        worst = worst.max((self.riemann[self.idx4(i, j, k, l)] + self.riemann[self.idx4(i, j, l, k)]).abs());
                    }
                }
            }
        }
        worst
    }

    /// Largest trace of the Weyl tensor over any pair of slots.
    pub fn weyl_trace_residual(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                let mut t_hi = 0.0;
                let mut t_hj = 0.0;
                let mut t_hk = 0.0;
                for h in 0..n {
                    t_hi += self.weyl[self.idx4(h, h, a, b)];
                    t_hj += self.weyl[self.idx4(h, a, h, b)];
                    t_hk += self.weyl[self.idx4(h, a, b, h)];
                }
                let mut t_jk = 0.0;
                let mut t_ij = 0.0;
                for p in 0..n {
                    for q in 0..n {
                        t_jk += self.ginv[p * n + q] * self.weyl[self.idx4(a, b, p, q)];
                        t_ij += self.ginv[p * n + q] * self.weyl[self.idx4(a, p, q, b)];
                    }
                }
                worst = worst.max(t_hi.abs()).max(t_hj.abs()).max(t_hk.abs()).max(t_jk.abs()).max(t_ij.abs());
            }
        }
        worst
    }

    /// Max of `|C^h_{ijk}|`.
    pub fn weyl_norm(&self) -> f64 {
        self.weyl.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max of `|R − (C + Ricci part)|`, computed directly from `R` even when
    /// `C` is zero by convention.
    pub fn decomposition_remainder(&self) -> f64 {
        if self.n < 3 {
            return 0.0;
        }
        let d = self.schouten_part();
        self.riemann
            .iter()
            .zip(&d)
            .zip(&self.weyl)
            .fold(0.0, |m, ((r, d), c)| m.max((r - d - c).abs()))
    }

    /// Max over `i,k` of `|Σ_h (C + Ricci part)^h_{ihk} − R_{ik}|`.
    pub fn decomposition_ricci_residual(&self) -> f64 {
        if self.n < 3 {
            return 0.0;
        }
        let n = self.n;
        let d = self.schouten_part();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for k in 0..n {
                let s: f64 = (0..n).map(|h| d[self.idx4(h, i, h, k)] + self.weyl[self.idx4(h, i, h, k)]).sum();
                worst = worst.max((s - self.ricci[i * n + k]).abs());
            }
        }
        worst
    }

    /// Least-squares `κ` with `R ≈ κ (δ^i_k g_jl − δ^i_l g_jk)` and the
    /// max-norm remainder.
    pub fn constant_curvature_fit(&self) -> (f64, f64) {
        let n = self.n;
        let mut model = vec![0.0; n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let dik = if i == k { 1.0 } else { 0.0 };
                        let dil = if i == l { 1.0 } else { 0.0 };
                        model[self.idx4(i, j, k, l)] = dik * self.g[j * n + l] - dil * self.g[j * n + k];
                    }
                }
            }
        }
        let num: f64 = model.iter().zip(&self.riemann).map(|(m, r)| m * r).sum();
        let den: f64 = model.iter().map(|m| m * m).sum();
        let kappa = num / den;
        let res = model
            .iter()
            .zip(&self.riemann)
            .fold(0.0f64, |w, (m, r)| w.max((r - kappa * m).abs()));
        (kappa, res)
    }
}

/// Full curvature frame of `metric` at `x`.
pub fn frame_at(metric: &ChartMetric, x: &[f64]) -> Result<CurvatureFrame> {
    if !metric.domain().contains(x) {
        return Err(GeomError::OutsideDomain { point: x.to_vec() });
    }
    let geo = LocalGeometry::new(metric, x, 2)?;
    CurvatureFrame::from_geometry(&geo)
}

/// `∇T` (order 1) or `∇∇T` (order 2) of a covariant field at `x`, as plain
/// values with the derivative indices appended.
pub fn covariant_derivative(metric: &dyn TensorField, field: &dyn TensorField, x: &[f64], order: usize) -> Result<Vec<f64>> {
    if !(1..=2).contains(&order) {
        return Err(GeomError::Precondition(format!("covariant derivative order must be 1 or 2, got {order}")));
    }
    if metric.dim() != field.dim() {
        return Err(GeomError::DimensionMismatch {
            expected: metric.dim(),
            got: field.dim(),
        });
    }
    let geo = LocalGeometry::new(metric, x, order)?;
    let t = field.jets(x, order)?;
    let have = t.iter().map(Jet::order).min().unwrap_or(0);
    if have < order {
        return Err(GeomError::InsufficientOrder { needed: order, have });
    }
    let mut cur = geo.covariant_derivative(&t, field.rank())?;
    if order == 2 {
        cur = geo.covariant_derivative(&cur, field.rank() + 1)?;
    }
    Ok(cur.iter().map(Jet::value).collect())
}

/// Returns `κ` when `R^i_{jkl} = κ(δ^i_k g_jl − δ^i_l g_jk)` holds at every
/// sample within `tol`, with a single `κ` across samples.
pub fn constant_curvature_test(metric: &ChartMetric, points: &[Vec<f64>], tol: f64) -> Result<Option<f64>> {
    if points.len() < 10 {
        return Err(GeomError::InsufficientSamples(format!(
            "constant curvature test needs at least 10 points, got {}",
            points.len()
        )));
    }
    let mut kappas = Vec::with_capacity(points.len());
    for p in points {
        let frame = frame_at(metric, p)?;
        let (kappa, res) = frame.constant_curvature_fit();
        if res > tol {
            return Ok(None);
        }
        kappas.push(kappa);
    }
    let mean = kappas.iter().sum::<f64>() / kappas.len() as f64;
    if kappas.iter().any(|k| (k - mean).abs() > tol) {
        return Ok(None);
    }
    Ok(Some(mean))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{DomainBox, ExprField};

    fn beltrami3() -> ChartMetric {
        let q = "(1+x1^2+x2^2+x3^2)";
        let e = |i: usize, j: usize| {
            let d = if i == j { q.to_string() } else { "0".to_string() };
            format!("({d} - x{}*x{})/{q}^2", i.min(j) + 1, i.max(j) + 1)
        };
        let rows: Vec<Vec<String>> = (0..3).map(|i| (0..3).map(|j| e(i, j)).collect()).collect();
        let rows_ref: Vec<Vec<&str>> = rows.iter().map(|r| r.iter().map(String::as_str).collect()).collect();
        let rows_ref2: Vec<&[&str]> = rows_ref.iter().map(|r| r.as_slice()).collect();
        ChartMetric::from_rows(&rows_ref2, DomainBox::cube(3, 1.0), "beltrami").unwrap()
    }

    #[test]
    fn flat_lorentzian_frame() {
        let m = ChartMetric::diagonal_constant(&[1.0, 1.0, -1.0], DomainBox::cube(3, 2.0), "flat").unwrap();
        let f = frame_at(&m, &[0.3, -0.2, 0.9]).unwrap();
        assert!(f.christoffel.iter().all(|v| *v == 0.0));
        assert!(f.riemann.iter().all(|v| *v == 0.0));
        assert_eq!(f.signature, (2, 1));
    }

    #[test]
    fn beltrami_at_origin_is_identity_with_vanishing_christoffels() {
        let f = frame_at(&beltrami3(), &[0.0, 0.0, 0.0]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(f.g[i * 3 + j], if i == j { 1.0 } else { 0.0 });
            }
        }
        assert!(f.christoffel.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn sphere_chart_has_unit_curvature_and_zero_weyl_remainder() {
        let m = beltrami3();
        let f = frame_at(&m, &[0.2, -0.4, 0.1]).unwrap();
        let (kappa, res) = f.constant_curvature_fit();
        assert!((kappa - 1.0).abs() < 1e-12, "{kappa}");
        assert!(res < 1e-12);
        assert!(f.decomposition_remainder() < 1e-12);
        assert!(f.weyl_norm() == 0.0);
    }

    #[test]
    fn metric_is_parallel() {
        let m = beltrami3();
        let d = covariant_derivative(&m, &m, &[0.3, 0.1, -0.5], 1).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn flat_hessian_is_coordinate_hessian() {
        let m = ChartMetric::diagonal_constant(&[1.0, -1.0, 1.0], DomainBox::cube(3, 2.0), "flat").unwrap();
        let f = ExprField::scalar("x1^2*x2 + sin(x3)", 3).unwrap();
        let x = [0.4, 0.7, -0.2];
        let h = covariant_derivative(&m, &f, &x, 2).unwrap();
        let want = [2.0 * x[1], 2.0 * x[0], 0.0, 2.0 * x[0], 0.0, 0.0, 0.0, 0.0, -x[2].sin()];
        for k in 0..9 {
            assert!((h[k] - want[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn outside_domain_is_rejected() {
        let m = beltrami3();
        assert!(matches!(frame_at(&m, &[1.5, 0.0, 0.0]), Err(GeomError::OutsideDomain { .. })));
    }

    #[test]
    fn too_few_points_for_curvature_test() {
        let m = beltrami3();
        assert!(constant_curvature_test(&m, &[vec![0.0; 3]], 1e-8).is_err());
    }
}
