use super::is_degenerate;
use crate::error::{GeomError, Result};
use crate::expr::Jet;
use crate::linalg;

/// Metric jets at one point together with the derived inverse and
/// Christoffel symbols, all carried as jets so that further covariant
/// differentiation stays exact.
#[derive(Clone, Debug)]
pub struct LocalGeometry {
    n: usize,
    point: Vec<f64>,
    g: Vec<Jet>,
    ginv: Vec<Jet>,
    det: Jet,
    gamma: Vec<Jet>,
}

impl LocalGeometry {
    /// `g` are the `n*n` metric jets at `point`, of order at least 1.
    pub fn from_jets(g: Vec<Jet>, point: &[f64]) -> Result<Self> {
        let n = point.len();
        if g.len() != n * n {
            return Err(GeomError::DimensionMismatch {
                expected: n * n,
                got: g.len(),
            });
        }
        let order = g[0].order();
        if order == 0 {
            return Err(GeomError::InsufficientOrder { needed: 1, have: 0 });
        }
        let det = linalg::det(&g, n);
        let gv: Vec<f64> = g.iter().map(Jet::value).collect();
        if is_degenerate(det.value(), &gv, n) {
            return Err(GeomError::DegenerateMetric {
                point: point.to_vec(),
                det: det.value(),
            });
        }
        let adj = linalg::adjugate(&g, n);
        let rdet = det.recip();
        let ginv: Vec<Jet> = adj.iter().map(|a| a * &rdet).collect();

        // Γ_{l,jk} = ½ (∂_j g_lk + ∂_k g_lj − ∂_l g_jk)
        let dg: Vec<Jet> = (0..n * n * n).map(|f| g[f / n].partial(f % n)).collect();
        let d = |a: usize, b: usize, c: usize| &dg[(a * n + b) * n + c];
        let mut lowered: Vec<Option<Jet>> = vec![None; n * n * n];
        for l in 0..n {
            for j in 0..n {
                for k in j..n {
                    let v = (&(d(l, k, j) + d(l, j, k)) - d(j, k, l)).scale(0.5);
                    lowered[(l * n + k) * n + j] = Some(v.clone());
                    lowered[(l * n + j) * n + k] = Some(v);
                }
            }
        }
        let lowered: Vec<Jet> = lowered.into_iter().map(|v| v.expect("filled")).collect();
        let mut gamma: Vec<Option<Jet>> = vec![None; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in j..n {
                    let mut acc = ginv[i * n].mul_jet(&lowered[j * n + k]);
                    for l in 1..n {
                        acc = &acc + &ginv[i * n + l].mul_jet(&lowered[(l * n + j) * n + k]);
                    }
                    gamma[(i * n + k) * n + j] = Some(acc.clone());
                    gamma[(i * n + j) * n + k] = Some(acc);
                }
            }
        }
        Ok(LocalGeometry {
            n,
            point: point.to_vec(),
            g,
            ginv,
            det,
            gamma: gamma.into_iter().map(|v| v.expect("filled")).collect(),
        })
    }

    /// Evaluates `metric` at `x` with metric jets of the given order.
    pub fn new(metric: &dyn super::TensorField, x: &[f64], order: usize) -> Result<Self> {
        if metric.rank() != 2 {
            return Err(GeomError::Precondition("metric must be a rank-2 field".into()));
        }
        LocalGeometry::from_jets(metric.jets(x, order)?, x)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn point(&self) -> &[f64] {
        &self.point
    }

    /// Order of the metric jets.
    pub fn order(&self) -> usize {
        self.g[0].order()
    }

    pub fn g(&self) -> &[Jet] {
        &self.g
    }

    pub fn ginv(&self) -> &[Jet] {
        &self.ginv
    }

    pub fn det(&self) -> &Jet {
        &self.det
    }

    /// `Γ^i_{jk}` at `(i*n + j)*n + k`.
    pub fn christoffel(&self) -> &[Jet] {
        &self.gamma
    }

    pub fn g_values(&self) -> Vec<f64> {
        self.g.iter().map(Jet::value).collect()
    }

    pub fn ginv_values(&self) -> Vec<f64> {
        self.ginv.iter().map(Jet::value).collect()
    }

    pub fn christoffel_values(&self) -> Vec<f64> {
        self.gamma.iter().map(Jet::value).collect()
    }

    /// Covariant derivative of a covariant tensor of the given rank. The new
    /// index is appended last; the result has jet order
    /// `min(t.order − 1, Γ.order)`.
    pub fn covariant_derivative(&self, t: &[Jet], rank: usize) -> Result<Vec<Jet>> {
        let n = self.n;
        let size = n.pow(rank as u32);
        if t.len() != size {
            return Err(GeomError::DimensionMismatch {
                expected: size,
                got: t.len(),
            });
        }
        let have = t.iter().map(Jet::order).min().unwrap_or(0);
        if have == 0 {
            return Err(GeomError::InsufficientOrder { needed: 1, have });
        }
        let mut out = Vec::with_capacity(size * n);
        let mut digits = vec![0usize; rank];
        for f in 0..size {
            let mut rem = f;
            for s in (0..rank).rev() {
                digits[s] = rem % n;
                rem /= n;
            }
            for m in 0..n {
                let mut acc = t[f].partial(m);
                for s in 0..rank {
                    let stride = n.pow((rank - 1 - s) as u32);
                    let base = f - digits[s] * stride;
                    let is = digits[s];
                    for p in 0..n {
                        let gam = &self.gamma[(p * n + m) * n + is];
                        if gam.value() == 0.0 && gam.order() == 0 {
                            continue;
                        }
                        acc = &acc - &gam.mul_jet(&t[base + p * stride]);
                    }
                }
                out.push(acc);
            }
        }
        Ok(out)
    }

    /// `R^i_{jkl}` at `((i*n + j)*n + k)*n + l`; jet order is one less than Γ's.
    pub fn riemann(&self) -> Result<Vec<Jet>> {
        let n = self.n;
        let go = self.gamma[0].order();
        if go == 0 {
            return Err(GeomError::InsufficientOrder {
                needed: 2,
                have: self.order(),
            });
        }
        let gam = |i: usize, j: usize, k: usize| &self.gamma[(i * n + j) * n + k];
        let mut out: Vec<Option<Jet>> = vec![None; n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in k..n {
                        let idx = ((i * n + j) * n + k) * n + l;
                        if k == l {
                            out[idx] = Some(gam(0, 0, 0).partial(0).zero_like());
                            continue;
                        }
                        let mut v = &gam(i, j, l).partial(k) - &gam(i, j, k).partial(l);
                        for p in 0..n {
                            v = &v + &gam(i, p, k).mul_jet(gam(p, j, l));
                            v = &v - &gam(i, p, l).mul_jet(gam(p, j, k));
                        }
                        out[((i * n + j) * n + l) * n + k] = Some(-&v);
                        out[idx] = Some(v);
                    }
                }
            }
        }
        Ok(out.into_iter().map(|v| v.expect("filled")).collect())
    }
}
