//! Chart metrics and pointwise curvature.
//!
//! Sign conventions used throughout the crate:
//!
//! ```text
//! Γ^i_{jk}  = ½ g^{il} (∂_j g_{lk} + ∂_k g_{lj} − ∂_l g_{jk})
//! R^i_{jkl} = ∂_k Γ^i_{jl} − ∂_l Γ^i_{jk} + Γ^i_{pk} Γ^p_{jl} − Γ^i_{pl} Γ^p_{jk}
//! R_{ij}    = R^p_{ipj}
//! ```
//!
//! With these, the unit sphere has `R^i_{jkl} = δ^i_k g_{jl} − δ^i_l g_{jk}`.
//! Covariant derivative indices are appended on the right
//! (`T_{ij,k} = ∇_k T_{ij}`).

mod curvature;
mod field;
mod geometry;

pub use curvature::{constant_curvature_test, covariant_derivative, frame_at, CurvatureFrame};
pub use field::{ExprField, FnField, TensorField};
pub use geometry::LocalGeometry;

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::expr::{Expression, Jet};
use crate::linalg;

/// Eigenvalues with magnitude below this count as zero when reading off a
/// signature.
pub const SIGNATURE_THRESHOLD: f64 = 1e-10;

/// Open coordinate box `lo < x < hi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(GeomError::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(GeomError::InvalidMetric("domain requires finite lo < hi in every coordinate".into()));
        }
        Ok(DomainBox { lo, hi })
    }

    pub fn cube(dim: usize, half_width: f64) -> Self {
        DomainBox {
            lo: vec![-half_width; dim],
            hi: vec![half_width; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *a < *v && *v < *b)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Maps a point of the unit cube `(0,1)^n` into the box.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(t, (a, b))| a + (b - a) * t)
            .collect()
    }

    /// The box shrunk towards its centre by `factor` (0 < factor <= 1).
    pub fn shrunk(&self, factor: f64) -> DomainBox {
        let c = self.center();
        DomainBox {
            lo: self.lo.iter().zip(&c).map(|(a, m)| m + factor * (a - m)).collect(),
            hi: self.hi.iter().zip(&c).map(|(b, m)| m + factor * (b - m)).collect(),
        }
    }
}

/// A metric given in closed form on one coordinate box.
#[derive(Clone, Debug)]
pub struct ChartMetric {
    dim: usize,
    coords: Vec<String>,
    sources: Vec<String>,
    components: Vec<Expression>,
    domain: DomainBox,
    label: String,
}

fn normalize_text(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

impl ChartMetric {
    /// Builds a metric from a square matrix of expression strings. The
    /// matrix must be symmetric as text (ignoring whitespace).
    pub fn new(coords: Vec<String>, matrix: Vec<Vec<String>>, domain: DomainBox, label: impl Into<String>) -> Result<Self> {
        let n = coords.len();
        if n < 2 {
            return Err(GeomError::InvalidMetric(format!("dimension must be at least 2, got {n}")));
        }
        if matrix.len() != n || matrix.iter().any(|row| row.len() != n) {
            return Err(GeomError::InvalidMetric(format!("metric matrix must be {n}x{n}")));
        }
        if domain.dim() != n {
            return Err(GeomError::DimensionMismatch {
                expected: n,
                got: domain.dim(),
            });
        }
        let mut components = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                if normalize_text(&matrix[i][j]) != normalize_text(&matrix[j][i]) {
                    return Err(GeomError::InvalidMetric(format!(
                        "metric text not symmetric at ({i},{j}): `{}` vs `{}`",
                        matrix[i][j], matrix[j][i]
                    )));
                }
                let src = if i <= j { &matrix[i][j] } else { &matrix[j][i] };
                components.push(Expression::parse_with_names(src, &coords)?);
            }
        }
        let sources = matrix.into_iter().flatten().collect();
        Ok(ChartMetric {
            dim: n,
            coords,
            sources,
            components,
            domain,
            label: label.into(),
        })
    }

    /// Convenience constructor with default coordinate names `x1..xn`.
    pub fn from_rows(rows: &[&[&str]], domain: DomainBox, label: &str) -> Result<Self> {
        let n = rows.len();
        let coords = (1..=n).map(|i| format!("x{i}")).collect();
        let matrix = rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect();
        ChartMetric::new(coords, matrix, domain, label)
    }

    /// Constant diagonal metric `diag(entries)`.
    pub fn diagonal_constant(entries: &[f64], domain: DomainBox, label: &str) -> Result<Self> {
        let n = entries.len();
        let matrix = (0..n)
            .map(|i| (0..n).map(|j| if i == j { format!("{}", entries[i]) } else { "0".into() }).collect())
            .collect();
        ChartMetric::new((1..=n).map(|i| format!("x{i}")).collect(), matrix, domain, label)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Component source text, row-major, exactly as supplied.
    pub fn source_rows(&self) -> Vec<Vec<String>> {
        self.sources.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn component(&self, i: usize, j: usize) -> &Expression {
        &self.components[i * self.dim + j]
    }

    pub fn with_domain(&self, domain: DomainBox) -> Result<Self> {
        if domain.dim() != self.dim {
            return Err(GeomError::DimensionMismatch {
                expected: self.dim,
                got: domain.dim(),
            });
        }
        let mut out = self.clone();
        out.domain = domain;
        Ok(out)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// All `n*n` component jets; the lower triangle is a copy of the upper.
    pub fn jets(&self, x: &[f64], order: usize) -> Result<Vec<Jet>> {
        let n = self.dim;
        if x.len() != n {
            return Err(GeomError::DimensionMismatch { expected: n, got: x.len() });
        }
        let mut out: Vec<Option<Jet>> = vec![None; n * n];
        for i in 0..n {
            for j in i..n {
                let e = &self.components[i * n + j];
                let jet = if e.is_constant() {
                    Jet::constant(n, order, e.eval(x)?)
                } else {
                    e.eval_taylor(x, order)?
                };
                out[j * n + i] = Some(jet.clone());
                out[i * n + j] = Some(jet);
            }
        }
        Ok(out.into_iter().map(|j| j.expect("filled")).collect())
    }

    pub fn values(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.jets(x, 0)?.iter().map(Jet::value).collect())
    }

    /// `(positive, negative)` eigenvalue counts at `x`.
    pub fn signature_at(&self, x: &[f64]) -> Result<(usize, usize)> {
        let g = self.values(x)?;
        signature_of(&g, self.dim).ok_or_else(|| GeomError::DegenerateMetric {
            point: x.to_vec(),
            det: linalg::det(&g, self.dim),
        })
    }

    /// Signature at the centre of the domain.
    pub fn signature(&self) -> Result<(usize, usize)> {
        self.signature_at(&self.domain.center())
    }

    /// Checks nondegeneracy and constant signature over `points`.
    pub fn scan_signature(&self, points: &[Vec<f64>]) -> Result<(usize, usize)> {
        let base = self.signature()?;
        for p in points {
            let s = self.signature_at(p)?;
            if s != base {
                return Err(GeomError::SignatureChange {
                    base,
                    found: s,
                    point: p.clone(),
                });
            }
        }
        Ok(base)
    }

    pub fn is_indefinite(&self) -> Result<bool> {
        let (p, q) = self.signature()?;
        Ok(p > 0 && q > 0)
    }
}

/// Counts of positive and negative eigenvalues, `None` if any eigenvalue is
/// below [`SIGNATURE_THRESHOLD`] in magnitude.
pub fn signature_of(g: &[f64], n: usize) -> Option<(usize, usize)> {
    let (vals, _) = linalg::symmetric_eigen(g, n);
    let mut pos = 0;
    let mut neg = 0;
    for v in vals {
        if v > SIGNATURE_THRESHOLD {
            pos += 1;
        } else if v < -SIGNATURE_THRESHOLD {
            neg += 1;
        } else {
            return None;
        }
    }
    Some((pos, neg))
}

/// Relative nondegeneracy test: `|det g|` against the product of row norms.
pub(crate) fn is_degenerate(det: f64, g: &[f64], n: usize) -> bool {
    let scale: f64 = (0..n)
        .map(|i| (0..n).map(|j| g[i * n + j] * g[i * n + j]).sum::<f64>().sqrt())
        .product();
    !(det.abs() > 1e-12 * scale) || !det.is_finite()
}
