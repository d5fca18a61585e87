use std::fmt;
use std::sync::Arc;

use super::ChartMetric;
use crate::error::{GeomError, Result};
use crate::expr::{Expression, Jet};

/// A covariant tensor field that can be evaluated as jets at a point.
///
/// Components are stored row-major in `n^rank` slots.
pub trait TensorField: Send + Sync {
    fn dim(&self) -> usize;
    fn rank(&self) -> usize;
    fn jets(&self, x: &[f64], order: usize) -> Result<Vec<Jet>>;

    fn values(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.jets(x, 0)?.iter().map(Jet::value).collect())
    }
}

impl TensorField for ChartMetric {
    fn dim(&self) -> usize {
        ChartMetric::dim(self)
    }
    fn rank(&self) -> usize {
        2
    }
    fn jets(&self, x: &[f64], order: usize) -> Result<Vec<Jet>> {
        ChartMetric::jets(self, x, order)
    }
}

impl<T: TensorField + ?Sized> TensorField for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn rank(&self) -> usize {
        (**self).rank()
    }
    fn jets(&self, x: &[f64], order: usize) -> Result<Vec<Jet>> {
        (**self).jets(x, order)
    }
}

impl<T: TensorField + ?Sized> TensorField for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn rank(&self) -> usize {
        (**self).rank()
    }
    fn jets(&self, x: &[f64], order: usize) -> Result<Vec<Jet>> {
        (**self).jets(x, order)
    }
}

/// Tensor field with every component given by an expression.
#[derive(Clone, Debug)]
pub struct ExprField {
    dim: usize,
    rank: usize,
    components: Vec<Expression>,
}

impl ExprField {
    pub fn new(dim: usize, rank: usize, components: Vec<Expression>) -> Result<Self> {
        let want = dim.pow(rank as u32);
        if components.len() != want {
            return Err(GeomError::DimensionMismatch {
                expected: want,
                got: components.len(),
            });
        }
        if let Some(e) = components.iter().find(|e| e.dim() != dim) {
            return Err(GeomError::DimensionMismatch {
                expected: dim,
                got: e.dim(),
            });
        }
        Ok(ExprField { dim, rank, components })
    }

    pub fn scalar(source: &str, dim: usize) -> Result<Self> {
        ExprField::new(dim, 0, vec![Expression::parse(source, dim)?])
    }

    /// Symmetric rank-2 field; only the upper triangle of `rows` is read.
    pub fn symmetric(rows: &[&[&str]]) -> Result<Self> {
        let n = rows.len();
        let mut comps = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let (r, c) = if i <= j { (i, j) } else { (j, i) };
                comps.push(Expression::parse(rows[r][c], n)?);
            }
        }
        ExprField::new(n, 2, comps)
    }
}

impl TensorField for ExprField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn rank(&self) -> usize {
        self.rank
    }
    fn jets(&self, x: &[f64], order: usize) -> Result<Vec<Jet>> {
        if x.len() != self.dim {
            return Err(GeomError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        self.components.iter().map(|e| e.eval_taylor(x, order)).collect()
    }
}

type JetFn = dyn Fn(&[f64], usize) -> Result<Vec<Jet>> + Send + Sync;

/// Tensor field backed by a closure returning component jets.
#[derive(Clone)]
pub struct FnField {
    dim: usize,
    rank: usize,
    f: Arc<JetFn>,
}

impl FnField {
    pub fn new<F>(dim: usize, rank: usize, f: F) -> Self
    where
        F: Fn(&[f64], usize) -> Result<Vec<Jet>> + Send + Sync + 'static,
    {
        FnField { dim, rank, f: Arc::new(f) }
    }

    /// Pointwise linear combination `Σ c_k F_k` of fields of equal shape.
    pub fn linear_combination(terms: Vec<(f64, Arc<dyn TensorField>)>) -> Result<Self> {
        let first = terms.first().ok_or_else(|| GeomError::Precondition("empty linear combination".into()))?;
        let (dim, rank) = (first.1.dim(), first.1.rank());
        if terms.iter().any(|(_, t)| t.dim() != dim || t.rank() != rank) {
            return Err(GeomError::Precondition("linear combination of fields with different shapes".into()));
        }
        Ok(FnField::new(dim, rank, move |x, order| {
            let mut acc: Option<Vec<Jet>> = None;
            for (c, t) in &terms {
                let js = t.jets(x, order)?;
                acc = Some(match acc {
                    None => js.iter().map(|j| j * *c).collect(),
                    Some(a) => a.iter().zip(&js).map(|(p, q)| p + &(q * *c)).collect(),
                });
            }
            Ok(acc.expect("nonempty"))
        }))
    }
}

impl fmt::Debug for FnField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnField").field("dim", &self.dim).field("rank", &self.rank).finish()
    }
}

impl TensorField for FnField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn rank(&self) -> usize {
        self.rank
    }
    fn jets(&self, x: &[f64], order: usize) -> Result<Vec<Jet>> {
        if x.len() != self.dim {
            return Err(GeomError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        (self.f)(x, order)
    }
}
