//! Builtin metrics and metric pairs with known ground truth.

use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::tensor::{ChartMetric, DomainBox};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MobilityTruth {
    Exact(usize),
    AtMost(usize),
    Unknown,
}

impl MobilityTruth {
    pub fn admits(&self, d: usize) -> bool {
        match *self {
            MobilityTruth::Exact(m) => d == m,
            MobilityTruth::AtMost(m) => d <= m,
            MobilityTruth::Unknown => true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruthFlags {
    pub equivalent: bool,
    pub affine: bool,
    /// Constant curvature of `g`, if it has one.
    pub kappa: Option<f64>,
    /// Constant curvature of `ḡ`, if it has one.
    pub kappa_bar: Option<f64>,
    /// Degree of mobility of `g`.
    pub mobility: MobilityTruth,
    /// Periodic components standing in for a closed manifold.
    pub bounded_emulation: bool,
}

#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub name: String,
    pub g: ChartMetric,
    pub gbar: Option<ChartMetric>,
    pub truth: TruthFlags,
}

impl CorpusEntry {
    /// The pair `(g, ḡ)`; an error for single-metric entries.
    pub fn pair(&self) -> Result<(&ChartMetric, &ChartMetric)> {
        match &self.gbar {
            Some(gb) => Ok((&self.g, gb)),
            None => Err(GeomError::Precondition(format!("corpus entry `{}` has no second metric", self.name))),
        }
    }
}

fn num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:?}")
    }
}

fn matrix_of(n: usize, entry: impl Fn(usize, usize) -> String) -> Vec<Vec<String>> {
    (0..n).map(|i| (0..n).map(|j| entry(i.min(j), i.max(j))).collect()).collect()
}

fn coords(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

fn signs(n: usize, signature: (usize, usize)) -> Result<Vec<f64>> {
    if signature.0 + signature.1 != n {
        return Err(GeomError::InvalidMetric(format!("signature {signature:?} does not sum to dimension {n}")));
    }
    Ok((0..n).map(|i| if i < signature.0 { 1.0 } else { -1.0 }).collect())
}

fn sig_tag(s: (usize, usize)) -> String {
    format!("{}{}", s.0, s.1)
}

/// `diag(weights)` with constant entries.
pub fn constant_metric(weights: &[f64], domain: DomainBox, label: &str) -> Result<ChartMetric> {
    let n = weights.len();
    ChartMetric::new(
        coords(n),
        matrix_of(n, |i, j| if i == j { num(weights[i]) } else { "0".into() }),
        domain,
        label,
    )
}

/// `((1+Q) q_ij − y_i y_j) / (1+Q)^2` with `q = diag(weights)`,
/// `Q = q(x,x)` and `y = q x`. Straight chart lines are its geodesics.
pub fn beltrami_metric(weights: &[f64], domain: DomainBox, label: &str) -> Result<ChartMetric> {
    let n = weights.len();
    let q_terms: Vec<String> = (0..n)
        .map(|i| {
            let w = weights[i];
            if w == 1.0 {
                format!("x{}^2", i + 1)
            } else if w == -1.0 {
                format!("-x{}^2", i + 1)
            } else {
                format!("{}*x{}^2", num(w), i + 1)
            }
        })
        .collect();
    let mut one_q = String::from("1");
    for t in &q_terms {
        if t.starts_with('-') {
            one_q.push_str(t);
        } else {
            one_q.push('+');
            one_q.push_str(t);
        }
    }
    let den = format!("({one_q})^2");
    let entry = |i: usize, j: usize| {
        if i == j {
            let wij = num(weights[i] * weights[j]);
            format!("(({one_q})*{} - {wij}*x{}^2)/{den}", num(weights[i]), i + 1)
        } else {
            format!("({}*x{}*x{})/{den}", num(-weights[i] * weights[j]), i + 1, j + 1)
        }
    };
    let q_min: f64 = (0..n)
        .filter(|&i| weights[i] < 0.0)
        .map(|i| weights[i] * domain.lo[i].abs().max(domain.hi[i].abs()).powi(2))
        .sum();
    if 1.0 + q_min <= 0.0 {
        return Err(GeomError::InvalidMetric("1 + Q must stay positive on the domain".into()));
    }
    ChartMetric::new(coords(n), matrix_of(n, entry), domain, label)
}

/// Flat metric `diag(±1)` with the given `(positive, negative)` counts.
pub fn flat(n: usize, signature: (usize, usize)) -> Result<CorpusEntry> {
    let s = signs(n, signature)?;
    let name = format!("flat{n}_{}", sig_tag(signature));
    Ok(CorpusEntry {
        g: constant_metric(&s, DomainBox::cube(n, 1.0), &name)?,
        gbar: None,
        name,
        truth: TruthFlags {
            equivalent: true,
            affine: true,
            kappa: Some(0.0),
            kappa_bar: None,
            mobility: MobilityTruth::Exact((n + 1) * (n + 2) / 2),
            bounded_emulation: false,
        },
    })
}

/// Flat `g = q` paired with the Beltrami-type metric built from the same
/// quadratic form. The domain keeps `1 + Q` positive.
pub fn beltrami_pair(n: usize, signature: (usize, usize)) -> Result<CorpusEntry> {
    let s = signs(n, signature)?;
    let half = if signature.1 == 0 {
        1.0
    } else {
        (0.64 / signature.1 as f64).sqrt().min(0.8)
    };
    let domain = DomainBox::cube(n, half);
    let name = format!("beltrami{n}_{}", sig_tag(signature));
    Ok(CorpusEntry {
        g: constant_metric(&s, domain.clone(), &format!("{name}_flat"))?,
        gbar: Some(beltrami_metric(&s, domain, &format!("{name}_curved"))?),
        name,
        truth: TruthFlags {
            equivalent: true,
            affine: false,
            kappa: Some(0.0),
            kappa_bar: Some(1.0),
            mobility: MobilityTruth::Exact((n + 1) * (n + 2) / 2),
            bounded_emulation: false,
        },
    })
}

/// The Beltrami sphere chart as base metric, paired with the flat metric.
pub fn sphere_flat_pair(n: usize) -> Result<CorpusEntry> {
    let e = beltrami_pair(n, (n, 0))?;
    let name = format!("sphere{n}_flat");
    Ok(CorpusEntry {
        g: e.gbar.expect("beltrami pair has a second metric").with_label(format!("{name}_sphere")),
        gbar: Some(e.g.with_label(format!("{name}_flat"))),
        name,
        truth: TruthFlags {
            kappa: Some(1.0),
            kappa_bar: Some(0.0),
            ..e.truth
        },
    })
}

/// `(g, c·g)` for a flat `g` of the given signature.
pub fn affine_pair(n: usize, signature: (usize, usize), c: f64) -> Result<CorpusEntry> {
    if !(c > 0.0) {
        return Err(GeomError::InvalidMetric("scale factor must be positive".into()));
    }
    let s = signs(n, signature)?;
    let sc: Vec<f64> = s.iter().map(|v| v * c).collect();
    let domain = DomainBox::cube(n, 1.0);
    let name = format!("affine{n}_{}_c{}", sig_tag(signature), num(c));
    Ok(CorpusEntry {
        g: constant_metric(&s, domain.clone(), &format!("{name}_g"))?,
        gbar: Some(constant_metric(&sc, domain, &format!("{name}_cg"))?),
        name,
        truth: TruthFlags {
            equivalent: true,
            affine: true,
            kappa: Some(0.0),
            kappa_bar: Some(0.0),
            mobility: MobilityTruth::Exact((n + 1) * (n + 2) / 2),
            bounded_emulation: false,
        },
    })
}

/// `g = diag(1, 1 + cos(x1)/5, −1)` and `ḡ = 2g`: periodic components on a
/// box, flagged as an emulation of a closed manifold.
pub fn affine_bounded() -> Result<CorpusEntry> {
    let name = "affine3_periodic".to_string();
    let domain = DomainBox::cube(3, 3.0);
    let g = ChartMetric::new(
        coords(3),
        matrix_of(3, |i, j| match (i, j) {
            (0, 0) => "1".into(),
            (1, 1) => "1+cos(x1)/5".into(),
            (2, 2) => "-1".into(),
            _ => "0".into(),
        }),
        domain.clone(),
        format!("{name}_g"),
    )?;
    let gbar = ChartMetric::new(
        coords(3),
        matrix_of(3, |i, j| match (i, j) {
            (0, 0) => "2".into(),
            (1, 1) => "2*(1+cos(x1)/5)".into(),
            (2, 2) => "-2".into(),
            _ => "0".into(),
        }),
        domain,
        format!("{name}_2g"),
    )?;
    Ok(CorpusEntry {
        name,
        g,
        gbar: Some(gbar),
        truth: TruthFlags {
            equivalent: true,
            affine: true,
            kappa: None,
            kappa_bar: None,
            mobility: MobilityTruth::Unknown,
            bounded_emulation: true,
        },
    })
}

/// `dx² + e^{2x} dy² + dz²` paired with the affinely equivalent
/// `½dx² + ½e^{2x}dy² + ¼dz²`.
pub fn warped3() -> Result<CorpusEntry> {
    let name = "warped3".to_string();
    let domain = DomainBox::cube(3, 1.0);
    let g = ChartMetric::new(
        coords(3),
        matrix_of(3, |i, j| match (i, j) {
            (0, 0) | (2, 2) => "1".into(),
            (1, 1) => "exp(2*x1)".into(),
            _ => "0".into(),
        }),
        domain.clone(),
        format!("{name}_g"),
    )?;
    let gbar = ChartMetric::new(
        coords(3),
        matrix_of(3, |i, j| match (i, j) {
            (0, 0) => "1/2".into(),
            (1, 1) => "exp(2*x1)/2".into(),
            (2, 2) => "1/4".into(),
            _ => "0".into(),
        }),
        domain,
        format!("{name}_gbar"),
    )?;
    Ok(CorpusEntry {
        name,
        g,
        gbar: Some(gbar),
        truth: TruthFlags {
            equivalent: true,
            affine: true,
            kappa: None,
            kappa_bar: None,
            mobility: MobilityTruth::AtMost(2),
            bounded_emulation: false,
        },
    })
}

/// Flat `g` with `ḡ = diag(1 + x2², 1 + x1², 1)`; not geodesically equivalent.
pub fn non_equivalent3() -> Result<CorpusEntry> {
    let name = "nonequiv3".to_string();
    let domain = DomainBox::cube(3, 1.0);
    let gbar = ChartMetric::new(
        coords(3),
        matrix_of(3, |i, j| match (i, j) {
            (0, 0) => "1+x2^2".into(),
            (1, 1) => "1+x1^2".into(),
            (2, 2) => "1".into(),
            _ => "0".into(),
        }),
        domain.clone(),
        format!("{name}_gbar"),
    )?;
    Ok(CorpusEntry {
        g: constant_metric(&[1.0, 1.0, 1.0], domain, &format!("{name}_g"))?,
        gbar: Some(gbar),
        name,
        truth: TruthFlags {
            equivalent: false,
            affine: false,
            kappa: Some(0.0),
            kappa_bar: None,
            mobility: MobilityTruth::Exact(10),
            bounded_emulation: false,
        },
    })
}

/// Every builtin entry.
pub fn all() -> Result<Vec<CorpusEntry>> {
    Ok(vec![
        flat(3, (3, 0))?,
        flat(3, (2, 1))?,
        flat(4, (4, 0))?,
        flat(4, (2, 2))?,
        beltrami_pair(3, (3, 0))?,
        beltrami_pair(3, (2, 1))?,
        beltrami_pair(4, (4, 0))?,
        sphere_flat_pair(3)?,
        affine_pair(3, (2, 1), 2.0)?,
        affine_bounded()?,
        warped3()?,
        non_equivalent3()?,
    ])
}

/// Entry by name, as listed by [`all`].
pub fn by_name(name: &str) -> Result<CorpusEntry> {
    all()?
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| GeomError::Precondition(format!("no corpus entry named `{name}`")))
}
