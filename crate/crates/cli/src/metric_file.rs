//! The JSON metric file format.

use std::path::Path;

use geoequiv::tensor::{ChartMetric, DomainBox};
use geoequiv::GeomError;
use serde::{Deserialize, Serialize};
use serde_path_to_error::Segment;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricFile {
    pub dim: usize,
    pub coords: Vec<String>,
    pub metric: Vec<Vec<String>>,
    pub domain: DomainSpec,
    #[serde(default)]
    pub label: String,
}

/// A metric file problem located by a JSON pointer.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{source_name}: {message} (at `{pointer}`)")]
pub struct MetricFileError {
    pub source_name: String,
    pub pointer: String,
    pub message: String,
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => out.push_str("/?"),
        }
    }
    out
}

impl MetricFile {
    pub fn parse(text: &str, source_name: &str) -> Result<MetricFile, MetricFileError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| MetricFileError {
            source_name: source_name.to_string(),
            pointer: pointer_of(e.path()),
            message: e.inner().to_string(),
        })
    }

    pub fn from_metric(metric: &ChartMetric) -> MetricFile {
        MetricFile {
            dim: metric.dim(),
            coords: metric.coords().to_vec(),
            metric: metric.source_rows(),
            domain: DomainSpec {
                lo: metric.domain().lo.clone(),
                hi: metric.domain().hi.clone(),
            },
            label: metric.label().to_string(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("metric file serializes");
        s.push('\n');
        s
    }

    /// Structural checks with pointers, then construction of the metric.
    pub fn to_metric(&self, source_name: &str) -> Result<ChartMetric, MetricFileError> {
        let err = |pointer: String, message: String| MetricFileError {
            source_name: source_name.to_string(),
            pointer,
            message,
        };
        let n = self.dim;
        if n < 2 {
            return Err(err("/dim".into(), format!("dimension must be at least 2, got {n}")));
        }
        if self.coords.len() != n {
            return Err(err("/coords".into(), format!("expected {n} coordinate names, got {}", self.coords.len())));
        }
        if self.metric.len() != n {
            return Err(err("/metric".into(), format!("expected {n} rows, got {}", self.metric.len())));
        }
        for (i, row) in self.metric.iter().enumerate() {
            if row.len() != n {
                return Err(err(format!("/metric/{i}"), format!("expected {n} entries, got {}", row.len())));
            }
        }
        for (key, v) in [("lo", &self.domain.lo), ("hi", &self.domain.hi)] {
            if v.len() != n {
                return Err(err(format!("/domain/{key}"), format!("expected {n} bounds, got {}", v.len())));
            }
        }
        for i in 0..n {
            if !(self.domain.lo[i] < self.domain.hi[i]) {
                return Err(err(format!("/domain/lo/{i}"), format!("lower bound {} is not below upper bound {}", self.domain.lo[i], self.domain.hi[i])));
            }
        }
        for (i, row) in self.metric.iter().enumerate() {
            for (j, src) in row.iter().enumerate() {
                geoequiv::expr::Expression::parse_with_names(src, &self.coords).map_err(|e| err(format!("/metric/{i}/{j}"), e.to_string()))?;
                let strip = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
                if strip(src) != strip(&self.metric[j][i]) {
                    return Err(err(format!("/metric/{i}/{j}"), format!("not symmetric: `{src}` vs `{}` at /metric/{j}/{i}", self.metric[j][i])));
                }
            }
        }
        let domain = DomainBox::new(self.domain.lo.clone(), self.domain.hi.clone()).map_err(|e| err("/domain".into(), e.to_string()))?;
        ChartMetric::new(self.coords.clone(), self.metric.clone(), domain, self.label.clone()).map_err(|e| {
            let pointer = match e {
                GeomError::VariableOutOfRange { .. } | GeomError::UnknownIdentifier { .. } => "/coords",
                _ => "",
            };
            err(pointer.into(), e.to_string())
        })
    }
}

/// Reads, parses and validates a metric file.
pub fn load(path: &Path) -> Result<(ChartMetric, Vec<u8>), MetricFileError> {
    let name = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|e| MetricFileError {
        source_name: name.clone(),
        pointer: String::new(),
        message: e.to_string(),
    })?;
    let text = std::str::from_utf8(&bytes).map_err(|e| MetricFileError {
        source_name: name.clone(),
        pointer: String::new(),
        message: e.to_string(),
    })?;
    let metric = MetricFile::parse(text, &name)?.to_metric(&name)?;
    Ok((metric, bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLAT: &str = r#"{"dim": 2, "coords": ["x", "y"], "metric": [["1", "0"], ["0", "1"]], "domain": {"lo": [-1, -1], "hi": [1, 1]}, "label": "plane"}"#;

    #[test]
    fn parses_and_round_trips() {
        let f = MetricFile::parse(FLAT, "t").unwrap();
        let m = f.to_metric("t").unwrap();
        assert_eq!(MetricFile::from_metric(&m), f);
        let again = MetricFile::parse(&f.to_json(), "t").unwrap();
        assert_eq!(again, f);
    }

    #[test]
    fn pointers_locate_errors() {
        let bad = FLAT.replace(r#"["0", "1"]]"#, r#"["0", 1]]"#);
        assert_eq!(MetricFile::parse(&bad, "t").unwrap_err().pointer, "/metric/1/1");
        let bad = FLAT.replace(r#""label""#, r#""lable""#);
        assert_eq!(MetricFile::parse(&bad, "t").unwrap_err().pointer, "/lable");
        let bad = FLAT.replace(r#"["0", "1"]]"#, r#"["0", "1+"]]"#);
        let f = MetricFile::parse(&bad, "t").unwrap();
        assert_eq!(f.to_metric("t").unwrap_err().pointer, "/metric/1/1");
        let bad = FLAT.replace(r#"["0", "1"]]"#, r#"["x", "1"]]"#);
        let f = MetricFile::parse(&bad, "t").unwrap();
        assert_eq!(f.to_metric("t").unwrap_err().pointer, "/metric/0/1");
        let bad = FLAT.replace(r#""hi": [1, 1]"#, r#""hi": [1]"#);
        let f = MetricFile::parse(&bad, "t").unwrap();
        assert_eq!(f.to_metric("t").unwrap_err().pointer, "/domain/hi");
        let bad = FLAT.replace(r#""dim": 2"#, r#""dim": 3"#);
        let f = MetricFile::parse(&bad, "t").unwrap();
        assert_eq!(f.to_metric("t").unwrap_err().pointer, "/coords");
    }
}
