//! Machine-readable reports.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const TOOL: &str = "geoequiv";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Ambiguous,
    /// Recorded but not asserted.
    Info,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Falsified,
    Ambiguous,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Pass => 0,
            Status::Falsified => 1,
            Status::Ambiguous => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InputRecord {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

impl InputRecord {
    pub fn new(role: &str, path: &str, bytes: &[u8]) -> Self {
        InputRecord {
            role: role.to_string(),
            path: path.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
        }
    }
}

/// Min, max and mean of a sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Stats {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Stats {
        if values.is_empty() {
            return Stats {
                count: 0,
                min: 0.0,
                max: 0.0,
                mean: 0.0,
            };
        }
        Stats {
            count: values.len(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: values.iter().sum::<f64>() / values.len() as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    /// Library operation the check runs.
    pub anchor: String,
    /// Points or geodesics used.
    pub samples: usize,
    pub tolerance: Option<f64>,
    pub statistics: BTreeMap<String, Value>,
    pub verdict: Verdict,
    pub witnesses: Vec<Value>,
}

impl Check {
    pub fn new(name: &str, anchor: &str, samples: usize) -> Self {
        Check {
            name: name.to_string(),
            anchor: anchor.to_string(),
            samples,
            tolerance: None,
            statistics: BTreeMap::new(),
            verdict: Verdict::Info,
            witnesses: Vec::new(),
        }
    }

    pub fn stat(mut self, key: &str, value: impl Serialize) -> Self {
        self.statistics.insert(key.to_string(), serde_json::to_value(value).expect("statistic serializes"));
        self
    }

    pub fn witness(mut self, value: impl Serialize) -> Self {
        self.witnesses.push(serde_json::to_value(value).expect("witness serializes"));
        self
    }

    /// Asserts `value < tol`.
    pub fn below(mut self, value: f64, tol: f64) -> Self {
        self.tolerance = Some(tol);
        self.verdict = if value < tol { Verdict::Pass } else { Verdict::Fail };
        self
    }

    pub fn asserting(mut self, ok: bool) -> Self {
        self.verdict = if ok { Verdict::Pass } else { Verdict::Fail };
        self
    }

    pub fn with_verdict(mut self, v: Verdict) -> Self {
        self.verdict = v;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub inputs: Vec<InputRecord>,
    pub seed: Option<u64>,
    pub parameters: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub status: Status,
}

impl Report {
    pub fn new(command: &str, inputs: Vec<InputRecord>, seed: Option<u64>) -> Self {
        Report {
            tool: TOOL.to_string(),
            version: VERSION.to_string(),
            command: command.to_string(),
            inputs,
            seed,
            parameters: BTreeMap::new(),
            checks: Vec::new(),
            status: Status::Pass,
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        self.parameters.insert(key.to_string(), serde_json::to_value(value).expect("parameter serializes"));
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
        self.status = self.overall();
    }

    fn overall(&self) -> Status {
        if self.checks.iter().any(|c| c.verdict == Verdict::Fail) {
            Status::Falsified
        } else if self.checks.iter().any(|c| c.verdict == Verdict::Ambiguous) {
            Status::Ambiguous
        } else {
            Status::Pass
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_follows_worst_verdict() {
        let mut r = Report::new("t", vec![], Some(1));
        r.push(Check::new("a", "x", 1).below(1.0, 2.0));
        assert_eq!(r.status, Status::Pass);
        r.push(Check::new("b", "x", 1).with_verdict(Verdict::Ambiguous));
        assert_eq!(r.status.exit_code(), 3);
        r.push(Check::new("c", "x", 1).below(3.0, 2.0));
        assert_eq!(r.status.exit_code(), 1);
    }

    #[test]
    fn hashes_inputs() {
        let rec = InputRecord::new("g", "p", b"abc");
        assert_eq!(rec.sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
