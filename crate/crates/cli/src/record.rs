use std::fs::OpenOptions;
use std::io::{self, BufRead, Write};
use std::path::Path;

use perpetua::stats::{CurvePoint, EstimateReport};
use serde::{Deserialize, Serialize};

use crate::scenario::Scenario;
use crate::{CliError, CliResult, VERSION};

/// One JSONL line: an estimate, a check, or both.
///
/// `pass` is `None` for informational records. Non-finite numbers are
/// written as `null`, and curves keep only fully finite points, so every
/// record parses back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub experiment: String,
    pub law: String,
    pub seed: u64,
    pub n: u64,
    pub estimate: Option<f64>,
    pub ci: Option<(f64, f64)>,
    pub pass: Option<bool>,
    pub elapsed_ms: Option<u64>,
    pub version: String,
    pub tag: String,
    pub param: Option<f64>,
    pub detail: serde_json::Value,
    pub curve: Option<Vec<CurvePoint>>,
}

pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl Record {
    pub fn new(sc: &Scenario, tag: &str) -> Self {
        Record {
            experiment: sc.experiment.to_string(),
            law: sc.law.id().to_string(),
            seed: sc.seed,
            n: 0,
            estimate: None,
            ci: None,
            pass: None,
            elapsed_ms: None,
            version: VERSION.to_string(),
            tag: tag.to_string(),
            param: None,
            detail: serde_json::Value::Null,
            curve: None,
        }
    }

    pub fn with_estimate(mut self, e: &EstimateReport) -> Self {
        self.n = e.n;
        self.estimate = finite(e.estimate);
        self.ci = match (finite(e.ci.0), finite(e.ci.1)) {
            (Some(lo), Some(hi)) => Some((lo, hi)),
            _ => None,
        };
        self
    }

    pub fn with_value(mut self, n: u64, estimate: f64) -> Self {
        self.n = n;
        self.estimate = finite(estimate);
        self
    }

    pub fn with_pass(mut self, pass: bool) -> Self {
        self.pass = Some(pass);
        self
    }

    pub fn with_param(mut self, p: f64) -> Self {
        self.param = finite(p);
        self
    }

    pub fn with_detail<T: Serialize>(mut self, d: &T) -> Self {
        self.detail = serde_json::to_value(d).unwrap_or(serde_json::Value::Null);
        self
    }

    pub fn with_curve(mut self, points: &[CurvePoint]) -> Self {
        let kept: Vec<CurvePoint> = points
            .iter()
            .filter(|p| [p.t, p.estimate, p.lo, p.hi].iter().all(|v| v.is_finite()))
            .copied()
            .collect();
        self.curve = Some(kept);
        self
    }

    pub fn failed(&self) -> bool {
        self.pass == Some(false)
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records always serialize")
    }
}

/// Appends records to `out`, or writes them to stdout when `out` is `None`.
pub fn write_records(records: &[Record], out: Option<&Path>) -> CliResult<()> {
    let mut buf = String::new();
    for r in records {
        buf.push_str(&r.to_line());
        buf.push('\n');
    }
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            f.write_all(buf.as_bytes())?;
        }
        None => io::stdout().lock().write_all(buf.as_bytes())?,
    }
    Ok(())
}

/// Parses JSONL; blank lines are skipped, anything else malformed is a
/// configuration error naming the line.
pub fn read_records(path: &Path) -> CliResult<Vec<Record>> {
    let f = std::fs::File::open(path)
        .map_err(|e| CliError::Config(format!("cannot open results {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in io::BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: Record = serde_json::from_str(&line)
            .map_err(|e| CliError::Config(format!("{}:{}: malformed record: {e}", path.display(), i + 1)))?;
        out.push(r);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioFile;

    fn scenario() -> Scenario {
        Scenario::resolve(
            ScenarioFile {
                law: Some("uniform:q=1".into()),
                experiment: Some("perp-moment".into()),
                threads: Some(1),
                ..Default::default()
            },
            false,
        )
        .unwrap()
    }

    #[test]
    fn non_finite_values_become_null_and_round_trip() {
        let e = EstimateReport::from_values(&[1.0, f64::INFINITY], 0.99, 1, "x", "t");
        let r = Record::new(&scenario(), "t")
            .with_estimate(&e)
            .with_param(f64::NAN)
            .with_detail(&serde_json::json!({ "ratio": f64::INFINITY }))
            .with_curve(&[
                CurvePoint { t: 1.0, estimate: 0.5, lo: 0.4, hi: 0.6 },
                CurvePoint { t: 2.0, estimate: f64::NAN, lo: 0.0, hi: 1.0 },
            ]);
        let line = r.to_line();
        assert!(!line.contains("NaN") && !line.contains("inf"));
        let back: Record = serde_json::from_str(&line).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.curve.unwrap().len(), 1);
        assert_eq!(back.estimate, None);
    }

    #[test]
    fn read_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.jsonl");
        std::fs::write(&p, "{\"experiment\": 1}\n").unwrap();
        assert_eq!(read_records(&p).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn append_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.jsonl");
        let r = Record::new(&scenario(), "a").with_value(3, 1.5).with_pass(true);
        write_records(std::slice::from_ref(&r), Some(&p)).unwrap();
        write_records(std::slice::from_ref(&r), Some(&p)).unwrap();
        assert_eq!(read_records(&p).unwrap(), vec![r.clone(), r]);
    }
}
