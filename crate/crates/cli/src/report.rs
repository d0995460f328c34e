//! Run reports and their JSON and CSV encodings.
//!
//! Floats are written in shortest round-trip scientific notation; non-finite
//! values become `null` in JSON and `NaN`/`inf` in CSV.

use std::io::Write;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::config::ScenarioConfig;

pub const CSV_HEADER: [&str; 7] = ["check_id", "anchor", "formula", "oracle", "residual", "tol", "pass"];

fn sci_string(x: f64) -> String {
    format!("{x:e}")
}

fn sci<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        RawValue::from_string(sci_string(*x))
            .map_err(serde::ser::Error::custom)?
            .serialize(s)
    } else {
        s.serialize_none()
    }
}

fn sci_opt<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => sci(v, s),
        None => s.serialize_none(),
    }
}

fn nan_if_null<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check_id: String,
    pub anchor: String,
    #[serde(serialize_with = "sci", deserialize_with = "nan_if_null")]
    pub formula: f64,
    #[serde(serialize_with = "sci", deserialize_with = "nan_if_null")]
    pub oracle: f64,
    #[serde(serialize_with = "sci", deserialize_with = "nan_if_null")]
    pub residual: f64,
    #[serde(serialize_with = "sci", deserialize_with = "nan_if_null")]
    pub tol: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckRecord {
    /// `pass` is set from `residual <= tol`; NaN residuals fail.
    pub fn new(check_id: String, anchor: &str, formula: f64, oracle: f64, residual: f64, tol: f64) -> Self {
        Self {
            check_id,
            anchor: anchor.to_string(),
            formula,
            oracle,
            residual,
            tol,
            pass: residual <= tol,
            note: None,
        }
    }

    /// A check that could not be evaluated.
    pub fn failed(check_id: String, anchor: &str, tol: f64, note: String) -> Self {
        Self {
            note: Some(note),
            ..Self::new(check_id, anchor, f64::NAN, f64::NAN, f64::NAN, tol)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub version: String,
    pub config: ScenarioConfig,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        serialize_with = "sci_opt"
    )]
    pub wall_time_s: Option<f64>,
    pub checks: Vec<CheckRecord>,
}

impl RunReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for c in &self.checks {
            w.write_record([
                c.check_id.clone(),
                c.anchor.clone(),
                sci_string(c.formula),
                sci_string(c.oracle),
                sci_string(c.residual),
                sci_string(c.tol),
                c.pass.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ScenarioConfig, ScenarioName};

    fn report(checks: Vec<CheckRecord>) -> RunReport {
        RunReport {
            scenario: "adjoints".into(),
            version: "0.0.0".into(),
            config: ScenarioConfig::defaults(ScenarioName::Adjoints),
            wall_time_s: None,
            checks,
        }
    }

    #[test]
    fn empty_report_is_valid_json() {
        let v: serde_json::Value = serde_json::from_str(&report(vec![]).to_json()).unwrap();
        assert_eq!(v["checks"].as_array().unwrap().len(), 0);
    }

    #[test]
    fn floats_round_trip_exactly() {
        let r = report(vec![CheckRecord::new("a/b".into(), "x", 0.1 + 0.2, 1.0 / 3.0, 1e-17, 1e-8)]);
        let json = r.to_json();
        assert!(json.contains("3.0000000000000004e-1"));
        assert_eq!(RunReport::from_json(&json).unwrap(), r);
    }

    #[test]
    fn nan_becomes_null_and_fails() {
        let c = CheckRecord::failed("a".into(), "x", 1.0, "boom".into());
        assert!(!c.pass);
        let json = report(vec![c]).to_json();
        assert!(json.contains("\"residual\": null"));
        assert!(RunReport::from_json(&json).unwrap().checks[0].residual.is_nan());
    }

    #[test]
    fn csv_rows() {
        let r = report(vec![
            CheckRecord::new("a".into(), "x", 1.0, 1.0, 0.0, 0.0),
            CheckRecord::new("b".into(), "y", 1.0, 2.0, 1.0, 0.5),
        ]);
        let text = r.to_csv();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("check_id,anchor,formula,oracle,residual,tol,pass"));
        assert!(!r.all_pass());
    }
}
