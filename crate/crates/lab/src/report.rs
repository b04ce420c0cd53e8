//! Report rows and their CSV and JSON encodings.
//!
//! Both encodings carry the same seven keys. Numbers are written with 17
//! significant digits so that every value parses back to the same `f64`;
//! absent or non-finite numbers become an empty CSV field or JSON `null`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::config::Format;
use crate::LabError;

pub const HEADER: [&str; 7] = ["experiment", "param_json", "measured", "bound", "stderr", "error_budget", "pass"];

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub experiment: String,
    /// Parameters of the row as a JSON object, stored as text.
    pub param_json: String,
    pub measured: f64,
    pub bound: Option<f64>,
    pub stderr: Option<f64>,
    pub error_budget: Option<f64>,
    pub pass: bool,
}

impl ReportRow {
    pub fn new(experiment: impl Into<String>, params: serde_json::Value, measured: f64) -> Self {
        Self {
            experiment: experiment.into(),
            param_json: params.to_string(),
            measured,
            bound: None,
            stderr: None,
            error_budget: None,
            pass: true,
        }
    }

    pub fn bound(mut self, b: f64) -> Self {
        self.bound = Some(b);
        self
    }

    pub fn stderr(mut self, s: f64) -> Self {
        self.stderr = Some(s);
        self
    }

    pub fn error_budget(mut self, e: f64) -> Self {
        self.error_budget = Some(e);
        self
    }

    pub fn pass(mut self, p: bool) -> Self {
        self.pass = p;
        self
    }

    pub fn params(&self) -> serde_json::Value {
        serde_json::from_str(&self.param_json).unwrap_or(serde_json::Value::Null)
    }
}

fn number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        String::new()
    }
}

fn optional(v: Option<f64>) -> String {
    v.map(number).unwrap_or_default()
}

fn csv_error(path: &str) -> impl Fn(csv::Error) -> LabError + '_ {
    move |e| LabError::Format(format!("{path}: {e}"))
}

pub fn to_csv(rows: &[ReportRow]) -> Result<String, LabError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = csv_error("csv");
    w.write_record(HEADER).map_err(&err)?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.param_json.clone(),
            number(r.measured),
            optional(r.bound),
            optional(r.stderr),
            optional(r.error_budget),
            r.pass.to_string(),
        ])
        .map_err(&err)?;
    }
    let bytes = w.into_inner().map_err(|e| LabError::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Serialize)]
struct JsonRow<'a> {
    experiment: &'a str,
    param_json: &'a str,
    measured: Box<RawValue>,
    bound: Box<RawValue>,
    stderr: Box<RawValue>,
    error_budget: Box<RawValue>,
    pass: bool,
}

fn raw(v: Option<f64>) -> Box<RawValue> {
    let text = match v {
        Some(x) if x.is_finite() => number(x),
        _ => "null".into(),
    };
    RawValue::from_string(text).expect("formatted number is valid JSON")
}

pub fn to_json(rows: &[ReportRow]) -> String {
    let out: Vec<JsonRow> = rows
        .iter()
        .map(|r| JsonRow {
            experiment: &r.experiment,
            param_json: &r.param_json,
            measured: raw(Some(r.measured)),
            bound: raw(r.bound),
            stderr: raw(r.stderr),
            error_budget: raw(r.error_budget),
            pass: r.pass,
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&out).expect("rows serialize");
    s.push('\n');
    s
}

pub fn render(rows: &[ReportRow], format: Format) -> Result<String, LabError> {
    match format {
        Format::Csv => to_csv(rows),
        Format::Json => Ok(to_json(rows)),
    }
}

/// Writes `rows` to `path`, creating or truncating it.
pub fn emit_report(rows: &[ReportRow], path: &Path, format: Format) -> Result<(), LabError> {
    let text = render(rows, format)?;
    std::fs::write(path, text).map_err(|source| LabError::Io { path: path.display().to_string(), source })
}

fn parse_number(field: &str) -> Result<Option<f64>, LabError> {
    if field.is_empty() {
        return Ok(None);
    }
    field.parse().map(Some).map_err(|_| LabError::Format(format!("bad number `{field}`")))
}

pub fn parse_csv(text: &str) -> Result<Vec<ReportRow>, LabError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let err = csv_error("csv");
    let header = r.headers().map_err(&err)?.clone();
    if header.iter().ne(HEADER) {
        return Err(LabError::Format(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(&err)?;
        rows.push(ReportRow {
            experiment: rec[0].to_string(),
            param_json: rec[1].to_string(),
            measured: parse_number(&rec[2])?.unwrap_or(f64::NAN),
            bound: parse_number(&rec[3])?,
            stderr: parse_number(&rec[4])?,
            error_budget: parse_number(&rec[5])?,
            pass: rec[6].parse().map_err(|_| LabError::Format(format!("bad flag `{}`", &rec[6])))?,
        });
    }
    Ok(rows)
}

#[derive(Deserialize)]
struct OwnedJsonRow {
    experiment: String,
    param_json: String,
    measured: Option<f64>,
    bound: Option<f64>,
    stderr: Option<f64>,
    error_budget: Option<f64>,
    pass: bool,
}

pub fn parse_json(text: &str) -> Result<Vec<ReportRow>, LabError> {
    let rows: Vec<OwnedJsonRow> = serde_json::from_str(text).map_err(|e| LabError::Format(format!("json: {e}")))?;
    Ok(rows
        .into_iter()
        .map(|r| ReportRow {
            experiment: r.experiment,
            param_json: r.param_json,
            measured: r.measured.unwrap_or(f64::NAN),
            bound: r.bound,
            stderr: r.stderr,
            error_budget: r.error_budget,
            pass: r.pass,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde_json::json;

    fn same(a: &ReportRow, b: &ReportRow) -> bool {
        let eq = |x: f64, y: f64| x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan());
        a.experiment == b.experiment
            && a.param_json == b.param_json
            && eq(a.measured, b.measured)
            && a.bound == b.bound
            && a.stderr == b.stderr
            && a.error_budget == b.error_budget
            && a.pass == b.pass
    }

    #[test]
    fn empty_report_is_header_only() {
        assert_eq!(to_csv(&[]).unwrap(), "experiment,param_json,measured,bound,stderr,error_budget,pass\n");
        assert!(parse_json(&to_json(&[])).unwrap().is_empty());
    }

    #[test]
    fn one_row_round_trips() {
        let row = ReportRow::new("korovkin", json!({"n": 10, "label": "a,b"}), 0.1).bound(1e-12).pass(false);
        let csv = to_csv(std::slice::from_ref(&row)).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.contains("1.0000000000000001e-1"));
        let back = parse_csv(&csv).unwrap();
        assert!(same(&back[0], &row));
        let back = parse_json(&to_json(std::slice::from_ref(&row))).unwrap();
        assert!(same(&back[0], &row));
    }

    #[test]
    fn non_finite_values_are_blank() {
        let row = ReportRow::new("x", json!({}), f64::NAN).stderr(f64::INFINITY);
        let csv = to_csv(std::slice::from_ref(&row)).unwrap();
        assert_eq!(csv.lines().nth(1), Some("x,{},,,,,true"));
        let j = to_json(&[row]);
        assert!(j.contains("\"measured\": null") && j.contains("\"stderr\": null"));
    }

    proptest! {
        #[test]
        fn csv_and_json_agree(vals in proptest::collection::vec((any::<f64>(), proptest::option::of(-1e300f64..1e300), any::<bool>()), 0..12)) {
            let rows: Vec<ReportRow> = vals
                .iter()
                .enumerate()
                .map(|(i, &(m, b, p))| {
                    let mut r = ReportRow::new(format!("e{i}"), json!({"i": i}), if m.is_finite() { m } else { f64::NAN });
                    r.bound = b;
                    r.pass = p;
                    r
                })
                .collect();
            let a = parse_csv(&to_csv(&rows).unwrap()).unwrap();
            let b = parse_json(&to_json(&rows)).unwrap();
            prop_assert_eq!(a.len(), rows.len());
            for ((x, y), r) in a.iter().zip(&b).zip(&rows) {
                prop_assert!(same(x, y));
                prop_assert!(same(x, r));
            }
        }
    }
}
