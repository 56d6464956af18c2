//! Machine-readable reports and their text rendering.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Violation,
}

impl Status {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Status::Pass
        } else {
            Status::Violation
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Violation => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub inputs_digest: String,
    pub status: Status,
    pub records: Value,
}

impl Report {
    pub fn new<T: Serialize>(command: &str, inputs: &[&str], status: Status, records: &T) -> Self {
        Report {
            command: command.to_owned(),
            inputs_digest: digest(inputs),
            status,
            records: serde_json::to_value(records).expect("records serialize"),
        }
    }
}

/// SHA-256 over the parts, each terminated by a NUL byte.
pub fn digest(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part.as_bytes());
        hasher.update([0u8]);
    }
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Table,
}

pub fn emit_report(report: &Report, format: Format) -> String {
    match format {
        Format::Json => {
            let mut out = serde_json::to_string_pretty(report).expect("report serializes");
            out.push('\n');
            out
        }
        Format::Table => {
            let mut out = format!(
                "command: {}\nstatus: {}\ninputs: {}\n",
                report.command,
                match report.status {
                    Status::Pass => "pass",
                    Status::Violation => "violation",
                },
                report.inputs_digest
            );
            out.push_str(&table(&report.records));
            out
        }
    }
}

fn cell(value: &Value) -> String {
    match value {
        Value::Null => "-".into(),
        Value::String(s) => s.clone(),
        Value::Array(items) if items.iter().all(|v| !v.is_object() && !v.is_array()) => {
            let parts: Vec<String> = items.iter().map(cell).collect();
            format!("{{{}}}", parts.join(","))
        }
        other => other.to_string(),
    }
}

/// Arrays of objects become one row per element; objects become key/value rows.
fn table(records: &Value) -> String {
    let (header, rows): (Vec<String>, Vec<Vec<String>>) = match records {
        Value::Array(items) if items.iter().all(Value::is_object) => {
            let mut header: Vec<String> = Vec::new();
            for item in items {
                for key in item.as_object().expect("checked").keys() {
                    if !header.contains(key) {
                        header.push(key.clone());
                    }
                }
            }
            let rows = items
                .iter()
                .map(|item| header.iter().map(|k| item.get(k).map_or("-".into(), cell)).collect())
                .collect();
            (header, rows)
        }
        Value::Object(map) => (
            vec!["field".into(), "value".into()],
            map.iter().map(|(k, v)| vec![k.clone(), cell(v)]).collect(),
        ),
        Value::Array(items) => (vec!["value".into()], items.iter().map(|v| vec![cell(v)]).collect()),
        other => (vec!["value".into()], vec![vec![cell(other)]]),
    };
    if rows.is_empty() {
        return "(no records)\n".into();
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            rows.iter()
                .map(|r| r[c].chars().count())
                .chain([header[c].chars().count()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        format!("{}\n", padded.join("  ").trim_end())
    };
    let mut out = line(&header);
    out.push_str(&line(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>()));
    for row in &rows {
        out.push_str(&line(row));
    }
    out
}
