use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{Format, Resolved};
use crate::InputError;

pub const TOOL: &str = "cartan-dual";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A scalar compared against its tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, tol: f64) -> Self {
        // NaN never passes
        Self { name: name.to_string(), value, tol, pass: value.abs() <= tol }
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub results: Map<String, Value>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new() -> Self {
        Self { results: Map::new(), checks: Vec::new() }
    }

    pub fn put(&mut self, key: &str, value: impl Serialize) {
        self.results.insert(key.to_string(), serde_json::to_value(value).expect("result serializes"));
    }

    pub fn check(&mut self, name: &str, value: f64, tol: f64) {
        self.checks.push(Check::at_most(name, value, tol));
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self, config: &Resolved) -> Value {
        json!({
            "tool": TOOL,
            "version": VERSION,
            "command": config.command.to_string(),
            "config": config.to_json(),
            "results": Value::Object(self.results.clone()),
            "checks": self.checks,
            "status": if self.passed() { "pass" } else { "fail" },
        })
    }

    pub fn render(&self, config: &Resolved) -> String {
        match config.format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.to_json(config)).expect("report serializes");
                s.push('\n');
                s
            }
            Format::Csv => {
                let mut rows = flatten_scalars(&Value::Object(self.results.clone()));
                for c in &self.checks {
                    rows.push((format!("check.{}.value", c.name), json!(c.value)));
                    rows.push((format!("check.{}.tol", c.name), json!(c.tol)));
                    rows.push((format!("check.{}.pass", c.name), json!(c.pass)));
                }
                emit_csv(&config.to_json().to_string(), &rows)
            }
        }
    }
}

/// CSV with columns `tool,version,config,key,value`; one row per scalar.
pub fn emit_csv(config: &str, rows: &[(String, Value)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["tool", "version", "config", "key", "value"]).expect("in-memory write");
    for (key, value) in rows {
        let v = match value {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        w.write_record([TOOL, VERSION, config, key, &v]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

/// Leaves of a JSON tree in key order, with paths like `a.b[2][0]`.
pub fn flatten_scalars(v: &Value) -> Vec<(String, Value)> {
    let mut out = Vec::new();
    walk(v, String::new(), &mut out);
    out
}

fn walk(v: &Value, path: String, out: &mut Vec<(String, Value)>) {
    match v {
        Value::Object(m) => {
            for (k, child) in m {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                walk(child, p, out);
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                walk(child, format!("{path}[{i}]"), out);
            }
        }
        leaf => out.push((path, leaf.clone())),
    }
}

pub fn write_output(path: Option<&Path>, text: &str) -> Result<(), InputError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| InputError(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| InputError(format!("cannot write report: {e}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_results_give_header_only_csv() {
        assert_eq!(emit_csv("{}", &[]), "tool,version,config,key,value\n");
    }

    #[test]
    fn one_scalar_one_row() {
        let rows = flatten_scalars(&json!({ "defect": 1.5e-9 }));
        let csv = emit_csv("{}", &rows);
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.lines().nth(1).unwrap().ends_with(",defect,1.5e-9"));
    }

    #[test]
    fn flatten_paths() {
        let rows = flatten_scalars(&json!({ "b": [[1, 2]], "a": { "x": true } }));
        let keys: Vec<_> = rows.iter().map(|(k, _)| k.as_str()).collect();
        assert_eq!(keys, ["a.x", "b[0][0]", "b[0][1]"]);
    }

    #[test]
    fn nan_check_fails() {
        assert!(!Check::at_most("x", f64::NAN, 1.0).pass);
        assert!(Check::at_most("x", -0.5, 1.0).pass);
    }
}
