//! Row-oriented output table with CSV and JSON emission.
//!
//! Values are formatted with Rust's shortest-roundtrip float notation and a
//! '.' decimal separator, independent of locale, so a fixed seed reproduces
//! byte-identical files.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(i128),
    Str(String),
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Num(v)
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v as i128)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i128)
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Int(v as i128)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Str(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Str(v)
    }
}

fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    /// Number of rows whose `status` column (if present) is not "ok".
    pub fn failed_rows(&self) -> usize {
        let Some(idx) = self.columns.iter().position(|c| c == "status") else {
            return 0;
        };
        self.rows
            .iter()
            .filter(|r| !matches!(&r[idx], Value::Str(s) if s == "ok"))
            .count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(',');
                }
                first = false;
                match v {
                    Value::Num(x) => out.push_str(&fmt_num(*x)),
                    Value::Int(i) => {
                        let _ = write!(out, "{i}");
                    }
                    Value::Str(s) => {
                        if s.contains(',') || s.contains('"') || s.contains('\n') {
                            let _ = write!(out, "\"{}\"", s.replace('"', "\"\""));
                        } else {
                            out.push_str(s);
                        }
                    }
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut out = String::from("[\n");
        for (i, row) in self.rows.iter().enumerate() {
            out.push_str("  {");
            for (j, (col, v)) in self.columns.iter().zip(row).enumerate() {
                if j > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "\"{col}\": ");
                match v {
                    Value::Num(x) => {
                        if x.is_finite() {
                            out.push_str(&fmt_num(*x));
                        } else {
                            let _ = write!(out, "\"{}\"", fmt_num(*x));
                        }
                    }
                    Value::Int(n) => {
                        let _ = write!(out, "{n}");
                    }
                    Value::Str(s) => {
                        let _ = write!(out, "\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""));
                    }
                }
            }
            out.push_str(if i + 1 < self.rows.len() {
                "},\n"
            } else {
                "}\n"
            });
        }
        out.push_str("]\n");
        out
    }
}
