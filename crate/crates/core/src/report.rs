//! Serialization of results: canonical JSON, CSV and aligned text tables.
//!
//! JSON output sorts object keys and prints every real with 17 significant
//! digits, so a result serialized twice yields identical bytes.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

/// A real with 17 significant digits, positional when the exponent is
/// moderate, scientific otherwise. Trailing zeros are trimmed but a decimal
/// point is always kept so the value reads back as a float.
pub fn format_real(v: f64) -> String {
    if !v.is_finite() {
        // JSON has no representation for these; callers keep them out of reports.
        return if v.is_nan() { "NaN".into() } else if v > 0.0 { "Infinity".into() } else { "-Infinity".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0.0".into() } else { "0.0".into() };
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    if (-5..17).contains(&exp) {
        let mut s = String::from(sign);
        if exp < 0 {
            s.push_str("0.");
            s.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
            s.push_str(digits);
        } else {
            let int_len = exp as usize + 1;
            if digits.len() > int_len {
                s.push_str(&digits[..int_len]);
                s.push('.');
                s.push_str(&digits[int_len..]);
            } else {
                s.push_str(digits);
                s.extend(std::iter::repeat_n('0', int_len - digits.len()));
                s.push_str(".0");
            }
        }
        s
    } else {
        let (head, tail) = digits.split_at(1);
        let tail = if tail.is_empty() { "0" } else { tail };
        format!("{sign}{head}.{tail}e{exp}")
    }
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    const STEP: usize = 2;
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_real(n.as_f64().expect("f64 number")));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) => {
            // short arrays of scalars stay on one line
            if items.len() <= 16 && items.iter().all(|i| !i.is_array() && !i.is_object()) {
                out.push('[');
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, item, indent);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (k, item) in items.iter().enumerate() {
                out.extend(std::iter::repeat_n(' ', indent + STEP));
                write_value(out, item, indent + STEP);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.extend(std::iter::repeat_n(' ', indent));
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (k, key) in keys.iter().enumerate() {
                out.extend(std::iter::repeat_n(' ', indent + STEP));
                out.push_str(&serde_json::to_string(key).expect("key serializes"));
                out.push_str(": ");
                write_value(out, &map[key.as_str()], indent + STEP);
                out.push_str(if k + 1 < keys.len() { ",\n" } else { "\n" });
            }
            out.extend(std::iter::repeat_n(' ', indent));
            out.push('}');
        }
    }
}

/// Canonical pretty JSON for a value tree, newline-terminated.
pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

pub fn to_canonical_json<T: Serialize>(v: &T) -> Result<String> {
    let value = serde_json::to_value(v).map_err(|e| Error::Data(format!("cannot serialize report: {e}")))?;
    Ok(canonical_json(&value))
}

/// A rectangular result rendered as CSV or as an aligned text table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Table {
            headers: headers.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.headers).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    /// Columns padded to their widest cell; numeric-looking cells right-aligned.
    pub fn to_human(&self) -> String {
        let widths: Vec<usize> = (0..self.headers.len())
            .map(|c| {
                self.rows
                    .iter()
                    .map(|r| r[c].chars().count())
                    .chain([self.headers[c].chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let numeric = |s: &str| s.parse::<f64>().is_ok();
        let mut out = String::new();
        let line = |out: &mut String, cells: &[String], header: bool| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, &w)| {
                    if !header && numeric(c) {
                        format!("{c:>w$}")
                    } else {
                        format!("{c:<w$}")
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&mut out, &self.headers, true);
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        let _ = writeln!(out, "{}", rule.join("  "));
        for r in &self.rows {
            line(&mut out, r, false);
        }
        out
    }
}

/// Cell text for an optional real (empty when absent).
pub fn cell(v: Option<f64>) -> String {
    v.map(format_real).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn reals_keep_17_digits() {
        assert_eq!(format_real(0.1), "0.10000000000000001");
        assert_eq!(format_real(1.0), "1.0");
        assert_eq!(format_real(-2.5), "-2.5");
        assert_eq!(format_real(1e-7), "9.9999999999999995e-8");
        assert_eq!(format_real(123456.0), "123456.0");
        assert_eq!(format_real(1e20), "1.0e20");
        assert_eq!(format_real(0.00012), "0.00012");
        for v in [0.1, 1.0 / 3.0, 5.529, 1e-300, -7.25e17, std::f64::consts::PI, 0.003968253968253968] {
            assert_eq!(format_real(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn json_is_sorted_and_stable() {
        let v = json!({"zeta": 1, "alpha": [0.5, 2], "mid": {"b": null, "a": "x\"y"}});
        let s = canonical_json(&v);
        assert_eq!(
            s,
            "{\n  \"alpha\": [0.5, 2],\n  \"mid\": {\n    \"a\": \"x\\\"y\",\n    \"b\": null\n  },\n  \"zeta\": 1\n}\n"
        );
        assert_eq!(serde_json::from_str::<Value>(&s).unwrap(), v);
        assert_eq!(canonical_json(&v), s);
    }

    #[test]
    fn tables_render() {
        let mut t = Table::new(["lambda", "x", "y"]);
        t.push(vec![String::new(), "0.0".into(), "1.0".into()]);
        t.push(vec!["0.5".into(), "1.0".into(), "1.0".into()]);
        assert_eq!(t.to_csv(), "lambda,x,y\n,0.0,1.0\n0.5,1.0,1.0\n");
        let h = t.to_human();
        assert!(h.starts_with("lambda  x    y\n------  ---  ---\n"));
    }
}
