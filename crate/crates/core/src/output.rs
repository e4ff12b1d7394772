//! Deterministic JSON output.
//!
//! Object keys are emitted in sorted order and every floating-point number is
//! written with 17 significant digits in scientific notation, which round-trips
//! any `f64` exactly. Integers are written as integers.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};
use std::fmt::Write;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// One command invocation: echoed inputs plus command-specific results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEnvelope {
    pub command: String,
    pub parameters: Value,
    pub results: Value,
    pub artifact_version: String,
}

impl OutputEnvelope {
    pub fn new<P: Serialize, R: Serialize>(
        command: &str,
        parameters: &P,
        results: &R,
    ) -> serde_json::Result<Self> {
        Ok(Self {
            command: command.to_owned(),
            parameters: serde_json::to_value(parameters)?,
            results: serde_json::to_value(results)?,
            artifact_version: ARTIFACT_VERSION.to_owned(),
        })
    }

    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("envelope is plain JSON data");
        to_canonical_json(&value)
    }
}

/// `f64` with 17 significant digits, e.g. `2.5000000000000000e0`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_number(out: &mut String, n: &Number) {
    if n.is_f64() {
        out.push_str(&format_float(n.as_f64().expect("checked is_f64")));
    } else {
        write!(out, "{n}").expect("writing to a String cannot fail");
    }
}

fn write_value(out: &mut String, value: &Value, indent: usize) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => write_number(out, n),
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string escapes")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline(out, indent + 1);
                write_value(out, item, indent + 1);
            }
            newline(out, indent);
            out.push(']');
        }
        Value::Object(map) => write_object(out, map, indent),
    }
}

fn write_object(out: &mut String, map: &Map<String, Value>, indent: usize) {
    if map.is_empty() {
        out.push_str("{}");
        return;
    }
    let mut keys: Vec<&String> = map.keys().collect();
    keys.sort();
    out.push('{');
    for (i, key) in keys.into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        newline(out, indent + 1);
        out.push_str(&serde_json::to_string(key).expect("string escapes"));
        out.push_str(": ");
        write_value(out, &map[key], indent + 1);
    }
    newline(out, indent);
    out.push('}');
}

fn newline(out: &mut String, indent: usize) {
    out.push('\n');
    out.extend(std::iter::repeat_n("  ", indent));
}

/// Pretty-printed JSON with sorted keys and fixed float formatting.
pub fn to_canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out.push('\n');
    out
}
