//! Report serialization: every real is written with 17 significant digits so
//! that the text round-trips bit-exactly and identical runs give identical bytes.

use std::fmt::Write as _;
use std::sync::OnceLock;

use antiholo_core::verify::ManifoldReport;
use serde_json::Value;

pub const REPORT_SCHEMA: &str = include_str!("../../../schema/report.schema.json");

#[derive(Debug, thiserror::Error)]
pub enum JsonError {
    #[error("report does not match its schema: {0}")]
    Schema(String),
    #[error("malformed report: {0}")]
    Serde(#[from] serde_json::Error),
}

/// `d.dddddddddddddddde±x`, 17 significant digits.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Pretty JSON with two-space indentation and fixed-precision reals.
pub fn emit(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, value: &Value, depth: usize) {
    match value {
        Value::Number(num) => match (num.as_u64(), num.as_i64(), num.as_f64()) {
            (Some(u), _, _) if !num.is_f64() => write!(out, "{u}").unwrap(),
            (_, Some(i), _) if !num.is_f64() => write!(out, "{i}").unwrap(),
            (_, _, Some(f)) => out.push_str(&format_real(f)),
            _ => unreachable!("serde_json numbers are u64, i64 or f64"),
        },
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) => {
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                out.push_str(if k == 0 { "\n" } else { ",\n" });
                indent(out, depth + 1);
                write_value(out, item, depth + 1);
            }
            out.push('\n');
            indent(out, depth);
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            out.push('{');
            for (k, (key, item)) in map.iter().enumerate() {
                out.push_str(if k == 0 { "\n" } else { ",\n" });
                indent(out, depth + 1);
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                write_value(out, item, depth + 1);
            }
            out.push('\n');
            indent(out, depth);
            out.push('}');
        }
        scalar => out.push_str(&scalar.to_string()),
    }
}

fn indent(out: &mut String, depth: usize) {
    out.extend(std::iter::repeat_n("  ", depth));
}

fn validator() -> &'static jsonschema::Validator {
    static V: OnceLock<jsonschema::Validator> = OnceLock::new();
    V.get_or_init(|| {
        let schema: Value = serde_json::from_str(REPORT_SCHEMA).expect("bundled schema is JSON");
        jsonschema::validator_for(&schema).expect("bundled schema compiles")
    })
}

pub fn validate(value: &Value) -> Result<(), JsonError> {
    let problems: Vec<String> = validator()
        .iter_errors(value)
        .map(|e| format!("{} at {}", e, e.instance_path))
        .collect();
    if problems.is_empty() {
        Ok(())
    } else {
        Err(JsonError::Schema(problems.join("; ")))
    }
}

/// Schema-checked report text.
pub fn report_to_string(report: &ManifoldReport) -> Result<String, JsonError> {
    let value = serde_json::to_value(report)?;
    validate(&value)?;
    let text = emit(&value);
    validate(&serde_json::from_str(&text)?)?;
    Ok(text)
}

pub fn report_from_str(text: &str) -> Result<ManifoldReport, JsonError> {
    let value: Value = serde_json::from_str(text)?;
    validate(&value)?;
    Ok(serde_json::from_value(value)?)
}
