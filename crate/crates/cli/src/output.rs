use std::io::Write;

use serde_json::Value;

/// Rounds to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if x.is_finite() && x != 0.0 {
        format!("{x:.11e}").parse().expect("formatted float parses")
    } else {
        x
    }
}

/// JSON number rounded to 12 significant digits; non-finite values become null.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        Value::from(round12(x))
    } else {
        Value::Null
    }
}

/// CSV cell for a float: shortest representation after rounding; empty when
/// absent or non-finite.
pub fn cell(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => round12(v).to_string(),
        _ => String::new(),
    }
}

/// Quotes a CSV field when it contains a separator, quote or newline.
pub fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

pub fn write_json(out: &mut impl Write, value: &Value) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)
}
