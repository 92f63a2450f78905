//! Locale-free number formatting at 12 significant digits.

use serde_json::Value;

pub const SIGNIFICANT_DIGITS: usize = 12;

/// `v` rounded to 12 significant digits.
pub fn round(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v).parse().unwrap_or(v)
}

pub fn num(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r = round(v);
    if r == 0.0 {
        return "0".into();
    }
    let a = r.abs();
    if !(1e-6..1e15).contains(&a) {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

/// Curvature limits print as `inf` when unbounded.
pub fn limit(v: f64) -> Value {
    if v.is_finite() {
        Value::from(round(v))
    } else {
        Value::from("inf")
    }
}

/// Rounds every float in a JSON tree in place.
pub fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64().and_then(|x| serde_json::Number::from_f64(round(x))) {
                *n = x;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

/// Serializes with rounded floats and a trailing newline.
pub fn to_json<S: serde::Serialize>(s: &S) -> String {
    let mut v = serde_json::to_value(s).expect("output types serialize");
    round_json(&mut v);
    let mut out = serde_json::to_string_pretty(&v).expect("json values serialize");
    out.push('\n');
    out
}
