//! Text formatting for the file formats emitted by the crate.
//!
//! All floating-point fields are written with 17 significant digits so that
//! every `f64` round-trips exactly and repeated runs produce byte-identical
//! files.

/// Formats a float with 17 significant digits in scientific notation.
pub fn float17(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    format!("{:.16e}", x)
}

/// Parses a float written by [`float17`] (also accepts plain decimal forms).
pub fn parse_float(s: &str) -> Option<f64> {
    match s {
        "nan" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse::<f64>().ok(),
    }
}

/// JSON string escaping for flag/message fields.
pub fn json_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out
}

/// Renders a float array as a JSON list.
pub fn json_float_array(xs: &[f64]) -> String {
    let items: Vec<String> = xs.iter().map(|&x| float17(x)).collect();
    format!("[{}]", items.join(","))
}
