//! Deterministic output formatting: every float is printed with 17
//! significant digits (`{:.16e}`) so values round-trip losslessly and two
//! runs of the same invocation are byte-identical.

/// A float as a lossless JSON/CSV number.
pub fn fnum(x: f64) -> String {
    format!("{x:.16e}")
}

/// An optional float, `null` when absent.
pub fn fopt(x: Option<f64>) -> String {
    match x {
        Some(v) => fnum(v),
        None => "null".to_string(),
    }
}

/// An optional integer, `null` when absent.
pub fn iopt(x: Option<u32>) -> String {
    match x {
        Some(v) => v.to_string(),
        None => "null".to_string(),
    }
}

/// A JSON string literal, quotes included.
pub fn jstr(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}
