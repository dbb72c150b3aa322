//! Number formatting shared by the text dumps and CSV writers.

/// Scientific notation with 17 significant digits; parses back to the same `f64`.
pub fn sig17(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}
