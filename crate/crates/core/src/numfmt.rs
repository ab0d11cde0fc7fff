//! Number formatting for machine-readable output.

/// `x` with 17 significant digits: positional for moderate magnitudes,
/// scientific otherwise. Parses back to the same `f64`.
pub fn sig17(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exponent = x.abs().log10().floor() as i32;
    if (-5..17).contains(&exponent) {
        let decimals = (16 - exponent).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.16e}")
    }
}
