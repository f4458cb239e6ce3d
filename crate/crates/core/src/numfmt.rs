//! Fixed 9-significant-digit number formatting for every text export.

/// Formats `x` with 9 significant digits in plain decimal notation, falling
/// back to scientific notation for very large or very small magnitudes.
pub fn fmt9(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-5..=12).contains(&mag) {
        return format!("{x:.8e}");
    }
    let decimals = (8 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    trim_zeros(s)
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" {
        "0".into()
    } else {
        t.to_string()
    }
}

/// Rounds to 9 significant digits so JSON reports serialize reproducibly.
pub fn sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}
