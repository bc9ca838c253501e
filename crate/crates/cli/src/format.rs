//! Number formatting shared by reports and CSV files.

/// Twelve significant digits in scientific notation; `nan`, `inf`, `-inf`
/// for non-finite values.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.11e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_num(1.0), "1.00000000000e0");
        assert_eq!(fmt_num(-0.125), "-1.25000000000e-1");
        assert_eq!(fmt_num(std::f64::consts::PI), "3.14159265359e0");
        assert_eq!(fmt_num(f64::NAN), "nan");
        assert_eq!(fmt_num(f64::NEG_INFINITY), "-inf");
    }
}
