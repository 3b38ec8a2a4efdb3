//! Number formatting shared by text renderers.

/// Formats `x` with nine significant digits, dropping trailing zeros.
///
/// Values that would need an exponent outside `[-5, 15)` use scientific notation.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..15).contains(&exp) {
        let s = format!("{x:.8e}");
        let (mant, e) = s
            .split_once('e')
            .expect("scientific format has an exponent");
        return format!("{}e{}", trim_zeros(mant), e);
    }
    let decimals = (8 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    let out = trim_zeros(&s);
    if out == "-0" {
        "0".to_string()
    } else {
        out
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::fmt_sig;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(130.0), "130");
        assert_eq!(fmt_sig(85.0), "85");
        assert_eq!(fmt_sig(4.0 / 7.0), "0.571428571");
        assert_eq!(fmt_sig(5.0 / 13.0), "0.384615385");
        assert_eq!(fmt_sig(-2.5), "-2.5");
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1.0e-12), "1e-12");
        assert_eq!(fmt_sig(123456789.4), "123456789");
        assert_eq!(fmt_sig(-1e-15), "-1e-15");
    }
}
