//! Number formatting shared by all commands.

use num_complex::Complex64;

/// `x` with 12 significant digits.
pub fn sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..12).contains(&mag) {
        let decimals = (11 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.11e}")
    }
}

/// `a + bi` with 12 significant digits per part.
pub fn complex_text(z: Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{} {sign} {}i", sig12(z.re), sig12(z.im.abs()))
}

/// `[re, im]` for JSON; serde_json prints the shortest round-trip decimals.
pub fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sig12(3492.497198976123), "3492.49719898");
        assert_eq!(sig12(-0.000123456789012345), "-0.000123456789012");
        assert_eq!(sig12(1.5e-9), "1.50000000000e-9");
        assert_eq!(complex_text(Complex64::new(0.5, -0.25)), "0.500000000000 - 0.250000000000i");
    }
}
