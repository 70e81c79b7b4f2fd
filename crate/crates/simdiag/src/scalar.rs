//! Scalar helpers: decimal string conversion at a given binary precision and
//! magnitude computations shared by the norm implementations.
//!
//! Matrices serialize entries as decimal scientific strings.  Printing
//! `ceil(prec * log10(2)) + 2` significant digits guarantees that re-parsing
//! at the same precision reproduces the stored value bit-exactly.

use rug::{Complex, Float};

use crate::error::{Error, Result};

/// Minimum precision accepted anywhere in the crate.
pub const MIN_PREC: u32 = 24;

/// Significant decimal digits needed for a bit-exact round trip at `prec`.
pub fn roundtrip_digits(prec: u32) -> usize {
    (prec as f64 * std::f64::consts::LOG10_2).ceil() as usize + 2
}

/// Scientific decimal rendering with `digits` significant digits.
pub fn fmt_sci(f: &Float, digits: usize) -> String {
    if f.is_zero() {
        return "0".to_string();
    }
    // rug's LowerExp precision counts significant digits, not decimals
    format!("{:.*e}", digits.max(1), f)
}

/// Full-precision rendering (round-trips at the float's own precision).
pub fn float_to_decimal(f: &Float) -> String {
    fmt_sci(f, roundtrip_digits(f.prec()))
}

pub fn parse_float(s: &str, prec: u32) -> Result<Float> {
    let incomplete = Float::parse(s).map_err(|e| Error::Parse(format!("{s:?}: {e}")))?;
    Ok(Float::with_val(prec, incomplete))
}

/// |c|, written into `out` (avoids allocating in inner loops).
pub fn abs_into(c: &Complex, out: &mut Float) {
    out.assign_hypot(c.real(), c.imag());
}

/// Convenience trait so `Float` gets a two-argument hypot assignment.
trait AssignHypot {
    fn assign_hypot(&mut self, re: &Float, im: &Float);
}

impl AssignHypot for Float {
    fn assign_hypot(&mut self, re: &Float, im: &Float) {
        use rug::Assign;
        self.assign(re.hypot_ref(im));
    }
}

pub fn is_finite(c: &Complex) -> bool {
    c.real().is_finite() && c.imag().is_finite()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rug::ops::Pow;
    use rug::Assign;

    #[test]
    fn roundtrip_is_bit_exact() {
        for prec in [24u32, 53, 128, 256, 1024] {
            let v = Float::with_val(prec, 2).sqrt() / 3u32;
            let s = float_to_decimal(&v);
            let back = parse_float(&s, prec).unwrap();
            assert_eq!(v, back, "prec {prec}: {s}");
        }
    }

    #[test]
    fn roundtrip_negative_and_tiny() {
        let v = -Float::with_val(256, 10).pow(&Float::with_val(256, -250));
        let back = parse_float(&float_to_decimal(&v), 256).unwrap();
        assert_eq!(v, back);
    }

    #[test]
    fn fmt_sci_shape() {
        let v = Float::with_val(64, 5.51e-6);
        let s = fmt_sci(&v, 3);
        assert!(s.starts_with("5.51e"), "{s}");
        assert_eq!(fmt_sci(&Float::new(64), 3), "0");
    }

    #[test]
    fn abs_into_matches_hypot() {
        let c = Complex::with_val(64, (3, 4));
        let mut out = Float::new(64);
        abs_into(&c, &mut out);
        assert_eq!(out, Float::with_val(64, 5));
        let mut z = Float::new(64);
        z.assign(0);
        abs_into(&Complex::new(64), &mut z);
        assert!(z.is_zero());
    }
}
