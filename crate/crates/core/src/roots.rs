//! Bracketing root search on monotone scalar functions.

use crate::error::BracketError;

/// Bisection on `[lo, hi]`. Stops when the bracket is narrower than `xtol`
/// or cannot be split further in floating point.
pub fn bisect<F>(mut f: F, lo: f64, hi: f64, xtol: f64) -> Result<f64, BracketError>
where
    F: FnMut(f64) -> f64,
{
    let (mut lo, mut hi) = (lo, hi);
    let f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if !(f_lo.is_finite() && f_hi.is_finite()) || f_lo.signum() == f_hi.signum() {
        return Err(BracketError { lo, hi, f_lo, f_hi });
    }
    let lo_negative = f_lo < 0.0;
    loop {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xtol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Doubles `hi` until `f(hi)` has the opposite sign of `f(lo)`.
pub fn expand_upper<F>(mut f: F, lo: f64, hi: f64, max_doublings: u32) -> Result<f64, BracketError>
where
    F: FnMut(f64) -> f64,
{
    let f_lo = f(lo);
    let mut hi = hi;
    let mut f_hi = f(hi);
    for _ in 0..max_doublings {
        if f_hi.is_finite() && f_hi.signum() != f_lo.signum() {
            return Ok(hi);
        }
        hi *= 2.0;
        f_hi = f(hi);
    }
    if f_hi.is_finite() && f_hi.signum() != f_lo.signum() {
        Ok(hi)
    } else {
        Err(BracketError { lo, hi, f_lo, f_hi })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_two() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 0.0).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn decreasing_function() {
        let r = bisect(|x| 1.0 - x, 0.0, 3.0, 1e-12).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_sign_change() {
        let e = bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12).unwrap_err();
        assert_eq!(e.lo, -1.0);
        assert_eq!(e.f_hi, 2.0);
    }

    #[test]
    fn expansion() {
        let hi = expand_upper(|x| x - 100.0, 0.0, 1.0, 10).unwrap();
        assert_eq!(hi, 128.0);
        assert!(expand_upper(|x| x - 1e9, 0.0, 1.0, 5).is_err());
    }
}
