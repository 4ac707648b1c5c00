//! Bracketed scalar root finding.

/// Bisection on `[lo, hi]` for a continuous `f` with a sign change.
///
/// Stops when the bracket is no wider than `xtol` or cannot be split further in
/// floating point. Returns `None` if `f(lo)` and `f(hi)` have the same strict sign
/// or either is NaN. An exact zero at an endpoint is returned as-is.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64) -> Option<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo.is_nan() || fhi.is_nan() {
        return None;
    }
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    // 2000 halvings is far beyond what f64 can resolve; the loop exits on width first.
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xtol || mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm.is_nan() {
            return None;
        }
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    // Pick the endpoint with the smaller residual.
    let (a, b) = (f(lo).abs(), f(hi).abs());
    Some(if a <= b { lo } else { hi })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-15).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn no_bracket() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_none());
    }

    #[test]
    fn endpoint_roots() {
        assert_eq!(bisect(|x| x, 0.0, 1.0, 1e-12), Some(0.0));
        assert_eq!(bisect(|x| x - 1.0, 0.0, 1.0, 1e-12), Some(1.0));
    }

    #[test]
    fn decreasing_function() {
        let r = bisect(|x| 1.0 - x, -3.0, 5.0, 1e-14).unwrap();
        assert!((r - 1.0).abs() < 1e-14);
    }
}
