//! Bracketing bisection for monotone scalar functions.

use crate::error::{Error, Result};

/// Grows `[lo, hi]` geometrically about its midpoint until `f` changes sign,
/// giving up after `max_expansions` doublings.
pub fn expand_bracket<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, max_expansions: usize) -> Result<(f64, f64)> {
    assert!(lo < hi);
    for _ in 0..=max_expansions {
        let (flo, fhi) = (f(lo), f(hi));
        if flo.is_nan() || fhi.is_nan() {
            return Err(Error::RootBracket(format!("function is NaN on [{lo}, {hi}]")));
        }
        if flo.signum() != fhi.signum() || flo == 0.0 || fhi == 0.0 {
            return Ok((lo, hi));
        }
        let width = hi - lo;
        lo -= width;
        hi += width;
    }
    Err(Error::RootBracket(format!("no sign change found up to [{lo}, {hi}]")))
}

/// Bisection on a sign-changing bracket until its width is at most `tol`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return Err(Error::RootBracket(format!("f({lo}) = {flo} and f({hi}) = {fhi} do not bracket a root")));
    }
    // 200 halvings exhaust the resolution of any finite f64 interval.
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
