//! Bracketing and bisection for monotone scalar equations.

use crate::error::{Error, Result};

pub(crate) const MAX_BISECTIONS: usize = 200;
const MAX_DOUBLINGS: usize = 1100;

/// Root of a nondecreasing `f` on `[lo, hi]` with `f(lo) <= 0 <= f(hi)`.
///
/// Stops when the bracket stops shrinking in floating point, when its width
/// falls to `abs_tol`, or after [`MAX_BISECTIONS`] halvings. Returns whichever
/// endpoint has the smaller residual.
pub(crate) fn bisect_increasing(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, abs_tol: f64) -> f64 {
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= abs_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if f_mid < 0.0 {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    if f_lo.abs() <= f_hi.abs() {
        lo
    } else {
        hi
    }
}

/// Doubles `start` until the nondecreasing `f` turns nonnegative.
pub(crate) fn expand_upper(f: impl Fn(f64) -> f64, start: f64) -> Result<f64> {
    let mut hi = start;
    for _ in 0..MAX_DOUBLINGS {
        if f(hi) >= 0.0 {
            return Ok(hi);
        }
        hi *= 2.0;
        if !hi.is_finite() {
            break;
        }
    }
    Err(Error::Domain("failed to bracket a root".into()))
}
