//! Bracketed root finding and one-dimensional maximization.

use crate::error::{Error, Result};

pub const ROOT_REL_TOL: f64 = 1e-12;
pub const MAX_BISECTIONS: usize = 200;
pub const MAX_EXPANSIONS: usize = 60;

/// Bisection on `[lo, hi]`. `f(lo)` and `f(hi)` must differ in sign (zero counts as
/// either). Iterates until the bracket is narrower than `rel_tol * max(|lo|, |hi|)`
/// (or `abs_tol`) or floating point can no longer split it.
pub fn bisect<F>(mut f: F, lo: f64, hi: f64, rel_tol: f64, abs_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    try_bisect(|x| Ok(f(x)), lo, hi, rel_tol, abs_tol)
}

/// [`bisect`] for residuals that can fail; the first error aborts the search.
pub fn try_bisect<F>(mut f: F, mut lo: f64, mut hi: f64, rel_tol: f64, abs_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut flo = f(lo)?;
    let fhi = f(hi)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.is_nan() || fhi.is_nan() || flo.signum() == fhi.signum() {
        return Err(Error::NoConvergence {
            what: "bisection",
            detail: format!("no sign change on [{lo}, {hi}]: f = ({flo}, {fhi})"),
        });
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || (hi - lo) <= abs_tol.max(rel_tol * lo.abs().max(hi.abs())) {
            return Ok(mid);
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.is_nan() {
            return Err(Error::NoConvergence {
                what: "bisection",
                detail: format!("residual is NaN at {mid}"),
            });
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

/// Doubles `hi` (starting from `hi0 > 0`) until `pred(hi)` holds.
pub fn expand_upward<P>(hi0: f64, mut pred: P) -> Result<f64>
where
    P: FnMut(f64) -> bool,
{
    let mut hi = hi0;
    for _ in 0..MAX_EXPANSIONS {
        if pred(hi) {
            return Ok(hi);
        }
        hi *= 2.0;
    }
    Err(Error::NoConvergence {
        what: "bracket expansion",
        detail: format!("condition not met up to {hi}"),
    })
}

/// Golden-section search for a maximum of `f` on `[a, b]`.
/// Returns `(argmax, max)`.
pub fn golden_max<F>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14, 0.0).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn bisect_rejects_unbracketed() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 0.0).is_err());
    }

    #[test]
    fn expansion_stops() {
        let hi = expand_upward(1.0, |h| h > 100.0).unwrap();
        assert_eq!(hi, 128.0);
        assert!(expand_upward(1.0, |_| false).is_err());
    }

    #[test]
    fn golden_section_on_parabola() {
        let (x, fx) = golden_max(|x| -(x - 0.3) * (x - 0.3) + 1.0, 0.0, 1.0, 1e-9);
        assert!((x - 0.3).abs() < 1e-8);
        assert!((fx - 1.0).abs() < 1e-15);
    }
}
