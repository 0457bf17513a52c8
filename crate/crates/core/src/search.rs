//! Bracketed Newton iteration for monotone functions.

const MAX_ITER: usize = 200;

/// Root of an increasing function on the open bracket `(lo, hi)`.
///
/// `f` returns `(value, derivative, error)` where `error` bounds the rounding
/// error of `value`; iteration stops once `|value|` is within it. The bracket
/// must satisfy `f(lo+) < 0 < f(hi-)`; the endpoints themselves are never evaluated, so
/// poles there are fine. Newton steps that leave the bracket or stall fall
/// back to bisection. Stops once the bracket or the step is below `tol`.
///
/// Returns the last iterate, which is always strictly inside the bracket.
pub(crate) fn increasing_root<F>(mut f: F, mut lo: f64, mut hi: f64, x0: f64, tol: f64) -> f64
where
    F: FnMut(f64) -> (f64, f64, f64),
{
    let mut x = x0;
    let mut prev_step = hi - lo;
    for _ in 0..MAX_ITER {
        let (v, d, err) = f(x);
        if v.abs() <= err {
            return x;
        }
        if v < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= tol {
            return x;
        }
        let newton = x - v / d;
        // step below the resolution of x
        if d > 0.0 && newton == x {
            return x;
        }
        let next = if d > 0.0 && newton > lo && newton < hi && (v / d).abs() < 0.5 * prev_step {
            newton
        } else {
            0.5 * (lo + hi)
        };
        prev_step = (next - x).abs();
        if next == x || prev_step <= 0.5 * tol {
            return next;
        }
        x = next;
    }
    x
}
