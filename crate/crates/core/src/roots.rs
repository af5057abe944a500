//! Safeguarded Newton iteration for monotone scalar equations.

use crate::error::{Error, Result};

/// Solves `g(x) = 0` for a continuous, nondecreasing `g` on `[lo, hi]`.
///
/// `g` returns `(value, derivative)`. Newton steps are taken while they stay
/// inside the current bracket; otherwise the iteration bisects. Infinite bracket
/// ends are expanded geometrically from `guess` first.
pub fn solve_increasing(
    mut g: impl FnMut(f64) -> (f64, f64),
    mut lo: f64,
    mut hi: f64,
    guess: f64,
) -> Result<f64> {
    if !(lo < hi) {
        return Err(Error::RootFinding(format!("empty bracket [{lo}, {hi}]")));
    }
    let mut x = if guess.is_finite() && guess > lo && guess < hi {
        guess
    } else if lo.is_finite() && hi.is_finite() {
        0.5 * (lo + hi)
    } else if lo.is_finite() {
        lo + 1.0
    } else if hi.is_finite() {
        hi - 1.0
    } else {
        0.0
    };

    // Expand infinite ends until the sign change is bracketed.
    if !lo.is_finite() || !hi.is_finite() {
        let (v, _) = g(x);
        if v == 0.0 {
            return Ok(x);
        }
        let mut step = 1.0f64.max(x.abs());
        if v > 0.0 {
            hi = hi.min(x);
            if !lo.is_finite() {
                let mut probe = x - step;
                for _ in 0..2000 {
                    if g(probe).0 <= 0.0 {
                        break;
                    }
                    hi = probe;
                    step *= 2.0;
                    probe = x - step;
                }
                lo = probe;
            }
        } else {
            lo = lo.max(x);
            if !hi.is_finite() {
                let mut probe = x + step;
                for _ in 0..2000 {
                    if g(probe).0 >= 0.0 {
                        break;
                    }
                    lo = probe;
                    step *= 2.0;
                    probe = x + step;
                }
                hi = probe;
            }
        }
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::RootFinding("could not bracket root".into()));
        }
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
    }

    for _ in 0..400 {
        let (v, d) = g(x);
        if v == 0.0 {
            return Ok(x);
        }
        if v > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let newton = if d > 0.0 && d.is_finite() {
            x - v / d
        } else {
            f64::NAN
        };
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let tol = 4.0 * f64::EPSILON * (1.0 + next.abs());
        if (next - x).abs() <= tol || (hi - lo) <= tol {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}
