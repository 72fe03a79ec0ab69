//! Bisection helpers shared by the certificate construction, the
//! characteristics solver, and the platoon placement code.

use crate::scalar::Scalar;

/// Final bracket of a bisection run.
#[derive(Debug, Clone, Copy)]
pub struct Bracket<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> Bracket<T> {
    pub fn midpoint(&self) -> T {
        (self.lo + self.hi) * T::cst(0.5)
    }
}

const MAX_ITER: usize = 400;

/// Bisects `f(s) = target` for a monotone `f` on `(lo, hi)`.
///
/// The endpoints are never evaluated, so brackets whose boundary lies outside
/// the domain of `f` (e.g. a potential blowing up at the collision distance)
/// are fine. The caller asserts the bracketing property through `increasing`;
/// the bracket shrinks until `hi - lo <= tol` or float resolution is hit.
pub fn bisect_monotone<T: Scalar>(
    mut f: impl FnMut(T) -> T,
    mut lo: T,
    mut hi: T,
    target: T,
    tol: T,
    increasing: bool,
) -> Bracket<T> {
    let half = T::cst(0.5);
    for _ in 0..MAX_ITER {
        if hi - lo <= tol {
            break;
        }
        let mid = (lo + hi) * half;
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        let go_right = if increasing { fm < target } else { fm > target };
        if go_right {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Bracket { lo, hi }
}

/// Bisects a continuous `f` with `f(lo) <= 0 <= f(hi)` down to `tol`.
///
/// Monotonicity is not required; any sign change inside the bracket yields a
/// root of `f`.
pub fn bisect_sign<T: Scalar>(mut f: impl FnMut(T) -> T, mut lo: T, mut hi: T, tol: T) -> T {
    let half = T::cst(0.5);
    for _ in 0..MAX_ITER {
        if hi - lo <= tol {
            break;
        }
        let mid = (lo + hi) * half;
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) <= T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) * half
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverts_increasing_function() {
        let b = bisect_monotone(|x: f64| x * x * x, 0.0, 3.0, 8.0, 1e-13, true);
        assert!((b.midpoint() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn inverts_decreasing_function_without_touching_endpoints() {
        // 1/x blows up at the left endpoint; bisection must not evaluate it.
        let b = bisect_monotone(|x: f64| 1.0 / x, 0.0, 10.0, 4.0, 1e-13, false);
        assert!((b.midpoint() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn sign_bisection_finds_a_root() {
        let r = bisect_sign(|x: f64| x.sin() - 0.5, 0.0, 1.0, 1e-13);
        assert!((r - 0.5f64.asin()).abs() < 1e-12);
    }
}
