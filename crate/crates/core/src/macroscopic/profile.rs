//! Initial-data profiles with declared analytic bounds.
//!
//! The decay estimates are assembled from true suprema of the initial data;
//! estimating them from samples would make the audit unsound. Profiles
//! therefore declare their bounds, and a dominance check (declared bounds
//! must cover sampled values) catches wrong declarations.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Declared analytic bounds of a profile over the whole line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileBounds<T> {
    pub inf_value: T,
    pub sup_value: T,
    pub inf_deriv: T,
    pub sup_deriv: T,
    pub sup_abs_deriv2: T,
}

impl<T: Scalar> ProfileBounds<T> {
    pub fn sup_abs_value(&self) -> T {
        self.inf_value.abs().max(self.sup_value.abs())
    }

    pub fn sup_abs_deriv(&self) -> T {
        self.inf_deriv.abs().max(self.sup_deriv.abs())
    }

    /// Largest deviation of the value from a reference level.
    pub fn sup_dev_from(&self, level: T) -> T {
        (self.sup_value - level).max(level - self.inf_value).max(T::zero())
    }
}

/// A bounded initial-data function with two derivatives.
pub trait SmoothProfile<T>: Send + Sync {
    fn value(&self, x: T) -> T;
    fn deriv(&self, x: T) -> T;
    fn deriv2(&self, x: T) -> T;
    fn bounds(&self) -> ProfileBounds<T>;
}

/// Constant profile.
#[derive(Debug, Clone, Copy)]
pub struct ConstantProfile<T> {
    pub level: T,
}

impl<T: Scalar> SmoothProfile<T> for ConstantProfile<T> {
    fn value(&self, _x: T) -> T {
        self.level
    }

    fn deriv(&self, _x: T) -> T {
        T::zero()
    }

    fn deriv2(&self, _x: T) -> T {
        T::zero()
    }

    fn bounds(&self) -> ProfileBounds<T> {
        ProfileBounds {
            inf_value: self.level,
            sup_value: self.level,
            inf_deriv: T::zero(),
            sup_deriv: T::zero(),
            sup_abs_deriv2: T::zero(),
        }
    }
}

/// `base + amp * x^p (x-1)^p` on `(0, 1)`, constant `base` elsewhere.
///
/// Power 2 is C^1 across the bump edges (a density-grade profile), power 3
/// is C^2 (a speed-grade profile). Bounds are closed forms: with
/// `u = x(x-1) in [-1/4, 0]` the bump is `amp * u^p`, its derivative
/// `amp * p * u^{p-1} (2x-1)`, and its second derivative
/// `amp * p * u^{p-2} ((p-1)(4u+1) + 2u)`.
#[derive(Debug, Clone, Copy)]
pub struct BumpProfile<T> {
    base: T,
    amp: T,
    power: u32,
}

impl<T: Scalar> BumpProfile<T> {
    pub fn new(base: T, amp: T, power: u32) -> Result<Self> {
        if !(power == 2 || power == 3) {
            return Err(Error::InvalidParams(vec![format!(
                "bump power must be 2 or 3, got {power}"
            )]));
        }
        Ok(Self { base, amp, power })
    }

    fn inside(&self, x: T) -> bool {
        x > T::zero() && x < T::one()
    }
}

impl<T: Scalar> SmoothProfile<T> for BumpProfile<T> {
    fn value(&self, x: T) -> T {
        if !self.inside(x) {
            return self.base;
        }
        let u = x * (x - T::one());
        self.base + self.amp * u.powi(self.power as i32)
    }

    fn deriv(&self, x: T) -> T {
        if !self.inside(x) {
            return T::zero();
        }
        let u = x * (x - T::one());
        let p = T::cst(self.power as f64);
        self.amp * p * u.powi(self.power as i32 - 1) * (T::cst(2.0) * x - T::one())
    }

    fn deriv2(&self, x: T) -> T {
        if !self.inside(x) {
            return T::zero();
        }
        let u = x * (x - T::one());
        let p = T::cst(self.power as f64);
        let four = T::cst(4.0);
        let two = T::cst(2.0);
        self.amp
            * p
            * u.powi(self.power as i32 - 2)
            * ((p - T::one()) * (four * u + T::one()) + two * u)
    }

    fn bounds(&self) -> ProfileBounds<T> {
        // Value extremum at u = -1/4 (x = 1/2).
        let extreme = self.amp * T::cst((-0.25f64).powi(self.power as i32));
        let (lo, hi) = if extreme < T::zero() {
            (extreme, T::zero())
        } else {
            (T::zero(), extreme)
        };
        // Interior derivative extrema: u = -1/6 for power 2, u = -1/5 for
        // power 3, both with |2x - 1| = 1/sqrt(2p - 1) there.
        let deriv_scale = match self.power {
            2 => 1.0 / (3.0 * 3f64.sqrt()),
            _ => 3.0 / (25.0 * 5f64.sqrt()),
        };
        let deriv_sup = self.amp.abs() * T::cst(deriv_scale);
        // Second derivative: sup of |p u^{p-2} ((p-1)(4u+1) + 2u)| over
        // [-1/4, 0] is 2 for power 2 (edge limit) and 3/8 for power 3.
        let deriv2_scale = match self.power {
            2 => 2.0,
            _ => 0.375,
        };
        ProfileBounds {
            inf_value: self.base + lo,
            sup_value: self.base + hi,
            inf_deriv: -deriv_sup,
            sup_deriv: deriv_sup,
            sup_abs_deriv2: self.amp.abs() * T::cst(deriv2_scale),
        }
    }
}

/// Admissibility of a speed profile: the decay construction needs the
/// derivative bounded below by `-omega` strictly.
pub fn check_speed_profile<T: Scalar>(v0: &dyn SmoothProfile<T>, omega: T) -> Result<()> {
    if v0.bounds().inf_deriv > -omega {
        Ok(())
    } else {
        Err(Error::Precondition {
            index: None,
            detail: format!(
                "speed profile slope bound {} must exceed -omega = {}",
                v0.bounds().inf_deriv.to_f64().unwrap_or(f64::NAN),
                (-omega).to_f64().unwrap_or(f64::NAN)
            ),
        })
    }
}

/// Admissibility of a density profile: strictly positive.
pub fn check_density_profile<T: Scalar>(rho0: &dyn SmoothProfile<T>) -> Result<()> {
    if rho0.bounds().inf_value > T::zero() {
        Ok(())
    } else {
        Err(Error::Precondition {
            index: None,
            detail: "density profile must be strictly positive".to_owned(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn density_bump() -> BumpProfile<f64> {
        BumpProfile::new(0.1, 5.0, 2).unwrap()
    }

    fn speed_bump() -> BumpProfile<f64> {
        BumpProfile::new(1.0, 8.0, 3).unwrap()
    }

    #[test]
    fn bump_values_match_hand_evaluations() {
        let rho = density_bump();
        assert_eq!(rho.value(-1.0), 0.1);
        assert_eq!(rho.value(2.0), 0.1);
        assert!((rho.value(0.5) - 0.4125).abs() < 1e-15);

        let v = speed_bump();
        assert!((v.value(0.5) - 0.875).abs() < 1e-15);
        assert_eq!(v.value(1.5), 1.0);
    }

    #[test]
    fn derivatives_match_centered_differences() {
        for profile in [&density_bump() as &dyn SmoothProfile<f64>, &speed_bump()] {
            let h = 1e-6;
            let mut x = 0.013;
            while x < 1.0 {
                let fd = (profile.value(x + h) - profile.value(x - h)) / (2.0 * h);
                assert!((fd - profile.deriv(x)).abs() < 1e-7, "deriv at {x}");
                let fd2 = (profile.deriv(x + h) - profile.deriv(x - h)) / (2.0 * h);
                assert!((fd2 - profile.deriv2(x)).abs() < 1e-6, "deriv2 at {x}");
                x += 0.043;
            }
        }
    }

    #[test]
    fn declared_bounds_dominate_sampled_values() {
        for profile in [&density_bump() as &dyn SmoothProfile<f64>, &speed_bump()] {
            let b = profile.bounds();
            for j in 0..=4000 {
                let x = -1.0 + 3.0 * j as f64 / 4000.0;
                let v = profile.value(x);
                assert!(v >= b.inf_value - 1e-12 && v <= b.sup_value + 1e-12, "value at {x}");
                let d = profile.deriv(x);
                assert!(d >= b.inf_deriv - 1e-12 && d <= b.sup_deriv + 1e-12, "deriv at {x}");
                assert!(profile.deriv2(x).abs() <= b.sup_abs_deriv2 + 1e-12, "deriv2 at {x}");
            }
        }
    }

    #[test]
    fn declared_bounds_are_tight_at_the_extrema()  {
        let v = speed_bump();
        let b = v.bounds();
        // The value extremum sits exactly at x = 1/2.
        assert!((b.inf_value - 0.875).abs() < 1e-15);
        assert!((b.sup_dev_from(1.0) - 0.125).abs() < 1e-15);
        // Derivative extremum at the closed-form interior point.
        let x_star = (5.0 - 5f64.sqrt()) / 10.0;
        assert!((v.deriv(x_star).abs() - b.sup_deriv).abs() < 1e-12);
        // Second-derivative extremum at the midpoint.
        assert!((v.deriv2(0.5).abs() - b.sup_abs_deriv2).abs() < 1e-12);
    }

    #[test]
    fn admissibility_checks_use_declared_bounds() {
        let v = speed_bump();
        assert!(check_speed_profile(&v, 1.2).is_ok());
        assert!(check_speed_profile(&v, 0.4).is_err());
        assert!(check_density_profile(&density_bump()).is_ok());
        let negative = ConstantProfile { level: -0.1 };
        assert!(check_density_profile(&negative).is_err());
    }

    #[test]
    fn rejects_unsupported_powers() {
        assert!(BumpProfile::<f64>::new(0.0, 1.0, 4).is_err());
    }
}
