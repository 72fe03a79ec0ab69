//! The macroscopic counterpart of the platoon model: a continuity equation
//! coupled to a momentum equation with a nonlinear relaxation term, the
//! density potential that generates its anticipation force, an exact
//! characteristics solution in the small-density regime, a first-order
//! finite-difference solver, and the micro-to-macro consistency experiment.

pub mod bridge;
pub mod characteristics;
pub mod profile;
pub mod solver;


use crate::error::{Error, Result};
use crate::model::Softening;
use crate::scalar::Scalar;

pub use bridge::{micro_macro_bridge, BridgeConfig, BridgeReport, BridgeRow, DensityPotential};
pub use characteristics::{
    characteristic_state, decay_audit, p_forward, p_invert, traveling_wave, AuditGrid,
    DecayConstants, DecayReport, DecaySlice,
};
pub use profile::{BumpProfile, ConstantProfile, ProfileBounds, SmoothProfile};
pub use solver::{fd_solve, FdReport, GridConfig, MacroField};

/// Constants of the macroscopic model.
///
/// The relaxation rate is exposed directly as `omega`; the coefficient in
/// front of the relaxation term is derived from it so that the small-density
/// regime relaxes at exactly `omega`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroParams<T> {
    /// Relaxation rate of the small-density regime (1/s).
    pub omega: T,
    /// Speed set-point.
    pub v_star: T,
    /// Speed limit for the admissible box.
    pub v_max: T,
    /// Interaction-onset density: the density potential vanishes below it.
    pub rho_bar: T,
    /// Jam density: the density potential blows up there.
    pub rho_max: T,
    /// Scale of the density potential.
    pub phi_scale: T,
    /// Total mass of the micro-to-macro bridge.
    pub m_total: T,
    /// Softening width of the gain shaping.
    pub epsilon: T,
}

impl<T: Scalar> MacroParams<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        omega: T,
        v_star: T,
        v_max: T,
        rho_bar: T,
        rho_max: T,
        phi_scale: T,
        m_total: T,
        epsilon: T,
    ) -> Result<Self> {
        let p = Self { omega, v_star, v_max, rho_bar, rho_max, phi_scale, m_total, epsilon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.omega > T::zero()) {
            bad.push("omega > 0".to_owned());
        }
        if !(T::zero() < self.rho_bar && self.rho_bar < self.rho_max) {
            bad.push("0 < rho_bar < rho_max".to_owned());
        }
        if !(T::zero() < self.v_star && self.v_star < self.v_max) {
            bad.push("0 < v_star < v_max".to_owned());
        }
        if !(self.phi_scale > T::zero()) {
            bad.push("phi_scale > 0".to_owned());
        }
        if !(self.m_total > T::zero()) {
            bad.push("m_total > 0".to_owned());
        }
        if !(self.epsilon > T::zero()) {
            bad.push("epsilon > 0".to_owned());
        }
        if bad.is_empty() {
            // The derived relaxation coefficient must stay positive.
            if !(self.mu_eff() > T::zero()) {
                return Err(Error::InvalidParams(vec![
                    "omega must exceed the zero-force gain (omega > g(0))".to_owned(),
                ]));
            }
            Ok(())
        } else {
            Err(Error::InvalidParams(bad))
        }
    }

    pub fn softening(&self) -> Softening<T> {
        Softening { epsilon: self.epsilon }
    }

    /// Speed-box gain of the momentum equation.
    pub fn gain(&self, z: T) -> T {
        self.softening().gain(z, self.v_star, self.v_max)
    }

    /// Relaxation coefficient calibrated so that `mu_eff + g(0) = omega`.
    pub fn mu_eff(&self) -> T {
        self.omega - self.gain(T::zero())
    }

    pub fn phi(&self) -> PhiPotential<T> {
        PhiPotential {
            scale: self.phi_scale,
            rho_bar: self.rho_bar,
            rho_max: self.rho_max,
        }
    }
}

/// Density potential: zero up to the onset density, increasing and convex
/// beyond it, blowing up at the jam density.
///
/// `scale (rho - rho_bar)^4 / (rho_max - rho)` above the onset; the quartic
/// numerator keeps three derivatives continuous at the onset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiPotential<T> {
    pub scale: T,
    pub rho_bar: T,
    pub rho_max: T,
}

impl<T: Scalar> PhiPotential<T> {
    fn guard(&self, rho: T) -> Result<()> {
        if rho > T::zero() && rho < self.rho_max {
            Ok(())
        } else {
            Err(Error::Domain {
                what: "density",
                value: rho.to_f64().unwrap_or(f64::NAN),
                domain: "(0, rho_max)",
            })
        }
    }

    pub fn value(&self, rho: T) -> Result<T> {
        self.guard(rho)?;
        if rho <= self.rho_bar {
            return Ok(T::zero());
        }
        let a = rho - self.rho_bar;
        let b = self.rho_max - rho;
        Ok(self.scale * a.powi(4) / b)
    }

    pub fn grad(&self, rho: T) -> Result<T> {
        self.guard(rho)?;
        if rho <= self.rho_bar {
            return Ok(T::zero());
        }
        let a = rho - self.rho_bar;
        let b = self.rho_max - rho;
        let four = T::cst(4.0);
        Ok(self.scale * (four * a.powi(3) / b + a.powi(4) / (b * b)))
    }

    pub fn hess(&self, rho: T) -> Result<T> {
        self.guard(rho)?;
        if rho <= self.rho_bar {
            return Ok(T::zero());
        }
        let a = rho - self.rho_bar;
        let b = self.rho_max - rho;
        let twelve = T::cst(12.0);
        let eight = T::cst(8.0);
        let two = T::cst(2.0);
        Ok(self.scale
            * (twelve * a * a / b + eight * a.powi(3) / (b * b) + two * a.powi(4) / (b * b * b)))
    }
}

/// Anticipation term of the momentum equation:
/// `-rho_x (2 phi'(rho) + rho phi''(rho))`; identically zero below the onset
/// density, decelerating into rising density above it.
pub fn xi_term<T: Scalar>(rho: T, rho_x: T, phi: &PhiPotential<T>) -> Result<T> {
    let two = T::cst(2.0);
    Ok(-rho_x * (two * phi.grad(rho)? + rho * phi.hess(rho)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> MacroParams<f64> {
        MacroParams::new(1.2, 1.0, 2.0, 0.7, 1.0, 1.0, 7.0 / 6.0, 0.1).unwrap()
    }

    #[test]
    fn validation_names_broken_invariants() {
        let err = MacroParams::new(1.2, 1.0, 0.5, 0.7, 1.0, 1.0, 1.0, 0.1).unwrap_err();
        assert!(err.to_string().contains("v_star < v_max"));
        let err = MacroParams::new(1.2, 1.0, 2.0, 1.5, 1.0, 1.0, 1.0, 0.1).unwrap_err();
        assert!(err.to_string().contains("rho_bar < rho_max"));
        // A gain at zero force exceeding omega leaves no relaxation budget.
        let err = MacroParams::new(0.05, 1.0, 2.0, 0.7, 1.0, 1.0, 1.0, 0.2).unwrap_err();
        assert!(err.to_string().contains("omega"));
    }

    #[test]
    fn relaxation_calibration_matches_omega() {
        let p = params();
        assert!((p.mu_eff() + p.gain(0.0) - p.omega).abs() < 1e-15);
    }

    #[test]
    fn potential_vanishes_below_the_onset() {
        let phi = params().phi();
        for &rho in &[0.05, 0.3, 0.7] {
            assert_eq!(phi.value(rho).unwrap(), 0.0);
            assert_eq!(phi.grad(rho).unwrap(), 0.0);
            assert_eq!(phi.hess(rho).unwrap(), 0.0);
        }
        assert!(phi.value(0.0).is_err());
        assert!(phi.value(1.0).is_err());
    }

    #[test]
    fn potential_is_increasing_and_convex_above_the_onset() {
        let phi = params().phi();
        let mut rho = 0.705;
        while rho < 0.995 {
            assert!(phi.grad(rho).unwrap() > 0.0);
            assert!(phi.hess(rho).unwrap() >= 0.0);
            rho += 0.009;
        }
        // Convexity also holds across the onset (both sides zero there).
        assert!(phi.hess(0.69).unwrap() >= 0.0);
    }

    #[test]
    fn potential_blows_up_at_the_jam_density() {
        let phi = params().phi();
        let mut prev = 0.0;
        for k in 1..=6 {
            let rho = 1.0 - 10f64.powi(-k);
            let val = phi.value(rho).unwrap();
            assert!(val > prev);
            prev = val;
        }
    }

    #[test]
    fn potential_derivatives_match_finite_differences() {
        let phi = params().phi();
        let h = 1e-7;
        let mut rho = 0.71;
        while rho < 0.98 {
            let fd = (phi.value(rho + h).unwrap() - phi.value(rho - h).unwrap()) / (2.0 * h);
            let grad = phi.grad(rho).unwrap();
            assert!((fd - grad).abs() <= 1e-5 * (1.0 + grad.abs()), "grad at {rho}");
            let fd2 = (phi.grad(rho + h).unwrap() - phi.grad(rho - h).unwrap()) / (2.0 * h);
            let hess = phi.hess(rho).unwrap();
            assert!((fd2 - hess).abs() <= 1e-5 * (1.0 + hess.abs()), "hess at {rho}");
            rho += 0.017;
        }
    }

    #[test]
    fn anticipation_term_has_the_right_zeros_and_sign() {
        let phi = params().phi();
        assert_eq!(xi_term(0.5, 3.0, &phi).unwrap(), 0.0);
        assert_eq!(xi_term(0.8, 0.0, &phi).unwrap(), 0.0);
        // Rising density ahead decelerates.
        assert!(xi_term(0.8, 0.5, &phi).unwrap() < 0.0);
        assert!(xi_term(0.8, -0.5, &phi).unwrap() > 0.0);
    }
}
