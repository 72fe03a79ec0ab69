//! The closed-loop vehicle-following model: repulsive spacing potential,
//! softened speed-box gain, and the platoon vector field.
//!
//! Each of `n` identical vehicles accelerates from three ingredients: the
//! repulsive force of the spacing to its predecessor, the reaction to the
//! force its follower feels, and a relaxation term pulling the speed to the
//! set-point. The relaxation gain is state dependent — it grows exactly fast
//! enough to keep every speed inside `[0, v_max]` — which makes the model
//! nonlinear but collision-free and speed-bounded for all admissible initial
//! conditions.


use crate::error::{Error, Result};
use crate::micro::MicroState;
use crate::scalar::Scalar;

/// Constants of the platoon model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams<T> {
    /// Relaxation constant (1/s).
    pub mu: T,
    /// Speed set-point (m/s).
    pub v_star: T,
    /// Road speed limit (m/s).
    pub v_max: T,
    /// Collision distance; spacings must stay strictly above it (m).
    pub cap_l: T,
    /// Interaction range of the spacing potential (m).
    pub lambda: T,
    /// Softening width of the gain shaping.
    pub epsilon: T,
    /// Number of vehicles.
    pub n: usize,
}

impl<T: Scalar> ModelParams<T> {
    pub fn new(mu: T, v_star: T, v_max: T, cap_l: T, lambda: T, epsilon: T, n: usize) -> Result<Self> {
        let p = Self { mu, v_star, v_max, cap_l, lambda, epsilon, n };
        p.validate()?;
        Ok(p)
    }

    /// Checks every construction invariant, naming each violated one.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.mu > T::zero()) {
            bad.push("mu > 0".to_owned());
        }
        if !(T::zero() < self.v_star && self.v_star < self.v_max) {
            bad.push("0 < v_star < v_max".to_owned());
        }
        if !(self.cap_l > T::zero()) {
            bad.push("cap_l > 0".to_owned());
        }
        if !(self.lambda > self.cap_l) {
            bad.push("lambda > cap_l".to_owned());
        }
        if !(self.epsilon > T::zero()) {
            bad.push("epsilon > 0".to_owned());
        }
        if self.n < 2 {
            bad.push("n >= 2".to_owned());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(bad))
        }
    }

    pub fn potential(&self) -> CubicPotential<T> {
        CubicPotential { cap_l: self.cap_l, lambda: self.lambda }
    }

    pub fn softening(&self) -> Softening<T> {
        Softening { epsilon: self.epsilon }
    }

    /// Speed-box gain evaluated at a force difference `z`.
    pub fn gain(&self, z: T) -> T {
        self.softening().gain(z, self.v_star, self.v_max)
    }

    /// Relaxation rate of the decoupled regime: `mu + g(0)`.
    pub fn omega_rate(&self) -> T {
        self.mu + self.gain(T::zero())
    }

    /// The closed-loop system with the default cubic potential.
    pub fn platoon(&self) -> Platoon<T, CubicPotential<T>> {
        Platoon {
            mu: self.mu,
            v_star: self.v_star,
            v_max: self.v_max,
            softening: self.softening(),
            potential: self.potential(),
            n: self.n,
        }
    }
}

/// A repulsive spacing potential: zero at and beyond the interaction range,
/// strictly repelling below it, convex, and blowing up at the collision
/// distance.
pub trait Potential<T>: Clone + Send + Sync {
    /// Collision distance: the left end of the domain.
    fn cap_l(&self) -> T;
    /// Interaction range: the potential vanishes identically beyond it.
    fn lambda(&self) -> T;
    fn value(&self, s: T) -> Result<T>;
    fn grad(&self, s: T) -> Result<T>;
    fn hess(&self, s: T) -> Result<T>;
}

/// `(lambda - s)^3 / (s - cap_l)` below the interaction range, zero above.
///
/// Derivatives are exact closed forms, not finite differences: the strict
/// certificate divides nearly-vanishing combinations of `V`, `V'` and `V''`
/// near the interaction range, where numerical differentiation would lose
/// every significant digit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicPotential<T> {
    pub cap_l: T,
    pub lambda: T,
}

impl<T: Scalar> CubicPotential<T> {
    fn guard(&self, s: T) -> Result<()> {
        if s > self.cap_l {
            Ok(())
        } else {
            Err(Error::CollisionRegion {
                spacing: s.to_f64().unwrap_or(f64::NAN),
                floor: self.cap_l.to_f64().unwrap_or(f64::NAN),
            })
        }
    }
}

impl<T: Scalar> Potential<T> for CubicPotential<T> {
    fn cap_l(&self) -> T {
        self.cap_l
    }

    fn lambda(&self) -> T {
        self.lambda
    }

    fn value(&self, s: T) -> Result<T> {
        self.guard(s)?;
        if s >= self.lambda {
            return Ok(T::zero());
        }
        let w = self.lambda - s;
        let u = s - self.cap_l;
        Ok(w * w * w / u)
    }

    fn grad(&self, s: T) -> Result<T> {
        self.guard(s)?;
        if s >= self.lambda {
            return Ok(T::zero());
        }
        let w = self.lambda - s;
        let u = s - self.cap_l;
        let three = T::cst(3.0);
        // d/ds [w^3/u] = -(3 w^2 u + w^3) / u^2, strictly negative on (L, lambda)
        Ok(-(w * w) * (three * u + w) / (u * u))
    }

    fn hess(&self, s: T) -> Result<T> {
        self.guard(s)?;
        if s >= self.lambda {
            return Ok(T::zero());
        }
        let w = self.lambda - s;
        let u = s - self.cap_l;
        let two = T::cst(2.0);
        let six = T::cst(6.0);
        Ok(six * w / u + six * w * w / (u * u) + two * w * w * w / (u * u * u))
    }
}

/// Softened positive part: a non-decreasing C^1 map with `f(x) >= max(x, 0)`,
/// quadratic on `(-epsilon, 0)` and affine elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Softening<T> {
    pub epsilon: T,
}

impl<T: Scalar> Softening<T> {
    pub fn value(&self, x: T) -> T {
        let e = self.epsilon;
        let two = T::cst(2.0);
        if x <= -e {
            T::zero()
        } else if x < T::zero() {
            let t = x + e;
            t * t / (two * e)
        } else {
            (e * e + two * e * x) / (two * e)
        }
    }

    pub fn deriv(&self, x: T) -> T {
        let e = self.epsilon;
        if x <= -e {
            T::zero()
        } else if x < T::zero() {
            (x + e) / e
        } else {
            T::one()
        }
    }

    /// The speed-box gain built on this softening.
    ///
    /// `gain(z) >= 0` for every `z`, and the relaxation gain `mu + gain(...)`
    /// is exactly strong enough to keep speeds inside `[0, v_max]`.
    pub fn gain(&self, z: T, v_star: T, v_max: T) -> T {
        v_max * self.value(z) / (v_star * (v_max - v_star)) - z / v_star
    }
}

/// Time derivative of a platoon state.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroDeriv<T> {
    /// Spacing rates, one per gap (leading gap first).
    pub spacing_rates: Vec<T>,
    /// Speed rates, one per vehicle (leader first).
    pub speed_rates: Vec<T>,
}

/// The closed-loop platoon system over an arbitrary spacing potential.
#[derive(Debug, Clone)]
pub struct Platoon<T, P> {
    pub mu: T,
    pub v_star: T,
    pub v_max: T,
    pub softening: Softening<T>,
    pub potential: P,
    pub n: usize,
}

impl<T: Scalar, P: Potential<T>> Platoon<T, P> {
    pub fn gain(&self, z: T) -> T {
        self.softening.gain(z, self.v_star, self.v_max)
    }

    /// Relaxation rate of the decoupled regime: `mu + g(0)`.
    pub fn omega_rate(&self) -> T {
        self.mu + self.gain(T::zero())
    }

    /// Strict state-space membership: spacings above the collision distance,
    /// speeds inside the closed box `[0, v_max]`.
    pub fn contains(&self, state: &MicroState<T>) -> bool {
        self.contains_parts(&state.spacings, &state.speeds, T::zero())
    }

    pub(crate) fn contains_parts(&self, spacings: &[T], speeds: &[T], speed_tol: T) -> bool {
        spacings.iter().all(|&s| s > self.potential.cap_l())
            && speeds.iter().all(|&v| v >= -speed_tol && v <= self.v_max + speed_tol)
    }

    pub(crate) fn check_state(&self, state: &MicroState<T>) -> Result<()> {
        if state.n() != self.n {
            return Err(Error::InvalidParams(vec![format!(
                "state has {} vehicles, platoon expects {}",
                state.n(),
                self.n
            )]));
        }
        if self.contains(state) {
            Ok(())
        } else {
            Err(Error::OutsideStateSpace(
                crate::micro::validate_state(self, state).describe(),
            ))
        }
    }

    /// Relaxation gains `k_1..k_n`, each at least `mu`.
    pub fn controller_gains(&self, state: &MicroState<T>) -> Result<Vec<T>> {
        self.check_state(state)?;
        let grads = self.spacing_forces(&state.spacings)?;
        Ok(self.gains_from_forces(&grads))
    }

    fn spacing_forces(&self, spacings: &[T]) -> Result<Vec<T>> {
        spacings.iter().map(|&s| self.potential.grad(s)).collect()
    }

    fn gains_from_forces(&self, grads: &[T]) -> Vec<T> {
        let n = self.n;
        let mut ks = Vec::with_capacity(n);
        // The leader reacts only to the force on its follower, the last
        // vehicle only to the force from its leader.
        ks.push(self.mu + self.gain(-grads[0]));
        for i in 2..n {
            ks.push(self.mu + self.gain(grads[i - 2] - grads[i - 1]));
        }
        ks.push(self.mu + self.gain(grads[n - 2]));
        ks
    }

    /// Right-hand side of the platoon ODE at an admissible state.
    pub fn vector_field(&self, state: &MicroState<T>) -> Result<MicroDeriv<T>> {
        self.check_state(state)?;
        let n = self.n;
        let mut deriv = MicroDeriv {
            spacing_rates: vec![T::zero(); n - 1],
            speed_rates: vec![T::zero(); n],
        };
        let mut grads = vec![T::zero(); n - 1];
        self.field_parts(
            &state.spacings,
            &state.speeds,
            &mut deriv.spacing_rates,
            &mut deriv.speed_rates,
            &mut grads,
        )?;
        Ok(deriv)
    }

    /// Hot-path form over pre-split slices; `grads` is caller scratch.
    pub(crate) fn field_parts(
        &self,
        spacings: &[T],
        speeds: &[T],
        d_spacings: &mut [T],
        d_speeds: &mut [T],
        grads: &mut [T],
    ) -> Result<()> {
        let n = self.n;
        for j in 0..n - 1 {
            grads[j] = self.potential.grad(spacings[j])?;
            d_spacings[j] = speeds[j] - speeds[j + 1];
        }
        d_speeds[0] = -(self.mu + self.gain(-grads[0])) * (speeds[0] - self.v_star) - grads[0];
        for i in 2..n {
            let force = grads[i - 2] - grads[i - 1];
            d_speeds[i - 1] = -(self.mu + self.gain(force)) * (speeds[i - 1] - self.v_star) + force;
        }
        d_speeds[n - 1] =
            -(self.mu + self.gain(grads[n - 2])) * (speeds[n - 1] - self.v_star) + grads[n - 2];
        Ok(())
    }
}
