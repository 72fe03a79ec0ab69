//! Classical fourth-order Runge-Kutta with step halving on state-space exit.


use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Reusable stage buffers for one integration.
pub struct Rk4<T> {
    k1: Vec<T>,
    k2: Vec<T>,
    k3: Vec<T>,
    k4: Vec<T>,
    stage: Vec<T>,
}

impl<T: Scalar> Rk4<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![T::zero(); dim],
            k2: vec![T::zero(); dim],
            k3: vec![T::zero(); dim],
            k4: vec![T::zero(); dim],
            stage: vec![T::zero(); dim],
        }
    }

    /// One RK4 step of size `dt` from `(t, y)` into `out`.
    pub fn step<F>(&mut self, field: &mut F, t: T, y: &[T], dt: T, out: &mut [T]) -> Result<()>
    where
        F: FnMut(T, &[T], &mut [T]) -> Result<()>,
    {
        let half = dt * T::cst(0.5);
        field(t, y, &mut self.k1)?;
        for i in 0..y.len() {
            self.stage[i] = y[i] + half * self.k1[i];
        }
        field(t + half, &self.stage, &mut self.k2)?;
        for i in 0..y.len() {
            self.stage[i] = y[i] + half * self.k2[i];
        }
        field(t + half, &self.stage, &mut self.k3)?;
        for i in 0..y.len() {
            self.stage[i] = y[i] + dt * self.k3[i];
        }
        field(t + dt, &self.stage, &mut self.k4)?;
        let sixth = dt / T::cst(6.0);
        let two = T::cst(2.0);
        for i in 0..y.len() {
            out[i] = y[i] + sixth * (self.k1[i] + two * self.k2[i] + two * self.k3[i] + self.k4[i]);
        }
        Ok(())
    }

    /// Advances `y` by exactly `dt`, halving the step wherever the candidate
    /// leaves the admissible set (or a stage leaves the vector-field domain).
    ///
    /// The admissible set is forward invariant for the exact flow, so an exit
    /// is purely a step-size artifact; `max_halvings` consecutive failures
    /// mean the step size is hopeless and the call errors out.
    pub fn advance_in_set<F, M>(
        &mut self,
        field: &mut F,
        admissible: &M,
        t: T,
        y: &mut [T],
        trial: &mut [T],
        dt: T,
        max_halvings: u32,
    ) -> Result<()>
    where
        F: FnMut(T, &[T], &mut [T]) -> Result<()>,
        M: Fn(&[T]) -> bool,
    {
        self.advance_rec(field, admissible, t, y, trial, dt, 0, max_halvings)
    }

    #[allow(clippy::too_many_arguments)]
    fn advance_rec<F, M>(
        &mut self,
        field: &mut F,
        admissible: &M,
        t: T,
        y: &mut [T],
        trial: &mut [T],
        dt: T,
        depth: u32,
        max_depth: u32,
    ) -> Result<()>
    where
        F: FnMut(T, &[T], &mut [T]) -> Result<()>,
        M: Fn(&[T]) -> bool,
    {
        let accepted = match self.step(field, t, y, dt, trial) {
            Ok(()) => admissible(trial),
            Err(_) => false,
        };
        if accepted {
            y.copy_from_slice(trial);
            return Ok(());
        }
        if depth == max_depth {
            return Err(Error::IntegrationFailure {
                t: t.to_f64().unwrap_or(f64::NAN),
                halvings: max_depth,
            });
        }
        let half = dt * T::cst(0.5);
        self.advance_rec(field, admissible, t, y, trial, half, depth + 1, max_depth)?;
        self.advance_rec(field, admissible, t + half, y, trial, half, depth + 1, max_depth)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(_t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        dy[0] = -y[0];
        Ok(())
    }

    #[test]
    fn rk4_matches_exponential_to_fourth_order() {
        let mut rk = Rk4::new(1);
        let mut field = decay;
        for &dt in &[0.1f64, 0.05] {
            let steps = (1.0 / dt).round() as usize;
            let mut y = [1.0];
            let mut out = [0.0];
            for k in 0..steps {
                rk.step(&mut field, k as f64 * dt, &y, dt, &mut out).unwrap();
                y = out;
            }
            let err = (y[0] - (-1.0f64).exp()).abs();
            assert!(err < 2.0 * dt.powi(4), "err {err} at dt {dt}");
        }
    }

    #[test]
    fn halving_gives_up_after_the_depth_limit() {
        let mut rk = Rk4::new(1);
        let mut field = decay;
        let admissible = |_: &[f64]| false;
        let mut y = [1.0];
        let mut trial = [0.0];
        let err = rk
            .advance_in_set(&mut field, &admissible, 0.0, &mut y, &mut trial, 1.0, 20)
            .unwrap_err();
        assert!(matches!(err, Error::IntegrationFailure { halvings: 20, .. }));
    }

    #[test]
    fn halving_recovers_when_smaller_steps_are_admissible() {
        // Stiff decay: a full step of 1.0 overshoots wildly and leaves the
        // gate, quarter steps stay inside, so the driver must subdivide twice.
        let mut stiff = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
            dy[0] = -10.0 * y[0];
            Ok(())
        };
        let gate = |y: &[f64]| y[0] > 0.0 && y[0] < 1.5;
        let mut rk = Rk4::new(1);
        let mut y = [1.0];
        let mut trial = [0.0];
        rk.advance_in_set(&mut stiff, &gate, 0.0, &mut y, &mut trial, 1.0, 20)
            .unwrap();
        // Four quarter steps of the RK4 stability polynomial at z = -2.5.
        let z: f64 = -2.5;
        let growth = 1.0 + z + z * z / 2.0 + z * z * z / 6.0 + z * z * z * z / 24.0;
        assert!((y[0] - growth.powi(4)).abs() < 1e-12);
    }
}
