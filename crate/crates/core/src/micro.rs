//! Platoon state, fixed-step integration, the decoupled closed-form
//! solution, and state-space audits.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::csvio;
use crate::error::{Error, Result};
use crate::model::{Platoon, Potential};
use crate::ode::Rk4;
use crate::scalar::Scalar;

/// State of an `n`-vehicle platoon: `n - 1` spacings (leading gap first) and
/// `n` speeds (leader first).
#[derive(Debug, Clone, PartialEq)]
pub struct MicroState<T> {
    pub spacings: Vec<T>,
    pub speeds: Vec<T>,
}

impl<T: Scalar> MicroState<T> {
    pub fn new(spacings: Vec<T>, speeds: Vec<T>) -> Result<Self> {
        if speeds.len() < 2 || spacings.len() + 1 != speeds.len() {
            return Err(Error::InvalidParams(vec![format!(
                "state shape: expected n - 1 spacings and n speeds with n >= 2, got {} and {}",
                spacings.len(),
                speeds.len()
            )]));
        }
        Ok(Self { spacings, speeds })
    }

    /// All gaps equal, all speeds equal.
    pub fn uniform(spacing: T, speed: T, n: usize) -> Result<Self> {
        Self::new(vec![spacing; n - 1], vec![speed; n])
    }

    pub fn n(&self) -> usize {
        self.speeds.len()
    }

    pub(crate) fn to_flat(&self) -> Vec<T> {
        let mut y = Vec::with_capacity(self.spacings.len() + self.speeds.len());
        y.extend_from_slice(&self.spacings);
        y.extend_from_slice(&self.speeds);
        y
    }

    pub(crate) fn from_flat(y: &[T], n: usize) -> Self {
        Self {
            spacings: y[..n - 1].to_vec(),
            speeds: y[n - 1..].to_vec(),
        }
    }
}

/// Per-constraint state-space diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct OmegaReport<T> {
    pub min_spacing: T,
    pub min_speed: T,
    pub max_speed: T,
    pub spacing_ok: bool,
    pub speed_floor_ok: bool,
    pub speed_ceiling_ok: bool,
}

impl<T: Scalar> OmegaReport<T> {
    pub fn member(&self) -> bool {
        self.spacing_ok && self.speed_floor_ok && self.speed_ceiling_ok
    }

    pub fn describe(&self) -> String {
        if self.member() {
            return "member".to_owned();
        }
        let mut parts = Vec::new();
        if !self.spacing_ok {
            parts.push(format!(
                "min spacing {} at or below the collision distance",
                self.min_spacing.to_f64().unwrap_or(f64::NAN)
            ));
        }
        if !self.speed_floor_ok {
            parts.push(format!(
                "min speed {} below 0",
                self.min_speed.to_f64().unwrap_or(f64::NAN)
            ));
        }
        if !self.speed_ceiling_ok {
            parts.push(format!(
                "max speed {} above the limit",
                self.max_speed.to_f64().unwrap_or(f64::NAN)
            ));
        }
        parts.join("; ")
    }
}

/// Reports membership of each state-space constraint separately. Purely
/// diagnostic; never fails.
pub fn validate_state<T: Scalar, P: Potential<T>>(
    platoon: &Platoon<T, P>,
    state: &MicroState<T>,
) -> OmegaReport<T> {
    let min_spacing = state.spacings.iter().copied().fold(T::infinity(), T::min);
    let min_speed = state.speeds.iter().copied().fold(T::infinity(), T::min);
    let max_speed = state.speeds.iter().copied().fold(T::neg_infinity(), T::max);
    OmegaReport {
        min_spacing,
        min_speed,
        max_speed,
        spacing_ok: min_spacing > platoon.potential.cap_l(),
        speed_floor_ok: min_speed >= T::zero(),
        speed_ceiling_ok: max_speed <= platoon.v_max,
    }
}

/// Fixed-step integration setup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig<T> {
    /// Outer step size (s).
    pub dt: T,
    /// Final time (s).
    pub horizon: T,
    /// Keep every `record_stride`-th snapshot.
    pub record_stride: usize,
}

impl<T: Scalar> IntegratorConfig<T> {
    pub fn new(dt: T, horizon: T, record_stride: usize) -> Result<Self> {
        let c = Self { dt, horizon, record_stride };
        c.validate()?;
        Ok(c)
    }

    /// Default step of 1e-3 s, every snapshot kept.
    pub fn with_horizon(horizon: T) -> Result<Self> {
        Self::new(T::cst(1e-3), horizon, 1)
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.dt > T::zero()) {
            bad.push("dt > 0".to_owned());
        }
        if !(self.horizon > T::zero()) {
            bad.push("horizon > 0".to_owned());
        }
        if self.record_stride == 0 {
            bad.push("record_stride >= 1".to_owned());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(bad))
        }
    }

    pub(crate) fn steps(&self) -> usize {
        (self.horizon / self.dt).to_f64().unwrap_or(0.0).round() as usize
    }
}

/// Scalar constants a trajectory was produced with; enough to re-run the
/// state-space and spacing-bound audits without the potential object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryMeta<T> {
    pub mu: T,
    pub v_star: T,
    pub v_max: T,
    pub cap_l: T,
    pub lambda: T,
    pub n: usize,
}

impl<T: Scalar> TrajectoryMeta<T> {
    pub fn of<P: Potential<T>>(platoon: &Platoon<T, P>) -> Self {
        Self {
            mu: platoon.mu,
            v_star: platoon.v_star,
            v_max: platoon.v_max,
            cap_l: platoon.potential.cap_l(),
            lambda: platoon.potential.lambda(),
            n: platoon.n,
        }
    }
}

/// Snapshots on a uniform time grid.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub meta: TrajectoryMeta<T>,
    pub times: Vec<T>,
    pub states: Vec<MicroState<T>>,
}

impl<T: Scalar> Trajectory<T> {
    /// Spacing of the recorded grid.
    pub fn snapshot_dt(&self) -> T {
        if self.times.len() < 2 {
            T::zero()
        } else {
            self.times[1] - self.times[0]
        }
    }

    pub fn last_state(&self) -> &MicroState<T> {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    /// CSV export: `t,s2..sn,v1..vn`, one row per snapshot, full precision.
    pub fn to_csv(&self) -> String {
        let n = self.meta.n;
        let mut out = String::from("t");
        for i in 2..=n {
            out.push_str(&format!(",s{i}"));
        }
        for i in 1..=n {
            out.push_str(&format!(",v{i}"));
        }
        out.push('\n');
        let mut row = Vec::with_capacity(2 * n);
        for (t, state) in self.times.iter().zip(&self.states) {
            row.clear();
            row.push(*t);
            row.extend_from_slice(&state.spacings);
            row.extend_from_slice(&state.speeds);
            csvio::push_row(&mut out, &row);
        }
        out
    }

    /// Parses a document written by [`Trajectory::to_csv`] back into its time
    /// grid and snapshots.
    pub fn parse_csv(text: &str) -> Result<(Vec<T>, Vec<MicroState<T>>)> {
        let (header, rows) = csvio::parse_table::<T>(text)?;
        if header.len() < 4 || header.len() % 2 != 0 || header[0] != "t" {
            return Err(Error::InvalidParams(vec![
                "trajectory CSV must have columns t,s2..sn,v1..vn".into(),
            ]));
        }
        let n = header.len() / 2;
        let mut times = Vec::with_capacity(rows.len());
        let mut states = Vec::with_capacity(rows.len());
        for row in rows {
            times.push(row[0]);
            states.push(MicroState::new(
                row[1..n].to_vec(),
                row[n..2 * n].to_vec(),
            )?);
        }
        Ok((times, states))
    }
}

/// Speed-box slack granted to integrator truncation when checking membership
/// between steps. Spacing membership stays strict.
pub(crate) fn speed_box_tol<T: Scalar>(v_max: T) -> T {
    T::cst(1e-9).max(T::epsilon() * v_max * T::cst(8.0))
}

const MAX_HALVINGS: u32 = 20;

/// Integrates the platoon ODE with classical RK4 on a fixed grid.
///
/// Every recorded snapshot is admissible. If a step lands outside the state
/// space the step is retried at half size (the exact flow never exits, so an
/// exit is a step-size artifact); twenty consecutive halvings abort the run.
pub fn integrate<T: Scalar, P: Potential<T>>(
    platoon: &Platoon<T, P>,
    initial: &MicroState<T>,
    config: &IntegratorConfig<T>,
) -> Result<Trajectory<T>> {
    config.validate()?;
    platoon.check_state(initial)?;

    let n = platoon.n;
    let dim = 2 * n - 1;
    let mut y = initial.to_flat();
    let mut trial = vec![T::zero(); dim];
    let mut rk = Rk4::new(dim);
    let mut grads = vec![T::zero(); n - 1];
    let mut field = |_t: T, y: &[T], dy: &mut [T]| {
        let (s, v) = y.split_at(n - 1);
        let (ds, dv) = dy.split_at_mut(n - 1);
        platoon.field_parts(s, v, ds, dv, &mut grads)
    };
    let tol = speed_box_tol(platoon.v_max);
    let admissible = |y: &[T]| platoon.contains_parts(&y[..n - 1], &y[n - 1..], tol);

    let steps = config.steps();
    let mut times = Vec::with_capacity(steps / config.record_stride + 1);
    let mut states = Vec::with_capacity(steps / config.record_stride + 1);
    times.push(T::zero());
    states.push(initial.clone());
    for k in 0..steps {
        let t = T::cst(k as f64) * config.dt;
        rk.advance_in_set(&mut field, &admissible, t, &mut y, &mut trial, config.dt, MAX_HALVINGS)?;
        if (k + 1) % config.record_stride == 0 {
            times.push(T::cst((k + 1) as f64) * config.dt);
            states.push(MicroState::from_flat(&y, n));
        }
    }
    Ok(Trajectory { meta: TrajectoryMeta::of(platoon), times, states })
}

/// Exact solution in the decoupled regime: with every initial gap wide enough
/// that the potential can never activate, each speed relaxes exponentially to
/// the set-point and each gap moves monotonically to its limit.
///
/// Requires `s_i(0) >= max(lambda - (v_{i-1}(0) - v_i(0)) / omega, lambda)`
/// for every gap; the error names the first offending vehicle.
pub fn closed_form_decoupled<T: Scalar, P: Potential<T>>(
    platoon: &Platoon<T, P>,
    initial: &MicroState<T>,
    t: T,
) -> Result<MicroState<T>> {
    platoon.check_state(initial)?;
    let omega = platoon.omega_rate();
    let lambda = platoon.potential.lambda();
    for (j, &s0) in initial.spacings.iter().enumerate() {
        let dv = initial.speeds[j] - initial.speeds[j + 1];
        let needed = (lambda - dv / omega).max(lambda);
        if s0 < needed {
            return Err(Error::Precondition {
                index: Some(j + 2),
                detail: format!(
                    "initial spacing {} below the decoupling threshold {}",
                    s0.to_f64().unwrap_or(f64::NAN),
                    needed.to_f64().unwrap_or(f64::NAN)
                ),
            });
        }
    }
    let decay = (-omega * t).exp();
    let speeds = initial
        .speeds
        .iter()
        .map(|&v0| platoon.v_star + decay * (v0 - platoon.v_star))
        .collect();
    let spacings = initial
        .spacings
        .iter()
        .enumerate()
        .map(|(j, &s0)| {
            let dv = initial.speeds[j] - initial.speeds[j + 1];
            s0 + dv / omega * (T::one() - decay)
        })
        .collect();
    MicroState::new(spacings, speeds)
}

/// Euclidean distance to the equilibrium set (gaps at least `lambda`, all
/// speeds at the set-point). The set is a product of half-lines and points,
/// so clamping each coordinate gives the exact distance.
pub fn dist_to_equilibrium_set<T: Scalar, P: Potential<T>>(
    platoon: &Platoon<T, P>,
    state: &MicroState<T>,
) -> Result<T> {
    platoon.check_state(state)?;
    let lambda = platoon.potential.lambda();
    let mut sum = T::zero();
    for &s in &state.spacings {
        let gap = (lambda - s).max(T::zero());
        sum += gap * gap;
    }
    for &v in &state.speeds {
        let dv = v - platoon.v_star;
        sum += dv * dv;
    }
    Ok(sum.sqrt())
}

/// Per-vehicle spacing bound audit over a trajectory.
#[derive(Debug, Clone)]
pub struct SpacingBoundReport<T> {
    /// One row per gap: the largest spacing seen and the bound it must stay
    /// under, `max(lambda, s_i(0)) + v_max / mu`.
    pub rows: Vec<SpacingBoundRow<T>>,
    pub tightest_margin: T,
    pub violations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SpacingBoundRow<T> {
    pub vehicle: usize,
    pub max_spacing: T,
    pub bound: T,
    pub margin: T,
}

/// Verifies the a-priori spacing bound at every snapshot and reports the
/// tightest margin. Violations are reported, not raised.
pub fn spacing_bound_audit<T: Scalar>(traj: &Trajectory<T>) -> SpacingBoundReport<T> {
    let meta = &traj.meta;
    let slack = meta.v_max / meta.mu;
    let first = &traj.states[0];
    let mut rows = Vec::with_capacity(meta.n - 1);
    let mut tightest = T::infinity();
    let mut violations = 0;
    for j in 0..meta.n - 1 {
        let bound = meta.lambda.max(first.spacings[j]) + slack;
        let max_spacing = traj
            .states
            .iter()
            .map(|st| st.spacings[j])
            .fold(T::neg_infinity(), T::max);
        let margin = bound - max_spacing;
        if margin < T::zero() {
            violations += 1;
        }
        tightest = tightest.min(margin);
        rows.push(SpacingBoundRow { vehicle: j + 2, max_spacing, bound, margin });
    }
    SpacingBoundReport { rows, tightest_margin: tightest, violations }
}

/// Deterministic generator for seeded experiments.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniformly sampled state: spacings and speeds drawn from open intervals.
/// Sampling happens in `f64` so every scalar type sees the same sequence.
pub fn sample_state<T: Scalar>(
    n: usize,
    spacing_range: (f64, f64),
    speed_range: (f64, f64),
    rng: &mut ChaCha8Rng,
) -> MicroState<T> {
    let spacings = (0..n - 1)
        .map(|_| T::cst(rng.gen_range(spacing_range.0..spacing_range.1)))
        .collect();
    let speeds = (0..n)
        .map(|_| T::cst(rng.gen_range(speed_range.0..speed_range.1)))
        .collect();
    MicroState { spacings, speeds }
}

/// Seeded state satisfying the decoupling precondition: speeds drawn from the
/// given range, each gap set to its threshold plus a sampled slack.
pub fn sample_decoupled_state<T: Scalar, P: Potential<T>>(
    platoon: &Platoon<T, P>,
    speed_range: (f64, f64),
    slack_range: (f64, f64),
    rng: &mut ChaCha8Rng,
) -> MicroState<T> {
    let n = platoon.n;
    let omega = platoon.omega_rate();
    let lambda = platoon.potential.lambda();
    let speeds: Vec<T> = (0..n)
        .map(|_| T::cst(rng.gen_range(speed_range.0..speed_range.1)))
        .collect();
    let spacings = (0..n - 1)
        .map(|j| {
            let dv = speeds[j] - speeds[j + 1];
            let slack = T::cst(rng.gen_range(slack_range.0..slack_range.1));
            (lambda - dv / omega).max(lambda) + slack
        })
        .collect();
    MicroState { spacings, speeds }
}
