//! Leader-disturbance benchmark: the disturbed bidirectional platoon, a
//! collision-free Follow-the-Leader baseline, and sup-norm amplification
//! factors swept over frequency and platoon size.
//!
//! The disturbed system replaces the leader by an exogenous speed deviation
//! `d(t)`; the remaining vehicles keep their bidirectional controller. How
//! far `|v_i - v*|` and `|V'(s_i)|` travel down the string, relative to
//! `||d||_inf`, measures string stability.

use rayon::prelude::*;

use crate::csvio;
use crate::error::{Error, Result};
use crate::micro::{speed_box_tol, MicroState, Trajectory, TrajectoryMeta};
use crate::model::{ModelParams, Platoon, Potential};
use crate::numeric::bisect_monotone;
use crate::ode::Rk4;
use crate::scalar::Scalar;

/// Sinusoidal leader-speed disturbance `d(t) = alpha sin(omega_bar t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceSpec<T> {
    /// Amplitude (m/s); admissible range is `[-v_star, v_max - v_star]`.
    pub alpha: T,
    /// Angular frequency (rad/s).
    pub omega_bar: T,
}

impl<T: Scalar> DisturbanceSpec<T> {
    pub fn new(alpha: T, omega_bar: T, v_star: T, v_max: T) -> Result<Self> {
        let mut bad = Vec::new();
        if !(alpha >= -v_star && alpha <= v_max - v_star) {
            bad.push(format!(
                "alpha in [-v_star, v_max - v_star]: {} not in [{}, {}]",
                alpha.to_f64().unwrap_or(f64::NAN),
                (-v_star).to_f64().unwrap_or(f64::NAN),
                (v_max - v_star).to_f64().unwrap_or(f64::NAN),
            ));
        }
        if !(omega_bar > T::zero()) {
            bad.push("omega_bar > 0".to_owned());
        }
        if !bad.is_empty() {
            return Err(Error::InvalidParams(bad));
        }
        Ok(Self { alpha, omega_bar })
    }

    pub fn signal(&self, t: T) -> T {
        self.alpha * (self.omega_bar * t).sin()
    }

    /// Sup norm of the disturbance, taken analytically: sampled peaks of a
    /// sinusoid always undershoot.
    pub fn sup_norm(&self) -> T {
        self.alpha.abs()
    }
}

fn check_sizes(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParams(vec!["n >= 2".to_owned()]));
    }
    Ok(())
}

/// Drives a follower-chain system (state `[s_2..s_n | v_2..v_n]`) on a fixed
/// grid, invoking the observer at the initial state and after every step.
fn drive_chain<T: Scalar>(
    dim: usize,
    y: &mut [T],
    dt: T,
    steps: usize,
    field: &mut impl FnMut(T, &[T], &mut [T]) -> Result<()>,
    admissible: &impl Fn(&[T]) -> bool,
    observe: &mut impl FnMut(T, &[T]) -> Result<()>,
) -> Result<()> {
    let mut rk = Rk4::new(dim);
    let mut trial = vec![T::zero(); dim];
    observe(T::zero(), y)?;
    for k in 0..steps {
        let t = T::cst(k as f64) * dt;
        rk.advance_in_set(field, admissible, t, y, &mut trial, dt, 20)?;
        observe(T::cst((k + 1) as f64) * dt, y)?;
    }
    Ok(())
}

fn disturbed_field<'a, T: Scalar, P: Potential<T>>(
    platoon: &'a Platoon<T, P>,
    spec: &'a DisturbanceSpec<T>,
    grads: &'a mut Vec<T>,
) -> impl FnMut(T, &[T], &mut [T]) -> Result<()> + 'a {
    let links = platoon.n - 1;
    move |t: T, y: &[T], dy: &mut [T]| {
        let (s, v) = y.split_at(links);
        let (ds, dv) = dy.split_at_mut(links);
        for j in 0..links {
            grads[j] = platoon.potential.grad(s[j])?;
        }
        ds[0] = platoon.v_star - v[0] + spec.signal(t);
        for j in 1..links {
            ds[j] = v[j - 1] - v[j];
        }
        for j in 0..links - 1 {
            let force = grads[j] - grads[j + 1];
            dv[j] = -(platoon.mu + platoon.gain(force)) * (v[j] - platoon.v_star) + force;
        }
        let last = links - 1;
        dv[last] = -(platoon.mu + platoon.gain(grads[last])) * (v[last] - platoon.v_star)
            + grads[last];
        Ok(())
    }
}

/// Integrates the disturbed bidirectional platoon from its equilibrium
/// (gaps at the interaction range, speeds at the set-point) and records the
/// trajectory; the leader speed column is `v* + d(t)`.
pub fn simulate_disturbed<T: Scalar, P: Potential<T>>(
    platoon: &Platoon<T, P>,
    spec: &DisturbanceSpec<T>,
    dt: T,
    horizon: T,
    record_stride: usize,
) -> Result<Trajectory<T>> {
    check_sizes(platoon.n)?;
    let links = platoon.n - 1;
    let lambda = platoon.potential.lambda();
    let mut y = vec![lambda; links];
    y.extend(std::iter::repeat(platoon.v_star).take(links));

    let mut grads = vec![T::zero(); links];
    let mut field = disturbed_field(platoon, spec, &mut grads);
    let tol = speed_box_tol(platoon.v_max);
    let cap_l = platoon.potential.cap_l();
    let v_max = platoon.v_max;
    let admissible = move |y: &[T]| {
        y[..links].iter().all(|&s| s > cap_l)
            && y[links..].iter().all(|&v| v >= -tol && v <= v_max + tol)
    };

    let steps = (horizon / dt).to_f64().unwrap_or(0.0).round() as usize;
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut observe = |t: T, y: &[T]| -> Result<()> {
        let k = (t / dt).to_f64().unwrap_or(0.0).round() as usize;
        if k % record_stride == 0 {
            let mut speeds = Vec::with_capacity(platoon.n);
            speeds.push(platoon.v_star + spec.signal(t));
            speeds.extend_from_slice(&y[links..]);
            times.push(t);
            states.push(MicroState { spacings: y[..links].to_vec(), speeds });
        }
        Ok(())
    };
    drive_chain(2 * links, &mut y, dt, steps, &mut field, &admissible, &mut observe)?;
    Ok(Trajectory { meta: TrajectoryMeta::of(platoon), times, states })
}

/// Streaming amplification measurement for the disturbed bidirectional
/// platoon: running sups over every accepted step, no trajectory storage.
pub fn disturbed_amplification<T: Scalar, P: Potential<T>>(
    platoon: &Platoon<T, P>,
    spec: &DisturbanceSpec<T>,
    dt: T,
    horizon: T,
) -> Result<AmplificationReport<T>> {
    check_sizes(platoon.n)?;
    let links = platoon.n - 1;
    let lambda = platoon.potential.lambda();
    let mut y = vec![lambda; links];
    y.extend(std::iter::repeat(platoon.v_star).take(links));

    let mut grads = vec![T::zero(); links];
    let mut field = disturbed_field(platoon, spec, &mut grads);
    let tol = speed_box_tol(platoon.v_max);
    let cap_l = platoon.potential.cap_l();
    let v_max = platoon.v_max;
    let admissible = move |y: &[T]| {
        y[..links].iter().all(|&s| s > cap_l)
            && y[links..].iter().all(|&v| v >= -tol && v <= v_max + tol)
    };

    let steps = (horizon / dt).to_f64().unwrap_or(0.0).round() as usize;
    let mut sup = SupTracker::new(platoon, links);
    let mut observe = |_t: T, y: &[T]| sup.update(y);
    drive_chain(2 * links, &mut y, dt, steps, &mut field, &admissible, &mut observe)?;
    sup.report(spec, horizon)
}

struct SupTracker<'a, T, P> {
    platoon: &'a Platoon<T, P>,
    links: usize,
    speed_sup: Vec<T>,
    force_sup: Vec<T>,
}

impl<'a, T: Scalar, P: Potential<T>> SupTracker<'a, T, P> {
    fn new(platoon: &'a Platoon<T, P>, links: usize) -> Self {
        Self {
            platoon,
            links,
            speed_sup: vec![T::zero(); links],
            force_sup: vec![T::zero(); links],
        }
    }

    fn update(&mut self, y: &[T]) -> Result<()> {
        for j in 0..self.links {
            let dv = (y[self.links + j] - self.platoon.v_star).abs();
            if dv > self.speed_sup[j] {
                self.speed_sup[j] = dv;
            }
            let f = self.platoon.potential.grad(y[j])?.abs();
            if f > self.force_sup[j] {
                self.force_sup[j] = f;
            }
        }
        Ok(())
    }

    fn report(self, spec: &DisturbanceSpec<T>, horizon: T) -> Result<AmplificationReport<T>> {
        let norm = spec.sup_norm();
        if norm <= T::zero() {
            return Err(Error::ZeroAmplitude);
        }
        Ok(AmplificationReport {
            gammas: self.speed_sup.iter().map(|&s| s / norm).collect(),
            deltas: self.force_sup.iter().map(|&s| s / norm).collect(),
            alpha: spec.alpha,
            omega_bar: spec.omega_bar,
            horizon,
        })
    }
}

/// Parameters of the collision-free Follow-the-Leader baseline controller.
///
/// The gain profile ramps up linearly from the onset `b`, plateaus at
/// `g_max`, and decays exponentially past `zeta`; the controller drives each
/// speed towards the spacing-dependent cruise speed `G(s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FtlParams<T> {
    /// Lower integration limit of the cruise-speed map (m).
    pub a: T,
    /// Total gain (1/s).
    pub k: T,
    /// Ramp onset parameter (m).
    pub beta_ftl: T,
    /// Decay onset (m).
    pub zeta: T,
    /// Gain plateau (1/s).
    pub g_max: T,
    /// Ramp offset (m); the published display leaves it unassigned, and only
    /// `b = beta_ftl` makes the profile continuous, so that is the default.
    pub b: T,
}

impl<T: Scalar> FtlParams<T> {
    /// Standard construction with the ramp offset tied to the onset.
    pub fn new(a: T, k: T, beta_ftl: T, zeta: T, g_max: T) -> Result<Self> {
        Self::with_offset(a, k, beta_ftl, zeta, g_max, beta_ftl)
    }

    pub fn with_offset(a: T, k: T, beta_ftl: T, zeta: T, g_max: T, b: T) -> Result<Self> {
        let p = Self { a, k, beta_ftl, zeta, g_max, b };
        let mut bad = Vec::new();
        if !(p.beta_ftl > p.a && p.a > T::zero()) {
            bad.push("beta_ftl > a > 0".to_owned());
        }
        if !(p.k > p.g_max && p.g_max > T::zero()) {
            bad.push("k > g_max > 0".to_owned());
        }
        if !(p.zeta > p.g_max + p.b) {
            bad.push("zeta > g_max + b".to_owned());
        }
        if !(p.b >= p.a) {
            bad.push("b >= a".to_owned());
        }
        if bad.is_empty() {
            Ok(p)
        } else {
            Err(Error::InvalidParams(bad))
        }
    }

    /// Piecewise gain profile: zero, linear ramp, plateau, exponential tail.
    pub fn gbar(&self, r: T) -> T {
        if r <= self.b {
            T::zero()
        } else if r <= self.g_max + self.b {
            r - self.b
        } else if r <= self.zeta {
            self.g_max
        } else {
            self.g_max * (self.zeta - r).exp()
        }
    }

    /// Cruise-speed map `G(s)`: the exact integral of the gain profile from
    /// `a`, quadratic on the ramp, affine on the plateau, saturating tail.
    pub fn g_integral(&self, s: T) -> T {
        let half = T::cst(0.5);
        if s <= self.b {
            return T::zero();
        }
        let ramp_top = self.g_max + self.b;
        if s <= ramp_top {
            let r = s - self.b;
            return half * r * r;
        }
        let ramp_area = half * self.g_max * self.g_max;
        if s <= self.zeta {
            return ramp_area + self.g_max * (s - ramp_top);
        }
        let plateau_area = self.g_max * (self.zeta - ramp_top);
        ramp_area + plateau_area + self.g_max * (T::one() - (self.zeta - s).exp())
    }

    /// Largest reachable cruise speed, `lim G(s)`.
    pub fn g_limit(&self) -> T {
        let half = T::cst(0.5);
        half * self.g_max * self.g_max
            + self.g_max * (self.zeta - self.g_max - self.b)
            + self.g_max
    }

    /// Spacing at which the cruise speed equals `w`; bisection on the
    /// strictly increasing part of the map.
    pub fn g_inverse(&self, w: T) -> Result<T> {
        if !(w > T::zero() && w < self.g_limit()) {
            return Err(Error::Domain {
                what: "cruise speed",
                value: w.to_f64().unwrap_or(f64::NAN),
                domain: "(0, g_limit)",
            });
        }
        // Beyond zeta the map saturates; log-scale the bracket end so even
        // speeds close to the limit are covered.
        let gap = (self.g_limit() - w) / self.g_max;
        let hi = if w <= self.g_integral(self.zeta) {
            self.zeta
        } else {
            self.zeta - gap.ln() + T::one()
        };
        let bracket = bisect_monotone(|s| self.g_integral(s), self.b, hi, w, T::cst(1e-12), true);
        Ok(bracket.midpoint())
    }
}

/// Initial spacing for the baseline runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FtlInit {
    /// Start at the bidirectional model's equilibrium spacing (the
    /// interaction range), accepting the small cruise-speed mismatch there.
    AtInteractionRange,
    /// Start at the baseline's own equilibrium `G^{-1}(v*)`.
    AtCruiseEquilibrium,
}

fn ftl_initial<T: Scalar, P: Potential<T>>(
    ftl: &FtlParams<T>,
    platoon: &Platoon<T, P>,
    init: FtlInit,
) -> Result<T> {
    match init {
        FtlInit::AtInteractionRange => Ok(platoon.potential.lambda()),
        FtlInit::AtCruiseEquilibrium => ftl.g_inverse(platoon.v_star),
    }
}

fn ftl_field<'a, T: Scalar>(
    ftl: &'a FtlParams<T>,
    v_star: T,
    links: usize,
    spec: &'a DisturbanceSpec<T>,
) -> impl FnMut(T, &[T], &mut [T]) -> Result<()> + 'a {
    move |t: T, y: &[T], dy: &mut [T]| {
        let (s, v) = y.split_at(links);
        let (ds, dv) = dy.split_at_mut(links);
        let d = spec.signal(t);
        ds[0] = v_star - v[0] + d;
        let g0 = ftl.gbar(s[0]);
        dv[0] = (ftl.k - g0) * ftl.g_integral(s[0]) + g0 * (v_star + d) - ftl.k * v[0];
        for j in 1..links {
            ds[j] = v[j - 1] - v[j];
            let g = ftl.gbar(s[j]);
            dv[j] = (ftl.k - g) * ftl.g_integral(s[j]) + g * v[j - 1] - ftl.k * v[j];
        }
        Ok(())
    }
}

fn ftl_admissible<T: Scalar>(links: usize) -> impl Fn(&[T]) -> bool {
    move |y: &[T]| y[..links].iter().all(|&s| s > T::zero()) && y.iter().all(|v| v.is_finite())
}

/// Integrates the Follow-the-Leader baseline under the same disturbance and
/// records the trajectory (leader speed column `v* + d(t)`).
pub fn simulate_ftl<T: Scalar, P: Potential<T>>(
    ftl: &FtlParams<T>,
    platoon: &Platoon<T, P>,
    spec: &DisturbanceSpec<T>,
    dt: T,
    horizon: T,
    record_stride: usize,
    init: FtlInit,
) -> Result<Trajectory<T>> {
    check_sizes(platoon.n)?;
    let links = platoon.n - 1;
    let s0 = ftl_initial(ftl, platoon, init)?;
    let mut y = vec![s0; links];
    y.extend(std::iter::repeat(platoon.v_star).take(links));
    let mut field = ftl_field(ftl, platoon.v_star, links, spec);
    let admissible = ftl_admissible(links);

    let steps = (horizon / dt).to_f64().unwrap_or(0.0).round() as usize;
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut observe = |t: T, y: &[T]| -> Result<()> {
        let k = (t / dt).to_f64().unwrap_or(0.0).round() as usize;
        if k % record_stride == 0 {
            let mut speeds = Vec::with_capacity(platoon.n);
            speeds.push(platoon.v_star + spec.signal(t));
            speeds.extend_from_slice(&y[links..]);
            times.push(t);
            states.push(MicroState { spacings: y[..links].to_vec(), speeds });
        }
        Ok(())
    };
    drive_chain(2 * links, &mut y, dt, steps, &mut field, &admissible, &mut observe)?;
    Ok(Trajectory { meta: TrajectoryMeta::of(platoon), times, states })
}

/// Streaming amplification measurement for the baseline. The spacing factor
/// uses the bidirectional model's potential as the common force lens.
pub fn ftl_amplification<T: Scalar, P: Potential<T>>(
    ftl: &FtlParams<T>,
    platoon: &Platoon<T, P>,
    spec: &DisturbanceSpec<T>,
    dt: T,
    horizon: T,
    init: FtlInit,
) -> Result<AmplificationReport<T>> {
    check_sizes(platoon.n)?;
    let links = platoon.n - 1;
    let s0 = ftl_initial(ftl, platoon, init)?;
    let mut y = vec![s0; links];
    y.extend(std::iter::repeat(platoon.v_star).take(links));
    let mut field = ftl_field(ftl, platoon.v_star, links, spec);
    let admissible = ftl_admissible(links);

    let steps = (horizon / dt).to_f64().unwrap_or(0.0).round() as usize;
    let mut sup = SupTracker::new(platoon, links);
    let mut observe = |_t: T, y: &[T]| sup.update(y);
    drive_chain(2 * links, &mut y, dt, steps, &mut field, &admissible, &mut observe)?;
    sup.report(spec, horizon)
}

/// Per-vehicle amplification factors: `gammas[j]` and `deltas[j]` belong to
/// vehicle `j + 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplificationReport<T> {
    pub gammas: Vec<T>,
    pub deltas: Vec<T>,
    pub alpha: T,
    pub omega_bar: T,
    pub horizon: T,
}

impl<T: Scalar> AmplificationReport<T> {
    /// Factor of the last vehicle in the string.
    pub fn gamma_last(&self) -> T {
        *self.gammas.last().expect("at least one follower")
    }

    pub fn delta_last(&self) -> T {
        *self.deltas.last().expect("at least one follower")
    }
}

/// Computes amplification factors from a recorded disturbed trajectory, with
/// sups over the recorded snapshots.
pub fn amplification_factors<T: Scalar, P: Potential<T>>(
    traj: &Trajectory<T>,
    platoon: &Platoon<T, P>,
    spec: &DisturbanceSpec<T>,
) -> Result<AmplificationReport<T>> {
    let norm = spec.sup_norm();
    if norm <= T::zero() {
        return Err(Error::ZeroAmplitude);
    }
    let links = platoon.n - 1;
    let mut speed_sup = vec![T::zero(); links];
    let mut force_sup = vec![T::zero(); links];
    for state in &traj.states {
        for j in 0..links {
            speed_sup[j] = speed_sup[j].max((state.speeds[j + 1] - platoon.v_star).abs());
            force_sup[j] = force_sup[j].max(platoon.potential.grad(state.spacings[j])?.abs());
        }
    }
    Ok(AmplificationReport {
        gammas: speed_sup.iter().map(|&s| s / norm).collect(),
        deltas: force_sup.iter().map(|&s| s / norm).collect(),
        alpha: spec.alpha,
        omega_bar: spec.omega_bar,
        horizon: *traj.times.last().unwrap_or(&T::zero()),
    })
}

/// Which closed-loop model a sweep cell runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Inviscid,
    FollowTheLeader,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Inviscid => "inviscid",
            ModelKind::FollowTheLeader => "ftl",
        }
    }
}

/// Sweep axes: every combination of frequency, platoon size, and model runs
/// as one independent cell.
#[derive(Debug, Clone)]
pub struct SweepGrid<T> {
    pub omega_bars: Vec<T>,
    pub sizes: Vec<usize>,
    pub models: Vec<ModelKind>,
}

/// Shared per-cell settings.
#[derive(Debug, Clone, Copy)]
pub struct SweepConfig<T> {
    pub alpha: T,
    pub dt: T,
    /// Lower bound on the measurement window (s).
    pub horizon_floor: T,
    /// Number of disturbance periods the window must cover.
    pub periods: T,
    pub ftl_init: FtlInit,
}

impl<T: Scalar> SweepConfig<T> {
    /// Defaults: `dt = 1e-3`, window `max(400 s, 20 periods)`, baseline
    /// started at the interaction range.
    pub fn new(alpha: T) -> Self {
        Self {
            alpha,
            dt: T::cst(1e-3),
            horizon_floor: T::cst(400.0),
            periods: T::cst(20.0),
            ftl_init: FtlInit::AtInteractionRange,
        }
    }

    /// Measurement window for a given frequency.
    pub fn horizon(&self, omega_bar: T) -> T {
        let two_pi = T::cst(2.0 * std::f64::consts::PI);
        self.horizon_floor.max(self.periods * two_pi / omega_bar)
    }
}

/// One completed sweep cell; failures are carried, not raised.
#[derive(Debug, Clone)]
pub struct SweepCell<T> {
    pub model: ModelKind,
    pub n: usize,
    pub omega_bar: T,
    pub alpha: T,
    pub outcome: Result<AmplificationReport<T>>,
}

/// All sweep cells, ordered by grid index (frequency, then size, then model).
#[derive(Debug, Clone)]
pub struct SweepTable<T> {
    pub cells: Vec<SweepCell<T>>,
}

impl<T: Scalar> SweepTable<T> {
    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.outcome.is_err()).count()
    }

    pub fn find(&self, model: ModelKind, n: usize, omega_bar: T) -> Option<&SweepCell<T>> {
        self.cells
            .iter()
            .find(|c| c.model == model && c.n == n && c.omega_bar == omega_bar)
    }

    /// CSV export: `model,n,omega_bar,alpha,i,gamma,delta`, one row per
    /// vehicle of each successful cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,n,omega_bar,alpha,i,gamma,delta\n");
        for cell in &self.cells {
            let Ok(report) = &cell.outcome else { continue };
            for (j, (g, d)) in report.gammas.iter().zip(&report.deltas).enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    cell.model.as_str(),
                    cell.n,
                    csvio::fmt(cell.omega_bar),
                    csvio::fmt(cell.alpha),
                    j + 2,
                    csvio::fmt(*g),
                    csvio::fmt(*d),
                ));
            }
        }
        out
    }

    /// Last-vehicle summary: `model,n,omega_bar,alpha,gamma_nn,delta_nn`.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("model,n,omega_bar,alpha,gamma_nn,delta_nn\n");
        for cell in &self.cells {
            let Ok(report) = &cell.outcome else { continue };
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                cell.model.as_str(),
                cell.n,
                csvio::fmt(cell.omega_bar),
                csvio::fmt(cell.alpha),
                csvio::fmt(report.gamma_last()),
                csvio::fmt(report.delta_last()),
            ));
        }
        out
    }
}

/// Runs every grid cell independently (in parallel) and assembles the table
/// in grid order. Per-cell failures are captured in the cell outcome.
pub fn sweep<T: Scalar>(
    base: &ModelParams<T>,
    ftl: &FtlParams<T>,
    grid: &SweepGrid<T>,
    config: &SweepConfig<T>,
) -> SweepTable<T> {
    let mut coords = Vec::new();
    for &omega_bar in &grid.omega_bars {
        for &n in &grid.sizes {
            for &model in &grid.models {
                coords.push((model, n, omega_bar));
            }
        }
    }
    let cells = coords
        .into_par_iter()
        .map(|(model, n, omega_bar)| {
            let outcome = run_cell(base, ftl, model, n, omega_bar, config);
            SweepCell { model, n, omega_bar, alpha: config.alpha, outcome }
        })
        .collect();
    SweepTable { cells }
}

fn run_cell<T: Scalar>(
    base: &ModelParams<T>,
    ftl: &FtlParams<T>,
    model: ModelKind,
    n: usize,
    omega_bar: T,
    config: &SweepConfig<T>,
) -> Result<AmplificationReport<T>> {
    let params = ModelParams { n, ..*base };
    params.validate()?;
    let platoon = params.platoon();
    let spec = DisturbanceSpec::new(config.alpha, omega_bar, params.v_star, params.v_max)?;
    let horizon = config.horizon(omega_bar);
    match model {
        ModelKind::Inviscid => disturbed_amplification(&platoon, &spec, config.dt, horizon),
        ModelKind::FollowTheLeader => {
            ftl_amplification(ftl, &platoon, &spec, config.dt, horizon, config.ftl_init)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    fn bench_params(n: usize) -> ModelParams<f64> {
        ModelParams::new(2.0, 30.0, 35.0, 5.1, 61.0, 2.0, n).unwrap()
    }

    fn bench_ftl() -> FtlParams<f64> {
        FtlParams::new(5.1, 1.2, 34.4, 64.43, 1.15).unwrap()
    }

    #[test]
    fn spec_enforces_the_admissible_amplitude_range() {
        assert!(DisturbanceSpec::new(-2.5, 0.1, 30.0, 35.0).is_ok());
        assert!(DisturbanceSpec::new(5.0, 0.1, 30.0, 35.0).is_ok());
        assert!(DisturbanceSpec::new(5.1, 0.1, 30.0, 35.0).is_err());
        assert!(DisturbanceSpec::new(-30.5, 0.1, 30.0, 35.0).is_err());
        assert!(DisturbanceSpec::new(1.0, 0.0, 30.0, 35.0).is_err());
    }

    #[test]
    fn zero_amplitude_keeps_the_equilibrium_and_has_no_factors() {
        let platoon = bench_params(4).platoon();
        let spec = DisturbanceSpec::new(0.0, 0.1, 30.0, 35.0).unwrap();
        let traj = simulate_disturbed(&platoon, &spec, 1e-3, 1.0, 100).unwrap();
        for st in &traj.states {
            assert!(st.spacings.iter().all(|&s| s == 61.0));
            assert!(st.speeds.iter().all(|&v| v == 30.0));
        }
        assert!(matches!(
            amplification_factors(&traj, &platoon, &spec),
            Err(Error::ZeroAmplitude)
        ));
    }

    #[test]
    fn positive_amplitude_decouples_the_followers() {
        // The leading gap only ever widens, the potential never activates,
        // and every follower stays pinned at the set-point.
        let params = ModelParams::<f64>::new(0.5, 30.0, 35.0, 5.0, 20.0, 0.2, 3).unwrap();
        let platoon = params.platoon();
        let spec = DisturbanceSpec::new(2.5, 0.25, 30.0, 35.0).unwrap();
        let traj = simulate_disturbed(&platoon, &spec, 1e-3, 30.0, 10).unwrap();
        for (t, st) in traj.times.iter().zip(&traj.states) {
            let expect = 20.0 + 2.5 / 0.25 * (1.0 - (0.25 * t).cos());
            assert!((st.spacings[0] - expect).abs() < 1e-8, "gap at t={t}");
            assert!(st.spacings[0] >= 20.0 - 1e-12);
            assert!((st.speeds[1] - 30.0).abs() <= 1e-9);
            assert!((st.speeds[2] - 30.0).abs() <= 1e-9);
        }
        let report = amplification_factors(&traj, &platoon, &spec).unwrap();
        assert!(report.gammas.iter().all(|&g| g <= 1e-9));
        assert!(report.deltas.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn gain_profile_is_continuous_and_zero_below_the_offset() {
        let ftl = bench_ftl();
        for r in [0.0, 1.0, 5.1, 20.0, 34.4] {
            assert_eq!(ftl.gbar(r), 0.0, "ramp active too early at {r}");
        }
        let eps = 1e-9;
        let joints = [34.4, 34.4 + 1.15, 64.43];
        for &r in &joints {
            let left = ftl.gbar(r - eps);
            let right = ftl.gbar(r + eps);
            assert!((left - right).abs() < 1e-6, "jump at {r}: {left} vs {right}");
        }
    }

    #[test]
    fn cruise_speed_map_matches_hand_value_and_quadrature() {
        let ftl = bench_ftl();
        assert!((ftl.g_integral(61.0) - 29.92875).abs() < 1e-9);

        // Independent check: trapezoid quadrature of the gain profile.
        for &s in &[40.0, 61.0, 70.0] {
            let m = 1_000_000usize;
            let h = (s - ftl.a) / m as f64;
            let mut acc = 0.5 * (ftl.gbar(ftl.a) + ftl.gbar(s));
            for j in 1..m {
                acc += ftl.gbar(ftl.a + h * j as f64);
            }
            let quad = acc * h;
            assert!(
                (quad - ftl.g_integral(s)).abs() < 1e-6,
                "quadrature mismatch at {s}: {quad} vs {}",
                ftl.g_integral(s)
            );
        }
    }

    #[test]
    fn cruise_speed_inverse_round_trips() {
        let ftl = bench_ftl();
        for &w in &[0.5, 10.0, 29.92875, 30.0, 33.0, 34.5] {
            let s = ftl.g_inverse(w).unwrap();
            assert!((ftl.g_integral(s) - w).abs() < 1e-9, "round trip at {w}");
        }
        assert!((ftl.g_inverse(30.0).unwrap() - 61.0619565217).abs() < 1e-6);
        assert!(ftl.g_inverse(ftl.g_limit() + 1.0).is_err());
    }

    #[test]
    fn baseline_is_stationary_at_its_own_equilibrium() {
        let ftl = bench_ftl();
        let platoon = bench_params(4).platoon();
        let spec = DisturbanceSpec::new(0.0, 0.1, 30.0, 35.0).unwrap();
        let traj = simulate_ftl(&ftl, &platoon, &spec, 1e-3, 10.0, 1000, FtlInit::AtCruiseEquilibrium)
            .unwrap();
        for st in &traj.states {
            for &v in &st.speeds {
                assert!((v - 30.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn baseline_started_at_the_interaction_range_settles_back() {
        // G(61) misses the set-point by about 0.071 m/s; the transient stays
        // of that order and decays.
        let ftl = bench_ftl();
        let platoon = bench_params(3).platoon();
        let spec = DisturbanceSpec::new(0.0, 0.1, 30.0, 35.0).unwrap();
        let traj = simulate_ftl(&ftl, &platoon, &spec, 1e-3, 80.0, 1000, FtlInit::AtInteractionRange)
            .unwrap();
        let mut worst = 0.0f64;
        for st in &traj.states {
            for &v in &st.speeds[1..] {
                worst = worst.max((v - 30.0).abs());
            }
        }
        assert!(worst > 1e-3, "expected a visible transient, got {worst}");
        assert!(worst < 0.2, "transient out of scale: {worst}");
        let last = traj.states.last().unwrap();
        for &v in &last.speeds[1..] {
            assert!((v - 30.0).abs() < 1e-2);
        }
    }

    #[test]
    fn single_cell_sweep_equals_a_direct_run() {
        let base = bench_params(3);
        let ftl = bench_ftl();
        let mut config = SweepConfig::new(-2.5);
        config.horizon_floor = 30.0;
        config.periods = 2.0;
        let grid = SweepGrid {
            omega_bars: vec![0.5],
            sizes: vec![3],
            models: vec![ModelKind::Inviscid],
        };
        let table = sweep(&base, &ftl, &grid, &config);
        assert_eq!(table.cells.len(), 1);
        let cell = table.find(ModelKind::Inviscid, 3, 0.5).unwrap();
        let report = cell.outcome.as_ref().unwrap();

        let platoon = base.platoon();
        let spec = DisturbanceSpec::new(-2.5, 0.5, 30.0, 35.0).unwrap();
        let direct =
            disturbed_amplification(&platoon, &spec, 1e-3, config.horizon(0.5)).unwrap();
        assert_eq!(report, &direct);

        // Streaming sups equal recorded-trajectory sups at stride one.
        let traj = simulate_disturbed(&platoon, &spec, 1e-3, config.horizon(0.5), 1).unwrap();
        let from_traj = amplification_factors(&traj, &platoon, &spec).unwrap();
        assert_eq!(report.gammas, from_traj.gammas);
        assert_eq!(report.deltas, from_traj.deltas);
    }

    #[test]
    fn sweeps_capture_per_cell_failures_without_aborting() {
        let base = bench_params(3);
        let ftl = bench_ftl();
        let mut config = SweepConfig::new(-2.5);
        config.horizon_floor = 5.0;
        config.periods = 1.0;
        let grid = SweepGrid {
            omega_bars: vec![0.5],
            sizes: vec![1, 3], // n = 1 is invalid and must fail in place
            models: vec![ModelKind::Inviscid],
        };
        let table = sweep(&base, &ftl, &grid, &config);
        assert_eq!(table.cells.len(), 2);
        assert_eq!(table.failures(), 1);
        assert!(table.find(ModelKind::Inviscid, 3, 0.5).unwrap().outcome.is_ok());
    }

    #[test]
    fn sweep_output_is_deterministic() {
        let base = bench_params(3);
        let ftl = bench_ftl();
        let mut config = SweepConfig::new(-2.5);
        config.horizon_floor = 20.0;
        config.periods = 1.0;
        let grid = SweepGrid {
            omega_bars: vec![0.5, 1.0],
            sizes: vec![3, 4],
            models: vec![ModelKind::Inviscid, ModelKind::FollowTheLeader],
        };
        let a = sweep(&base, &ftl, &grid, &config);
        let b = sweep(&base, &ftl, &grid, &config);
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.summary_csv(), b.summary_csv());
        assert_eq!(a.failures(), 0);
        for cell in &a.cells {
            let report = cell.outcome.as_ref().unwrap();
            for (g, d) in report.gammas.iter().zip(&report.deltas) {
                assert!(g.is_finite() && d.is_finite() && *g >= 0.0 && *d >= 0.0);
            }
        }
    }

    #[test]
    fn doubling_the_window_leaves_factors_stable() {
        let base = bench_params(3);
        let platoon = base.platoon();
        let spec = DisturbanceSpec::new(-2.5, 0.5, 30.0, 35.0).unwrap();
        let config = SweepConfig::new(-2.5);
        let horizon = config.horizon(0.5);
        let once = disturbed_amplification(&platoon, &spec, 1e-3, horizon).unwrap();
        let twice = disturbed_amplification(&platoon, &spec, 1e-3, 2.0 * horizon).unwrap();
        for (a, b) in once.gammas.iter().zip(&twice.gammas) {
            assert!((a - b).abs() <= 0.01 * b.max(1e-12), "gamma drifted: {a} vs {b}");
        }
        for (a, b) in once.deltas.iter().zip(&twice.deltas) {
            assert!((a - b).abs() <= 0.01 * b.max(1e-12), "delta drifted: {a} vs {b}");
        }
    }
}
