//! Micro-to-macro consistency experiment.
//!
//! A finite platoon is built whose spacing potential is the density potential
//! read through the local-density map `rho = m / (n s)`: per-vehicle mass
//! `m/n`, collision distance `m / (n rho_max)`, interaction range
//! `m / (n rho_bar)`. Vehicles are placed so the initial density at gap
//! midpoints matches the profile exactly, speeds are sampled from the speed
//! profile, and both descriptions are advanced in time. The reported gaps
//! between the empirical fields (spacing reciprocals and vehicle speeds,
//! linearly interpolated) and the macroscopic solution should shrink as the
//! platoon grows; only that trend is asserted, since the continuum limit
//! here is a formal one.


use crate::csvio;
use crate::error::{Error, Result};
use crate::model::{Platoon, Potential};
use crate::numeric::bisect_sign;
use crate::ode::Rk4;
use crate::scalar::Scalar;

use super::characteristics::characteristic_state;
use super::profile::{check_density_profile, check_speed_profile, SmoothProfile};
use super::{MacroParams, PhiPotential};

/// Spacing potential induced by a density potential through `rho = mpv / s`,
/// where `mpv` is the per-vehicle mass.
#[derive(Debug, Clone, Copy)]
pub struct DensityPotential<T> {
    phi: PhiPotential<T>,
    mass_per_vehicle: T,
}

impl<T: Scalar> DensityPotential<T> {
    pub fn new(phi: PhiPotential<T>, mass_per_vehicle: T) -> Result<Self> {
        if !(mass_per_vehicle > T::zero()) {
            return Err(Error::InvalidParams(vec!["mass per vehicle > 0".to_owned()]));
        }
        Ok(Self { phi, mass_per_vehicle })
    }

    fn local_density(&self, s: T) -> T {
        self.mass_per_vehicle / s
    }
}

impl<T: Scalar> Potential<T> for DensityPotential<T> {
    fn cap_l(&self) -> T {
        self.mass_per_vehicle / self.phi.rho_max
    }

    fn lambda(&self) -> T {
        self.mass_per_vehicle / self.phi.rho_bar
    }

    fn value(&self, s: T) -> Result<T> {
        self.domain(s)?;
        self.phi.value(self.local_density(s))
    }

    fn grad(&self, s: T) -> Result<T> {
        self.domain(s)?;
        let r = self.local_density(s);
        Ok(-(r / s) * self.phi.grad(r)?)
    }

    fn hess(&self, s: T) -> Result<T> {
        self.domain(s)?;
        let r = self.local_density(s);
        let two = T::cst(2.0);
        Ok(two * r / (s * s) * self.phi.grad(r)? + r * r / (s * s) * self.phi.hess(r)?)
    }
}

impl<T: Scalar> DensityPotential<T> {
    fn domain(&self, s: T) -> Result<()> {
        if s > self.cap_l() {
            Ok(())
        } else {
            Err(Error::CollisionRegion {
                spacing: s.to_f64().unwrap_or(f64::NAN),
                floor: self.cap_l().to_f64().unwrap_or(f64::NAN),
            })
        }
    }
}

/// Setup of the consistency experiment.
#[derive(Debug, Clone)]
pub struct BridgeConfig<T> {
    /// Platoon sizes to compare; the gap trend is reported across these.
    pub n_values: Vec<usize>,
    /// Window the platoon initially covers (rearmost vehicle at the left end).
    pub window: (T, T),
    /// Window the fields are compared on; must stay inside the platoon hull
    /// at every output time.
    pub compare_window: (T, T),
    /// Output times, non-decreasing.
    pub times: Vec<T>,
    /// Points of the common comparison grid.
    pub grid_points: usize,
    /// Micro integration step.
    pub dt: T,
}

impl<T: Scalar> BridgeConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.n_values.is_empty() || self.n_values.iter().any(|&n| n < 20) {
            bad.push("n_values non-empty with every n >= 20".to_owned());
        }
        if !(self.window.1 > self.window.0) {
            bad.push("window must be non-degenerate".to_owned());
        }
        if !(self.compare_window.1 > self.compare_window.0) {
            bad.push("compare_window must be non-degenerate".to_owned());
        }
        if self.times.is_empty() || self.times.windows(2).any(|w| w[1] < w[0]) {
            bad.push("times non-empty and non-decreasing".to_owned());
        }
        if self.grid_points < 2 {
            bad.push("grid_points >= 2".to_owned());
        }
        if !(self.dt > T::zero()) {
            bad.push("dt > 0".to_owned());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(bad))
        }
    }
}

/// Field gaps for one platoon size at one time.
#[derive(Debug, Clone, Copy)]
pub struct BridgeRow<T> {
    pub n: usize,
    pub t: T,
    pub linf_rho: T,
    pub l1_rho: T,
    pub linf_speed: T,
    pub l1_speed: T,
}

/// All rows of the experiment, ordered by platoon size then time.
#[derive(Debug, Clone)]
pub struct BridgeReport<T> {
    pub rows: Vec<BridgeRow<T>>,
}

impl<T: Scalar> BridgeReport<T> {
    /// CSV export: `n,time,linf_rho,l1_rho,linf_v,l1_v`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,time,linf_rho,l1_rho,linf_v,l1_v\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.n,
                csvio::fmt(r.t),
                csvio::fmt(r.linf_rho),
                csvio::fmt(r.l1_rho),
                csvio::fmt(r.linf_speed),
                csvio::fmt(r.l1_speed),
            ));
        }
        out
    }

    /// The density-gap trend across platoon sizes at a given time.
    pub fn linf_rho_by_n(&self, t: T) -> Vec<(usize, T)>
    where
        T: PartialEq,
    {
        self.rows
            .iter()
            .filter(|r| r.t == t)
            .map(|r| (r.n, r.linf_rho))
            .collect()
    }
}

/// Runs the consistency experiment for every platoon size.
pub fn micro_macro_bridge<T: Scalar>(
    rho0: &dyn SmoothProfile<T>,
    v0: &dyn SmoothProfile<T>,
    params: &MacroParams<T>,
    config: &BridgeConfig<T>,
) -> Result<BridgeReport<T>> {
    config.validate()?;
    check_density_profile(rho0)?;
    check_speed_profile(v0, params.omega)?;
    let mut rows = Vec::new();
    for &n in &config.n_values {
        rows.extend(run_for_size(rho0, v0, params, config, n)?);
    }
    Ok(BridgeReport { rows })
}

fn run_for_size<T: Scalar>(
    rho0: &dyn SmoothProfile<T>,
    v0: &dyn SmoothProfile<T>,
    params: &MacroParams<T>,
    config: &BridgeConfig<T>,
    n: usize,
) -> Result<Vec<BridgeRow<T>>> {
    let mpv = params.m_total / T::cst(n as f64);
    let potential = DensityPotential::new(params.phi(), mpv)?;
    let platoon = Platoon {
        mu: params.mu_eff(),
        v_star: params.v_star,
        v_max: params.v_max,
        softening: params.softening(),
        potential,
        n,
    };

    // Equal-mass placement: the rearmost vehicle sits at the window's left
    // end, and each gap solves s * rho0(midpoint) = m/n.
    let bounds = rho0.bounds();
    let pad = T::cst(1e-9);
    let mut positions = vec![T::zero(); n];
    positions[n - 1] = config.window.0;
    for idx in (1..n).rev() {
        let rear = positions[idx];
        let lo = mpv / bounds.sup_value * (T::one() - pad);
        let hi = mpv / bounds.inf_value * (T::one() + pad);
        let half = T::cst(0.5);
        let s = bisect_sign(
            |s| s * rho0.value(rear + half * s) - mpv,
            lo,
            hi,
            T::cst(1e-13) * (T::one() + hi),
        );
        positions[idx - 1] = rear + s;
    }

    // Augmented state: leader position, then spacings, then speeds.
    let mut y = Vec::with_capacity(2 * n);
    y.push(positions[0]);
    for idx in 1..n {
        y.push(positions[idx - 1] - positions[idx]);
    }
    for &x in &positions {
        y.push(v0.value(x));
    }
    let (s_part, v_part) = y[1..].split_at(n - 1);
    if !platoon.contains_parts(s_part, v_part, T::zero()) {
        return Err(Error::Construction(format!(
            "initial platoon of size {n} leaves the admissible set (profiles too dense or speeds out of range)"
        )));
    }

    let mut grads = vec![T::zero(); n - 1];
    let mut field = |_t: T, y: &[T], dy: &mut [T]| {
        let (s, v) = y[1..].split_at(n - 1);
        dy[0] = v[0];
        let (ds, dv) = dy[1..].split_at_mut(n - 1);
        platoon.field_parts(s, v, ds, dv, &mut grads)
    };
    let tol = crate::micro::speed_box_tol(platoon.v_max);
    let cap_l = platoon.potential.cap_l();
    let v_max = platoon.v_max;
    let admissible = move |y: &[T]| {
        y[1..n].iter().all(|&s| s > cap_l)
            && y[n..].iter().all(|&v| v >= -tol && v <= v_max + tol)
    };

    let mut rk = Rk4::new(2 * n);
    let mut trial = vec![T::zero(); 2 * n];
    let mut t = T::zero();
    let time_eps = T::cst(1e-12);
    let mut rows = Vec::with_capacity(config.times.len());
    for &target in &config.times {
        while t < target - time_eps {
            let dt = config.dt.min(target - t);
            rk.advance_in_set(&mut field, &admissible, t, &mut y, &mut trial, dt, 20)?;
            t = t + dt;
        }
        rows.push(compare_fields(rho0, v0, params, config, n, mpv, target, &y)?);
    }
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
fn compare_fields<T: Scalar>(
    rho0: &dyn SmoothProfile<T>,
    v0: &dyn SmoothProfile<T>,
    params: &MacroParams<T>,
    config: &BridgeConfig<T>,
    n: usize,
    mpv: T,
    t: T,
    y: &[T],
) -> Result<BridgeRow<T>> {
    let half = T::cst(0.5);
    // Reconstruct positions (descending) from the leader and the gaps.
    let mut positions = Vec::with_capacity(n);
    positions.push(y[0]);
    for j in 0..n - 1 {
        let prev = positions[j];
        positions.push(prev - y[1 + j]);
    }
    // Ascending empirical samples: speeds at positions, densities at gap
    // midpoints (spacing reciprocals). Positions are strictly descending
    // because every gap stays above the collision distance.
    let speed_xs: Vec<T> = positions.iter().rev().copied().collect();
    let speed_ys: Vec<T> = y[n..].iter().rev().copied().collect();
    let mut rho_xs = Vec::with_capacity(n - 1);
    let mut rho_ys = Vec::with_capacity(n - 1);
    for j in (0..n - 1).rev() {
        rho_xs.push(half * (positions[j] + positions[j + 1]));
        rho_ys.push(mpv / y[1 + j]);
    }

    let (lo, hi) = config.compare_window;
    if rho_xs[0] > lo || *rho_xs.last().unwrap() < hi || speed_xs[0] > lo
        || *speed_xs.last().unwrap() < hi
    {
        return Err(Error::Construction(format!(
            "comparison window not covered by the platoon hull at t = {}",
            t.to_f64().unwrap_or(f64::NAN)
        )));
    }

    let points = config.grid_points;
    let dx = (hi - lo) / T::cst((points - 1) as f64);
    let mut linf_rho = T::zero();
    let mut l1_rho = T::zero();
    let mut linf_speed = T::zero();
    let mut l1_speed = T::zero();
    for j in 0..points {
        let x = lo + dx * T::cst(j as f64);
        let (rho_macro, v_macro) =
            characteristic_state(t, x, rho0, v0, params.omega, params.v_star)?;
        let rho_micro = interp(&rho_xs, &rho_ys, x);
        let v_micro = interp(&speed_xs, &speed_ys, x);
        let rho_gap = (rho_micro - rho_macro).abs();
        let v_gap = (v_micro - v_macro).abs();
        linf_rho = linf_rho.max(rho_gap);
        linf_speed = linf_speed.max(v_gap);
        l1_rho += rho_gap * dx;
        l1_speed += v_gap * dx;
    }
    Ok(BridgeRow { n, t, linf_rho, l1_rho, linf_speed, l1_speed })
}

/// Piecewise-linear interpolation on an ascending grid; the caller
/// guarantees `x` lies inside the hull.
fn interp<T: Scalar>(xs: &[T], ys: &[T], x: T) -> T {
    let mut lo = 0usize;
    let mut hi = xs.len() - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if xs[mid] <= x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w = (x - xs[lo]) / (xs[hi] - xs[lo]);
    ys[lo] + w * (ys[hi] - ys[lo])
}
