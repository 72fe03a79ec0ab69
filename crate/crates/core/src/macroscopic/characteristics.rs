//! Exact solution of the small-density macroscopic model by the method of
//! characteristics, the traveling-wave limit of the density, and the audit
//! of the decay estimates.
//!
//! In the small-density regime the model reduces to a forced transport
//! system: speeds relax exponentially to the set-point along characteristic
//! curves, and the density is carried along them with a Jacobian factor. The
//! characteristic foot point comes from inverting a strictly increasing map,
//! which bisection handles to absolute 1e-12.


use crate::error::{Error, Result};
use crate::numeric::bisect_monotone;
use crate::scalar::Scalar;

use super::profile::{check_density_profile, check_speed_profile, SmoothProfile};
use super::MacroParams;

/// Forward characteristic map `P_t(r) = omega r + (1 - e^{-omega t}) v0(r)`;
/// strictly increasing in `r` for admissible speed profiles.
pub fn p_forward<T: Scalar>(
    t: T,
    r: T,
    v0: &dyn SmoothProfile<T>,
    omega: T,
) -> Result<T> {
    check_speed_profile(v0, omega)?;
    let shrink = T::one() - (-omega * t).exp();
    Ok(omega * r + shrink * v0.value(r))
}

fn invert_affine_plus_profile<T: Scalar>(
    y: T,
    shrink: T,
    v0: &dyn SmoothProfile<T>,
    omega: T,
) -> Result<T> {
    let bound = v0.bounds().sup_abs_value();
    let pad = T::cst(1e-9) * (T::one() + y.abs() / omega);
    let lo = (y - bound) / omega - pad;
    let hi = (y + bound) / omega + pad;
    let f = |r: T| omega * r + shrink * v0.value(r);
    if !(f(lo) <= y && f(hi) >= y) {
        return Err(Error::ProfileBound(format!(
            "declared value bound {} fails to bracket the characteristic inverse at {}",
            bound.to_f64().unwrap_or(f64::NAN),
            y.to_f64().unwrap_or(f64::NAN)
        )));
    }
    Ok(bisect_monotone(f, lo, hi, y, T::cst(1e-12), true).midpoint())
}

/// Inverse of the forward map at time `t`: the unique `r` with
/// `P_t(r) = y`, bracketed by the declared value bound of the profile.
pub fn p_invert<T: Scalar>(t: T, y: T, v0: &dyn SmoothProfile<T>, omega: T) -> Result<T> {
    check_speed_profile(v0, omega)?;
    let shrink = T::one() - (-omega * t).exp();
    invert_affine_plus_profile(y, shrink, v0, omega)
}

/// Exact density and speed of the small-density model at `(t, x)`.
pub fn characteristic_state<T: Scalar>(
    t: T,
    x: T,
    rho0: &dyn SmoothProfile<T>,
    v0: &dyn SmoothProfile<T>,
    omega: T,
    v_star: T,
) -> Result<(T, T)> {
    check_speed_profile(v0, omega)?;
    check_density_profile(rho0)?;
    let decay = (-omega * t).exp();
    let shrink = T::one() - decay;
    let y = omega * (x - v_star * t) + v_star * shrink;
    let xi = invert_affine_plus_profile(y, shrink, v0, omega)?;
    let rho = omega * rho0.value(xi) / (omega + shrink * v0.deriv(xi));
    let speed = v_star + decay * (v0.value(xi) - v_star);
    Ok((rho, speed))
}

/// The traveling-wave density profile the solution converges to: evaluated
/// through the time-infinity characteristic map `omega r + v0(r)`.
pub fn traveling_wave<T: Scalar>(
    x: T,
    rho0: &dyn SmoothProfile<T>,
    v0: &dyn SmoothProfile<T>,
    omega: T,
    v_star: T,
) -> Result<T> {
    check_speed_profile(v0, omega)?;
    check_density_profile(rho0)?;
    let zeta = invert_affine_plus_profile(omega * x + v_star, T::one(), v0, omega)?;
    Ok(omega * rho0.value(zeta) / (omega + v0.deriv(zeta)))
}

/// Evaluation grid for the decay audit.
#[derive(Debug, Clone)]
pub struct AuditGrid<T> {
    pub xs: Vec<T>,
    pub times: Vec<T>,
}

impl<T: Scalar> AuditGrid<T> {
    pub fn uniform(x_min: T, x_max: T, points: usize, times: Vec<T>) -> Result<Self> {
        if points < 2 || !(x_max > x_min) || times.is_empty() {
            return Err(Error::InvalidParams(vec![
                "audit grid needs points >= 2, x_max > x_min, and at least one time".into(),
            ]));
        }
        let span = x_max - x_min;
        let xs = (0..points)
            .map(|j| x_min + span * T::cst(j as f64 / (points - 1) as f64))
            .collect();
        Ok(Self { xs, times })
    }
}

/// Constants of the decay estimates, assembled from declared profile bounds.
#[derive(Debug, Clone, Copy)]
pub struct DecayConstants<T> {
    /// `omega + inf v0'`.
    pub gamma: T,
    /// `sup rho0 + sup |v0|`.
    pub cap_k: T,
    /// `sup |rho0'| + sup |v0''|`.
    pub small_c: T,
    /// `sup |v0'|`.
    pub lip_l: T,
    /// Explicit bound on `e^{omega t} |rho - f(x - v* t)|`.
    pub wave_bound: T,
}

/// Per-time audited extremes.
#[derive(Debug, Clone, Copy)]
pub struct DecaySlice<T> {
    pub t: T,
    pub sup_rho: T,
    pub rho_bound: T,
    pub sup_speed_dev: T,
    pub speed_bound: T,
    pub min_rho: T,
    pub max_weighted_wave_gap: T,
}

/// Outcome of the decay audit.
#[derive(Debug, Clone)]
pub struct DecayReport<T> {
    pub slices: Vec<DecaySlice<T>>,
    pub constants: DecayConstants<T>,
    pub violations: Vec<String>,
    /// Whether the small-density premise (slope and density caps) holds.
    pub small_density_premise: bool,
    /// Checked only when the premise holds: density stays under the onset.
    pub density_cap_ok: Option<bool>,
    pub max_weighted_wave_gap: T,
}

impl<T: Scalar> DecayReport<T> {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Audits the decay estimates of the exact solution on a grid: the density
/// bound with its time-dependent denominator, exponential speed decay,
/// positivity, and the weighted traveling-wave gap against its explicit
/// constant. Checks carry a 1e-9 relative slack for rounding; violations are
/// collected, not raised.
pub fn decay_audit<T: Scalar>(
    rho0: &dyn SmoothProfile<T>,
    v0: &dyn SmoothProfile<T>,
    params: &MacroParams<T>,
    grid: &AuditGrid<T>,
) -> Result<DecayReport<T>> {
    check_speed_profile(v0, params.omega)?;
    check_density_profile(rho0)?;
    let omega = params.omega;
    let v_star = params.v_star;
    let rb = rho0.bounds();
    let vb = v0.bounds();

    let gamma = omega + vb.inf_deriv;
    let cap_k = rb.sup_value + vb.sup_abs_value();
    let small_c = rb.sup_abs_deriv() + vb.sup_abs_deriv2;
    let lip_l = vb.sup_abs_deriv();
    let floor = gamma.min(omega);
    let wave_bound = omega / (gamma * floor)
        * (small_c * (cap_k + v_star) * (T::one() + cap_k / floor) + lip_l * cap_k);
    let constants = DecayConstants { gamma, cap_k, small_c, lip_l, wave_bound };

    let slack = T::cst(1e-9);
    let sup_dev0 = vb.sup_dev_from(v_star);
    let mut slices = Vec::with_capacity(grid.times.len());
    let mut violations = Vec::new();
    let mut max_gap = T::zero();
    for &t in &grid.times {
        let decay = (-omega * t).exp();
        let mut sup_rho = T::neg_infinity();
        let mut min_rho = T::infinity();
        let mut sup_speed_dev = T::zero();
        let mut slice_gap = T::zero();
        for &x in &grid.xs {
            let (rho, speed) = characteristic_state(t, x, rho0, v0, omega, v_star)?;
            sup_rho = sup_rho.max(rho);
            min_rho = min_rho.min(rho);
            sup_speed_dev = sup_speed_dev.max((speed - v_star).abs());
            let wave = traveling_wave(x - v_star * t, rho0, v0, omega, v_star)?;
            slice_gap = slice_gap.max((rho - wave).abs() / decay);
        }
        let rho_bound = omega * rb.sup_value / (omega + (T::one() - decay) * vb.inf_deriv);
        let speed_bound = decay * sup_dev0;
        let tf = t.to_f64().unwrap_or(f64::NAN);
        if sup_rho > rho_bound * (T::one() + slack) {
            violations.push(format!("density bound violated at t = {tf}"));
        }
        if sup_speed_dev > speed_bound * (T::one() + slack) + T::cst(1e-300) {
            violations.push(format!("speed decay violated at t = {tf}"));
        }
        if !(min_rho > T::zero()) {
            violations.push(format!("density positivity violated at t = {tf}"));
        }
        if slice_gap > wave_bound * (T::one() + slack) {
            violations.push(format!("traveling-wave gap bound violated at t = {tf}"));
        }
        max_gap = max_gap.max(slice_gap);
        slices.push(DecaySlice {
            t,
            sup_rho,
            rho_bound,
            sup_speed_dev,
            speed_bound,
            min_rho,
            max_weighted_wave_gap: slice_gap,
        });
    }

    // Small-density premise: admissible slope (already enforced) plus the
    // density cap scaled by the slope deficit.
    let premise_slope = vb.inf_deriv > -omega;
    let cap = params.rho_bar * (T::one() + vb.inf_deriv.min(T::zero()) / omega);
    let premise_density = rb.sup_value <= cap;
    let small_density_premise = premise_slope && premise_density;
    let density_cap_ok = if small_density_premise {
        let ok = slices
            .iter()
            .all(|s| s.sup_rho <= params.rho_bar * (T::one() + slack));
        if !ok {
            violations.push("density exceeded the interaction onset despite the small-density premise".into());
        }
        Some(ok)
    } else {
        None
    };

    Ok(DecayReport {
        slices,
        constants,
        violations,
        small_density_premise,
        density_cap_ok,
        max_weighted_wave_gap: max_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::macroscopic::profile::{BumpProfile, ConstantProfile};

    fn example_params() -> MacroParams<f64> {
        MacroParams::new(1.2, 1.0, 2.0, 0.7, 1.0, 1.0, 7.0 / 6.0, 0.1).unwrap()
    }

    fn profiles() -> (BumpProfile<f64>, BumpProfile<f64>) {
        (
            BumpProfile::new(0.1, 5.0, 2).unwrap(),
            BumpProfile::new(1.0, 8.0, 3).unwrap(),
        )
    }

    #[test]
    fn forward_map_is_plain_scaling_at_time_zero() {
        let (_, v0) = profiles();
        for &r in &[-2.0, 0.3, 1.7] {
            assert_eq!(p_forward(0.0, r, &v0, 1.2).unwrap(), 1.2 * r);
        }
        let flat = ConstantProfile { level: 1.0 };
        let p = p_forward(2.0, 0.5, &flat, 1.2).unwrap();
        assert!((p - (0.6 + (1.0 - (-2.4f64).exp()))).abs() < 1e-14);
    }

    #[test]
    fn forward_map_slope_stays_above_the_admissible_floor() {
        let (_, v0) = profiles();
        let omega = 1.2;
        let floor = (omega + v0.bounds().inf_deriv).min(omega);
        let h = 1e-4;
        for &t in &[0.0, 0.5, 2.0] {
            let mut r = -0.5;
            while r < 1.5 {
                let slope = (p_forward(t, r + h, &v0, omega).unwrap()
                    - p_forward(t, r, &v0, omega).unwrap())
                    / h;
                assert!(slope >= floor - 1e-6, "slope {slope} at (t={t}, r={r})");
                r += 0.11;
            }
        }
    }

    #[test]
    fn inverse_round_trips_and_has_the_affine_special_case() {
        let (_, v0) = profiles();
        let omega = 1.2;
        for &t in &[0.0, 0.3, 1.0, 4.0] {
            for &r in &[-1.0, 0.2, 0.5, 0.9, 2.5] {
                let y = p_forward(t, r, &v0, omega).unwrap();
                let back = p_invert(t, y, &v0, omega).unwrap();
                assert!((back - r).abs() < 1e-10, "round trip at (t={t}, r={r})");
            }
        }
        let flat = ConstantProfile { level: 1.0 };
        let y = 3.7;
        let expect = (y - (1.0 - (-1.2f64 * 2.0).exp())) / 1.2;
        assert!((p_invert(2.0, y, &flat, 1.2).unwrap() - expect).abs() < 1e-10);
        assert!((p_invert(0.0, y, &flat, 1.2).unwrap() - y / 1.2).abs() < 1e-10);
    }

    #[test]
    fn lying_value_bounds_are_reported() {
        // A profile that declares a much smaller sup than it attains.
        #[derive(Debug)]
        struct Liar;
        impl SmoothProfile<f64> for Liar {
            fn value(&self, _x: f64) -> f64 {
                10.0
            }
            fn deriv(&self, _x: f64) -> f64 {
                0.0
            }
            fn deriv2(&self, _x: f64) -> f64 {
                0.0
            }
            fn bounds(&self) -> crate::macroscopic::profile::ProfileBounds<f64> {
                crate::macroscopic::profile::ProfileBounds {
                    inf_value: 0.0,
                    sup_value: 0.1,
                    inf_deriv: 0.0,
                    sup_deriv: 0.0,
                    sup_abs_deriv2: 0.0,
                }
            }
        }
        assert!(matches!(
            p_invert(1.0, 0.0, &Liar, 1.2),
            Err(Error::ProfileBound(_))
        ));
    }

    #[test]
    fn characteristics_reproduce_the_initial_data() {
        let (rho0, v0) = profiles();
        for &x in &[-1.0, 0.25, 0.5, 0.75, 3.0] {
            let (rho, v) = characteristic_state(0.0, x, &rho0, &v0, 1.2, 1.0).unwrap();
            assert!((rho - rho0.value(x)).abs() < 1e-9, "rho at {x}");
            assert!((v - v0.value(x)).abs() < 1e-9, "v at {x}");
        }
    }

    #[test]
    fn constant_speed_profiles_translate_the_density_rigidly() {
        let (rho0, _) = profiles();
        let flat = ConstantProfile { level: 1.0 };
        for &t in &[0.5, 1.0, 3.0] {
            for &x in &[0.0, 0.7, 2.2] {
                let (rho, v) = characteristic_state(t, x, &rho0, &flat, 1.2, 1.0).unwrap();
                assert!((rho - rho0.value(x - t)).abs() < 1e-9);
                assert!((v - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn wave_profile_reduces_to_the_density_for_flat_speeds() {
        let (rho0, _) = profiles();
        let flat = ConstantProfile { level: 1.0 };
        for &x in &[-0.5, 0.3, 0.5, 1.8] {
            let f = traveling_wave(x, &rho0, &flat, 1.2, 1.0).unwrap();
            assert!((f - rho0.value(x)).abs() < 1e-9);
        }
    }

    #[test]
    fn wave_profile_is_positive_everywhere_sampled() {
        let (rho0, v0) = profiles();
        let mut x = -3.0;
        while x < 4.0 {
            assert!(traveling_wave(x, &rho0, &v0, 1.2, 1.0).unwrap() > 0.0);
            x += 0.07;
        }
    }

    #[test]
    fn exact_solution_satisfies_the_pde_to_second_order() {
        let (rho0, v0) = profiles();
        let omega = 1.2;
        let v_star = 1.0;
        let mut worst: Vec<f64> = Vec::new();
        for &h in &[0.02, 0.01] {
            let mut max_res = 0.0f64;
            let mut t = 0.5;
            while t <= 1.5 {
                let mut x = -0.5;
                while x <= 2.0 {
                    let at = |tt: f64, xx: f64| {
                        characteristic_state(tt, xx, &rho0, &v0, omega, v_star).unwrap()
                    };
                    let (rho_c, v_c) = at(t, x);
                    let (rho_tp, v_tp) = at(t + h, x);
                    let (rho_tm, v_tm) = at(t - h, x);
                    let (rho_xp, v_xp) = at(t, x + h);
                    let (rho_xm, v_xm) = at(t, x - h);
                    let rho_t = (rho_tp - rho_tm) / (2.0 * h);
                    let rho_x = (rho_xp - rho_xm) / (2.0 * h);
                    let v_t = (v_tp - v_tm) / (2.0 * h);
                    let v_x = (v_xp - v_xm) / (2.0 * h);
                    let r1 = rho_t + v_c * rho_x + rho_c * v_x;
                    let r2 = v_t + v_c * v_x + omega * (v_c - v_star);
                    max_res = max_res.max(r1.abs()).max(r2.abs());
                    x += 0.25;
                }
                t += 0.25;
            }
            worst.push(max_res);
        }
        let order = (worst[0] / worst[1]).log2();
        assert!(order >= 1.8, "observed order {order} from residuals {worst:?}");
    }

    #[test]
    fn decay_audit_passes_on_the_congestion_bump() {
        let (rho0, v0) = profiles();
        let grid = AuditGrid::uniform(-2.0, 8.0, 201, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let report = decay_audit(&rho0, &v0, &example_params(), &grid).unwrap();
        assert!(report.passed(), "violations: {:?}", report.violations);
        assert!(report.small_density_premise);
        assert_eq!(report.density_cap_ok, Some(true));
        assert!(report.max_weighted_wave_gap <= report.constants.wave_bound);
    }

    #[test]
    fn decay_audit_flags_an_unmet_premise_without_failing() {
        let (rho0, v0) = profiles();
        // Tiny onset density: the premise cannot hold, the estimates still do.
        let params = MacroParams::new(1.2, 1.0, 2.0, 0.2, 1.0, 1.0, 7.0 / 6.0, 0.1).unwrap();
        let grid = AuditGrid::uniform(-2.0, 8.0, 101, vec![0.0, 1.0]).unwrap();
        let report = decay_audit(&rho0, &v0, &params, &grid).unwrap();
        assert!(!report.small_density_premise);
        assert_eq!(report.density_cap_ok, None);
        assert!(report.passed());
    }

    #[test]
    fn flat_profiles_meet_the_speed_bound_with_equality_at_zero() {
        let rho0 = ConstantProfile { level: 0.1 };
        let v0 = ConstantProfile { level: 1.0 };
        let grid = AuditGrid::uniform(-1.0, 1.0, 11, vec![0.0, 1.0, 2.0]).unwrap();
        let report = decay_audit(&rho0, &v0, &example_params(), &grid).unwrap();
        assert!(report.passed());
        for s in &report.slices {
            assert_eq!(s.sup_speed_dev, 0.0);
            assert_eq!(s.speed_bound, 0.0);
        }
    }
}
