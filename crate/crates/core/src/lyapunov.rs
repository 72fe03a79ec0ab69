//! Energy and strict-certificate machinery for the platoon.
//!
//! The mechanical energy `H` (kinetic part relative to the set-point plus the
//! spacing potential) decays along every solution but is not strict: its rate
//! vanishes whenever all speeds sit at the set-point, compressed or not. The
//! strict certificate `W = R(H) H - sum_i 4^i V'(s_i)(v_i - v*)` repairs that
//! with an energy-dependent weight `R` assembled from envelope bounds of the
//! potential: the inverse of `V`, the monotone envelopes of `|V'|` and `V''`,
//! the ratio bound `(V')^2 / V`, and a cap on the relaxation gains. All
//! envelopes are evaluated through monotonicity fast paths, verified on a
//! sample grid at construction, with a dense-grid fallback for potentials
//! that lose those monotonicity properties.


use crate::csvio;
use crate::error::{Error, Result};
use crate::micro::{MicroState, Trajectory};
use crate::model::{Platoon, Potential};
use crate::numeric::bisect_monotone;
use crate::scalar::Scalar;

/// Mechanical energy relative to an observer moving at the set-point.
pub fn energy<T: Scalar, P: Potential<T>>(
    platoon: &Platoon<T, P>,
    state: &MicroState<T>,
) -> Result<T> {
    platoon.check_state(state)?;
    energy_unchecked(platoon, state)
}

pub(crate) fn energy_unchecked<T: Scalar, P: Potential<T>>(
    platoon: &Platoon<T, P>,
    state: &MicroState<T>,
) -> Result<T> {
    let half = T::cst(0.5);
    let mut kinetic = T::zero();
    for &v in &state.speeds {
        let dv = v - platoon.v_star;
        kinetic += dv * dv;
    }
    let mut potential = T::zero();
    for &s in &state.spacings {
        potential += platoon.potential.value(s)?;
    }
    Ok(half * kinetic + potential)
}

/// Exact rate of change of the energy along solutions:
/// `-sum_i k_i (v_i - v*)^2`, never positive.
pub fn energy_rate<T: Scalar, P: Potential<T>>(
    platoon: &Platoon<T, P>,
    state: &MicroState<T>,
) -> Result<T> {
    let gains = platoon.controller_gains(state)?;
    let mut rate = T::zero();
    for (k, &v) in gains.iter().zip(&state.speeds) {
        let dv = v - platoon.v_star;
        rate -= *k * dv * dv;
    }
    Ok(rate)
}

/// Configuration of the strict certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovConfig<T> {
    /// Strictness parameter of the decay inequality.
    pub beta: T,
    /// Reference half-step for finite-difference rate estimates (s).
    pub fd_dt: T,
    /// Grid resolution for numeric envelope maximization.
    pub envelope_samples: usize,
}

impl<T: Scalar> LyapunovConfig<T> {
    /// Defaults: `fd_dt = 1e-4`, 4096 envelope samples.
    pub fn new(beta: T) -> Self {
        Self { beta, fd_dt: T::cst(1e-4), envelope_samples: 4096 }
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.beta > T::zero()) {
            bad.push("beta > 0".to_owned());
        }
        if !(self.fd_dt > T::zero()) {
            bad.push("fd_dt > 0".to_owned());
        }
        if self.envelope_samples < 64 {
            bad.push("envelope_samples >= 64".to_owned());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(bad))
        }
    }
}

/// Evaluable certificate ingredients for one platoon.
///
/// Immutable after construction and safe to share across threads.
#[derive(Debug, Clone)]
pub struct Certificate<T, P> {
    platoon: Platoon<T, P>,
    config: LyapunovConfig<T>,
    four_pow_n: T,
    four_pow_2n: T,
    // Monotonicity fast paths, verified on a sample grid at construction.
    b1_monotone: bool,
    b2_monotone: bool,
    ratio_monotone: bool,
    gain_convex: bool,
}

struct Ingredients<T> {
    gamma: T,
    phi: T,
    phi_tilde: T,
}

impl<T: Scalar, P: Potential<T>> Certificate<T, P> {
    pub fn new(platoon: Platoon<T, P>, config: LyapunovConfig<T>) -> Result<Self> {
        config.validate()?;
        let four = T::cst(4.0);
        let four_pow_n = four.powi(platoon.n as i32);
        let four_pow_2n = four.powi(2 * platoon.n as i32);
        if !four_pow_2n.is_finite() {
            return Err(Error::PlatoonTooLarge { n: platoon.n });
        }
        let mut cert = Self {
            platoon,
            config,
            four_pow_n,
            four_pow_2n,
            b1_monotone: false,
            b2_monotone: false,
            ratio_monotone: false,
            gain_convex: false,
        };
        cert.verify_fast_paths()?;
        Ok(cert)
    }

    pub fn platoon(&self) -> &Platoon<T, P> {
        &self.platoon
    }

    pub fn config(&self) -> &LyapunovConfig<T> {
        &self.config
    }

    /// Cross-term weight of one vehicle: `4^i` for vehicle `i` (2-based gap
    /// indexing, leader excluded).
    pub fn vehicle_weight(&self, vehicle: usize) -> T {
        T::cst(4.0).powi(vehicle as i32)
    }

    /// The platoon-size weights `4^n` and `4^{2n}` appearing in the
    /// certificate tables.
    pub fn size_weights(&self) -> (T, T) {
        (self.four_pow_n, self.four_pow_2n)
    }

    fn verify_fast_paths(&mut self) -> Result<()> {
        let pot = &self.platoon.potential;
        let cap_l = pot.cap_l();
        let lambda = pot.lambda();
        let m = self.config.envelope_samples;
        let span = lambda - cap_l;
        let mut b1 = Vec::with_capacity(m);
        let mut b2 = Vec::with_capacity(m);
        let mut ratio = Vec::with_capacity(m);
        for j in 1..=m {
            let s = cap_l + span * T::cst(j as f64 / m as f64);
            b1.push(pot.grad(s)?.abs());
            b2.push(pot.hess(s)?);
            ratio.push(self.guarded_ratio(s)?);
        }
        self.b1_monotone = non_increasing(&b1);
        self.b2_monotone = non_increasing(&b2);
        self.ratio_monotone = non_increasing(&ratio);
        self.gain_convex = self.verify_gain_convexity();
        Ok(())
    }

    fn verify_gain_convexity(&self) -> bool {
        let probes: &[f64] = &[0.0, 1e-3, 1e-1, 1.0, 10.0, 1e3, 1e6, 1e9];
        let g = |z: T| self.platoon.gain(z);
        let half = T::cst(0.5);
        for (i, &a) in probes.iter().enumerate() {
            for &b in &probes[i..] {
                for (x, y) in [
                    (T::cst(a), T::cst(b)),
                    (T::cst(-a), T::cst(b)),
                    (T::cst(-a), T::cst(-b)),
                ] {
                    let mid = (x + y) * half;
                    let chord = (g(x) + g(y)) * half;
                    let slack = T::cst(1e-9) * (T::one() + chord.abs());
                    if g(mid) > chord + slack {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// `(V'(d))^2 / V(d)`, with the indeterminate form at the interaction
    /// range resolved by its limit `2 V''(d)`.
    fn guarded_ratio(&self, d: T) -> Result<T> {
        let pot = &self.platoon.potential;
        if d >= pot.lambda() {
            return Ok(T::zero());
        }
        let value = pot.value(d)?;
        if value < T::cst(1e-30) {
            return Ok(T::cst(2.0) * pot.hess(d)?);
        }
        let grad = pot.grad(d)?;
        Ok(grad * grad / value)
    }

    /// Inverse of the potential restricted to `(cap_l, lambda]`: the unique
    /// spacing with `V(s) = r`, by bisection to absolute 1e-12. `r <= 0`
    /// returns the interaction range exactly.
    pub fn v_inverse(&self, r: T) -> T {
        let pot = &self.platoon.potential;
        let lambda = pot.lambda();
        if r <= T::zero() {
            return lambda;
        }
        let cap_l = pot.cap_l();
        let bracket = bisect_monotone(
            |s| pot.value(s).unwrap_or_else(|_| T::infinity()),
            cap_l,
            lambda,
            r,
            T::cst(1e-12),
            false,
        );
        // The upper end stays strictly above the collision distance, so
        // envelope compositions remain inside the potential's domain.
        bracket.hi
    }

    /// Largest `|V'|` over `[s, lambda]`; zero beyond the interaction range.
    pub fn envelope_b1(&self, s: T) -> Result<T> {
        self.envelope(s, self.b1_monotone, |pot, d| pot.grad(d).map(|g| g.abs()))
    }

    /// Largest `V''` over `[s, lambda]`; zero beyond the interaction range.
    pub fn envelope_b2(&self, s: T) -> Result<T> {
        self.envelope(s, self.b2_monotone, |pot, d| pot.hess(d))
    }

    fn envelope(
        &self,
        s: T,
        monotone: bool,
        f: impl Fn(&P, T) -> Result<T>,
    ) -> Result<T> {
        let pot = &self.platoon.potential;
        if s <= pot.cap_l() {
            return Err(Error::Domain {
                what: "envelope argument",
                value: s.to_f64().unwrap_or(f64::NAN),
                domain: "(cap_l, +inf)",
            });
        }
        let lambda = pot.lambda();
        if s >= lambda {
            return Ok(T::zero());
        }
        if monotone {
            return f(pot, s);
        }
        let m = self.config.envelope_samples;
        let mut best = T::zero();
        for j in 0..m {
            let d = s + (lambda - s) * T::cst(j as f64 / (m - 1) as f64);
            best = best.max(f(pot, d)?);
        }
        Ok(best)
    }

    /// Envelope of the ratio `(V')^2 / V` over `[q, lambda)`; zero beyond.
    fn ratio_envelope(&self, q: T) -> T {
        let pot = &self.platoon.potential;
        let lambda = pot.lambda();
        if q >= lambda {
            return T::zero();
        }
        if self.ratio_monotone {
            return self.guarded_ratio(q).unwrap_or_else(|_| T::infinity());
        }
        let m = self.config.envelope_samples;
        let mut best = T::zero();
        for j in 0..m {
            let d = q + (lambda - q) * T::cst(j as f64 / m as f64);
            best = best.max(self.guarded_ratio(d).unwrap_or_else(|_| T::infinity()));
        }
        best
    }

    /// Ratio bound at energy level `r`: `(V'(s_i))^2 <= ratio_gamma(H) V(s_i)`
    /// on every admissible state with energy at most `r`.
    pub fn ratio_gamma(&self, r: T) -> T {
        self.ratio_envelope(self.v_inverse(r))
    }

    /// Largest gain over the forces reachable at energy level `r`; convex
    /// softening reduces the inner maximization to the interval endpoints.
    pub fn gain_cap_phi(&self, r: T) -> T {
        let rho = self.v_inverse(r);
        let c = T::cst(2.0) * self.envelope_b1(rho).expect("inverse stays above cap_l");
        self.platoon.mu + self.gain_max(c)
    }

    fn gain_max(&self, c: T) -> T {
        if self.gain_convex {
            return self.platoon.gain(-c).max(self.platoon.gain(c));
        }
        let m = self.config.envelope_samples;
        let two = T::cst(2.0);
        let mut best = T::neg_infinity();
        for j in 0..=m {
            let z = -c + two * c * T::cst(j as f64 / m as f64);
            best = best.max(self.platoon.gain(z));
        }
        best
    }

    /// Curvature bound at energy level `r`: `V''(s_i) <= hess_cap_phitilde(H)`
    /// on every admissible state with energy at most `r`.
    pub fn hess_cap_phitilde(&self, r: T) -> T {
        let rho = self.v_inverse(r);
        self.envelope_b2(rho).expect("inverse stays above cap_l")
    }

    fn ingredients(&self, r: T) -> Ingredients<T> {
        let rho = self.v_inverse(r);
        let b1 = self.envelope_b1(rho).expect("inverse stays above cap_l");
        Ingredients {
            gamma: self.ratio_envelope(rho),
            phi: self.platoon.mu + self.gain_max(T::cst(2.0) * b1),
            phi_tilde: self.envelope_b2(rho).expect("inverse stays above cap_l"),
        }
    }

    fn weight_from(&self, ing: &Ingredients<T>) -> T {
        let two = T::cst(2.0);
        let seven = T::cst(7.0);
        two + self.four_pow_2n / two * ing.gamma
            + self.four_pow_n * (ing.phi + seven / (two * self.platoon.mu) * ing.phi_tilde)
            + self.config.beta / self.platoon.mu
    }

    fn kappa_from(&self, ing: &Ingredients<T>) -> T {
        T::one() + self.weight_from(ing) + self.four_pow_2n / T::cst(2.0) * ing.gamma
    }

    /// Non-decreasing certificate weight at energy level `r`.
    pub fn weight_r(&self, r: T) -> T {
        self.weight_from(&self.ingredients(r))
    }

    /// Non-decreasing upper comparison function: `W <= kappa(H) H`.
    pub fn kappa(&self, r: T) -> T {
        self.kappa_from(&self.ingredients(r))
    }

    /// The strict certificate value `R(H) H - sum_i 4^i V'(s_i)(v_i - v*)`.
    ///
    /// Sandwiched between `H` and `kappa(H) H` on the state space, and
    /// strictly decaying off the equilibrium set.
    pub fn strict_w(&self, state: &MicroState<T>) -> Result<T> {
        self.platoon.check_state(state)?;
        let h = energy_unchecked(&self.platoon, state)?;
        let weight = self.weight_from(&self.ingredients(h));
        Ok(weight * h - self.cross_term(state)?)
    }

    fn cross_term(&self, state: &MicroState<T>) -> Result<T> {
        let four = T::cst(4.0);
        let mut sum = T::zero();
        for (j, &s) in state.spacings.iter().enumerate() {
            let weight = four.powi((j + 2) as i32);
            sum += weight * self.platoon.potential.grad(s)? * (state.speeds[j + 1] - self.platoon.v_star);
        }
        Ok(sum)
    }

    /// Right-hand side of the decay inequality:
    /// `-beta mu sum_i (v_i - v*)^2 - (1/8) sum_i 4^i (V'(s_i))^2`.
    pub fn decay_rhs(&self, state: &MicroState<T>) -> Result<T> {
        let four = T::cst(4.0);
        let eighth = T::cst(0.125);
        let mut speed_part = T::zero();
        for &v in &state.speeds {
            let dv = v - self.platoon.v_star;
            speed_part += dv * dv;
        }
        let mut force_part = T::zero();
        for (j, &s) in state.spacings.iter().enumerate() {
            let grad = self.platoon.potential.grad(s)?;
            force_part += four.powi((j + 2) as i32) * grad * grad;
        }
        Ok(-self.config.beta * self.platoon.mu * speed_part - eighth * force_part)
    }

    /// Audits the certificate inequalities along a trajectory.
    ///
    /// At every snapshot the sandwich `H <= W <= kappa(H) H` is checked as
    /// evaluated; at every interior snapshot the rate `dW/dt` is estimated by
    /// a centered difference and compared against the decay bound within
    /// `tol_abs + tol_rel |bound|`. Violations are reported, not raised.
    pub fn audit_trajectory(
        &self,
        traj: &Trajectory<T>,
        tol_rel: T,
        tol_abs: T,
    ) -> Result<CertificateReport<T>> {
        if traj.times.len() < 3 {
            return Err(Error::TooSparse {
                spacing: traj.snapshot_dt().to_f64().unwrap_or(f64::NAN),
                limit: f64::NAN,
            });
        }
        let spacing = traj.snapshot_dt();
        let limit = T::cst(10.0) * self.config.fd_dt;
        if spacing > limit * (T::one() + T::cst(1e-9)) {
            return Err(Error::TooSparse {
                spacing: spacing.to_f64().unwrap_or(f64::NAN),
                limit: limit.to_f64().unwrap_or(f64::NAN),
            });
        }

        let count = traj.times.len();
        let mut energies = Vec::with_capacity(count);
        let mut ws = Vec::with_capacity(count);
        let mut kappa_hs = Vec::with_capacity(count);
        let mut sandwich_violations = 0;
        let mut worst_lower_gap = T::infinity();
        let mut worst_upper_gap = T::infinity();
        for state in &traj.states {
            let h = energy_unchecked(&self.platoon, state)?;
            let ing = self.ingredients(h);
            let w = self.weight_from(&ing) * h - self.cross_term(state)?;
            let kh = self.kappa_from(&ing) * h;
            if w < h || w > kh {
                sandwich_violations += 1;
            }
            worst_lower_gap = worst_lower_gap.min(w - h);
            worst_upper_gap = worst_upper_gap.min(kh - w);
            energies.push(h);
            ws.push(w);
            kappa_hs.push(kh);
        }

        let two = T::cst(2.0);
        let mut rows = Vec::with_capacity(count.saturating_sub(2));
        let mut decay_violations = 0;
        let mut worst_decay_margin = T::infinity();
        for k in 1..count - 1 {
            let dw_dt = (ws[k + 1] - ws[k - 1]) / (two * spacing);
            let rhs = self.decay_rhs(&traj.states[k])?;
            let tol = tol_abs + tol_rel * rhs.abs();
            if dw_dt > rhs + tol {
                decay_violations += 1;
            }
            let margin = rhs - dw_dt;
            worst_decay_margin = worst_decay_margin.min(margin);
            rows.push(AuditRow {
                t: traj.times[k],
                energy: energies[k],
                w: ws[k],
                kappa_h: kappa_hs[k],
                dw_dt,
                rhs_bound: rhs,
                margin,
            });
        }
        Ok(CertificateReport {
            rows,
            sandwich_violations,
            decay_violations,
            worst_lower_gap,
            worst_upper_gap,
            worst_decay_margin,
            tol_rel,
            tol_abs,
        })
    }
}

fn non_increasing<T: Scalar>(values: &[T]) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] + T::cst(1e-9) * (T::one() + w[0].abs()))
}

/// One audited interior snapshot.
#[derive(Debug, Clone, Copy)]
pub struct AuditRow<T> {
    pub t: T,
    pub energy: T,
    pub w: T,
    pub kappa_h: T,
    pub dw_dt: T,
    pub rhs_bound: T,
    pub margin: T,
}

/// Outcome of a certificate audit.
#[derive(Debug, Clone)]
pub struct CertificateReport<T> {
    pub rows: Vec<AuditRow<T>>,
    pub sandwich_violations: usize,
    pub decay_violations: usize,
    /// Smallest `W - H` seen (negative means a sandwich violation).
    pub worst_lower_gap: T,
    /// Smallest `kappa(H) H - W` seen.
    pub worst_upper_gap: T,
    /// Smallest `bound - dW/dt` seen (more negative than the tolerance means
    /// a decay violation).
    pub worst_decay_margin: T,
    pub tol_rel: T,
    pub tol_abs: T,
}

impl<T: Scalar> CertificateReport<T> {
    pub fn passed(&self) -> bool {
        self.sandwich_violations == 0 && self.decay_violations == 0
    }

    /// CSV export: `t,H,W,kappaH,dWdt,rhs_bound,margin`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,H,W,kappaH,dWdt,rhs_bound,margin\n");
        for row in &self.rows {
            csvio::push_row(
                &mut out,
                &[row.t, row.energy, row.w, row.kappa_h, row.dw_dt, row.rhs_bound, row.margin],
            );
        }
        out
    }
}
