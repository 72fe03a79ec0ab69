//! Numerical workbench for a bidirectional inviscid adaptive-cruise-control
//! platoon and its macroscopic counterpart.
//!
//! The crate has three layers:
//!
//! * the closed-loop vehicle model itself ([`model`]) together with a
//!   fixed-step integrator, a decoupled closed-form solution, and state-space
//!   audits ([`micro`]);
//! * stability certificates: the mechanical energy, a strict Lyapunov
//!   function assembled from envelope bounds of the spacing potential, and
//!   trajectory audits of the certificate inequalities ([`lyapunov`]), plus
//!   the leader-disturbance amplification benchmark ([`disturbance`]);
//! * the macroscopic traffic model that the platoon converges to as the
//!   vehicle count grows: an exact characteristics solution in the
//!   small-density regime, a first-order finite-difference solver for the
//!   full model, and a micro-to-macro consistency experiment
//!   ([`macroscopic`]).
//!
//! Everything is generic over the floating-point type through [`Scalar`];
//! the aliases below fix the common instantiations.

pub mod csvio;
pub mod disturbance;
pub mod error;
pub mod lyapunov;
pub mod macroscopic;
pub mod micro;
pub mod model;
pub mod numeric;
pub mod ode;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision instantiations used by the CLI and most experiments.
pub type ModelParamsF64 = model::ModelParams<f64>;
pub type MicroStateF64 = micro::MicroState<f64>;
pub type TrajectoryF64 = micro::Trajectory<f64>;
pub type IntegratorConfigF64 = micro::IntegratorConfig<f64>;
pub type LyapunovConfigF64 = lyapunov::LyapunovConfig<f64>;
pub type MacroParamsF64 = macroscopic::MacroParams<f64>;

/// Single-precision instantiations; mainly useful for quick smoke runs.
pub type ModelParamsF32 = model::ModelParams<f32>;
pub type MicroStateF32 = micro::MicroState<f32>;
pub type TrajectoryF32 = micro::Trajectory<f32>;
pub type IntegratorConfigF32 = micro::IntegratorConfig<f32>;
pub type LyapunovConfigF32 = lyapunov::LyapunovConfig<f32>;
pub type MacroParamsF32 = macroscopic::MacroParams<f32>;
