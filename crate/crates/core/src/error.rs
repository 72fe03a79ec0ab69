/// Errors raised by the simulation and certificate machinery.
///
/// Scalar payloads are converted to `f64` for reporting so the error type
/// stays independent of the working precision.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// A constructor invariant failed; each entry names one violated rule.
    #[error("invalid parameters: {}", .0.join("; "))]
    InvalidParams(Vec<String>),

    /// A spacing query entered the collision region where the potential is
    /// undefined. Always signals a caller bug or an integrator failure.
    #[error("spacing {spacing} is inside the collision region (requires s > {floor})")]
    CollisionRegion { spacing: f64, floor: f64 },

    /// A state handed to an operation is outside the admissible state space.
    #[error("state outside the admissible state space: {0}")]
    OutsideStateSpace(String),

    /// A stated precondition of an operation does not hold.
    #[error("precondition violated{}: {detail}", index.map(|i| format!(" at vehicle {i}")).unwrap_or_default())]
    Precondition { index: Option<usize>, detail: String },

    /// Step halving hit its depth limit without re-entering the state space.
    #[error("integration failed near t = {t}: {halvings} step halvings without re-entering the state space (step size far too large)")]
    IntegrationFailure { t: f64, halvings: u32 },

    /// Trajectory snapshots too far apart for finite-difference estimation.
    #[error("trajectory too sparse for finite differences: snapshot spacing {spacing} exceeds {limit}")]
    TooSparse { spacing: f64, limit: f64 },

    /// The exponential weights overflow the scalar type for this platoon size.
    #[error("platoon size {n} overflows the certificate weights in the working precision")]
    PlatoonTooLarge { n: usize },

    /// Amplification factors are undefined for a zero-amplitude disturbance.
    #[error("amplification factors are undefined for zero disturbance amplitude")]
    ZeroAmplitude,

    /// A declared profile bound was violated while bracketing an inverse.
    #[error("profile bound error: {0}")]
    ProfileBound(String),

    /// A scalar argument left the domain of a function.
    #[error("{what} = {value} outside domain {domain}")]
    Domain { what: &'static str, value: f64, domain: &'static str },

    /// The finite-difference solver produced values outside the admissible box.
    #[error("solver blow-up at t = {t}: {detail}")]
    SolverBlowup { t: f64, detail: String },

    /// Grid configuration violates the CFL restriction.
    #[error("CFL number {cfl} exceeds the allowed maximum 0.9")]
    CflViolation { cfl: f64 },

    /// The micro platoon could not be constructed from the given profiles.
    #[error("platoon construction failed: {0}")]
    Construction(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
