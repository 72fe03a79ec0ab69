use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar the whole workbench is generic over.
///
/// Everything numerical in this crate (platoon dynamics, certificates,
/// characteristics, finite differences) is written against this trait so the
/// same code runs at `f32` and `f64`. The shipped experiments and the CLI use
/// `f64`; see the aliases at the crate root.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + std::fmt::Debug + std::fmt::LowerExp + Send + Sync + 'static
{
    /// Converts an `f64` constant into the working scalar type.
    fn cst(x: f64) -> Self {
        Self::from_f64(x).expect("constant not representable in scalar type")
    }

    /// Fractional digits used when formatting CSV fields so that a value
    /// round-trips exactly through its decimal representation.
    fn csv_decimals() -> usize;
}

impl Scalar for f64 {
    // 1 leading + 16 fractional digits = 17 significant digits.
    fn csv_decimals() -> usize {
        16
    }
}

impl Scalar for f32 {
    fn csv_decimals() -> usize {
        8
    }
}
