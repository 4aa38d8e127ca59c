//! Scalar abstraction: every numeric routine in this crate is generic over a
//! floating-point type implementing [`Real`].

use num_traits as nt;

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    nt::Float
    + nt::FloatConst
    + nt::FromPrimitive
    + nt::NumAssign
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + std::fmt::LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Shorthand for building constants from `f64` literals.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("constant not representable")
    }

    /// Lossy view as `f64`, used for diagnostics and error payloads.
    fn as_f64(self) -> f64 {
        nt::NumCast::from(self).unwrap_or(f64::NAN)
    }

    fn two() -> Self {
        Self::one() + Self::one()
    }

    fn half() -> Self {
        Self::one() / Self::two()
    }
}

impl Real for f32 {}
impl Real for f64 {}
