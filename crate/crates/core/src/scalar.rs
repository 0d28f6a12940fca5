//! Floating-point scalar abstraction shared by the statistics, SVM and
//! evaluation code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar usable by the numeric core: `f32` or `f64`.
///
/// The bound combines `num_traits::Float` for elementwise arithmetic with
/// `nalgebra::RealField` so symmetric eigendecompositions work on the same
/// type. Both traits define methods such as `sqrt` and `abs`; call them as
/// `Float::sqrt(x)` inside generic code to disambiguate.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + nalgebra::RealField
    + Copy
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Name written into reports so consumers can tell runs apart.
    const NAME: &'static str;

    /// Lossy conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 literal representable")
    }

    /// Lossless-ish widening to `f64` for reporting.
    fn to_f64_lossy(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Lossy conversion from a count.
    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("count representable")
    }

    /// Smallest asymmetry tolerated by matrix routines, relative to the
    /// largest absolute entry.
    fn symmetry_tolerance() -> Self {
        let floor = Self::lit(1e-12);
        let machine = <Self as Float>::epsilon() * Self::lit(100.0);
        if machine > floor {
            machine
        } else {
            floor
        }
    }
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";
}
