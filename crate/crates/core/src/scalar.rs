//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Real scalar usable by the field, loss and optimizer code.
///
/// Implemented for `f32`, `f64`, double-double `TwoFloat` and [`Dual`](crate::dual::Dual) numbers over
/// either, so the same physics can be evaluated in single precision, double
/// precision, or with a forward-mode derivative attached.
pub trait Scalar: Float + FloatConst + FromPrimitive + Debug + Send + Sync + 'static {
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal must be representable")
    }

    /// Primal value as `f64`, dropping any derivative part.
    fn value(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn value(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn value(self) -> f64 {
        self
    }
}

/// Double-double precision, used for finite-difference reference gradients.
impl Scalar for twofloat::TwoFloat {
    /// `TwoFloat`'s `from_f64` is the truncating num-traits default.
    #[inline]
    fn lit(x: f64) -> Self {
        x.into()
    }

    #[inline]
    fn value(self) -> f64 {
        self.into()
    }
}

#[inline]
pub(crate) fn deg_to_rad<T: Scalar>(deg: T) -> T {
    deg * (T::PI() / T::lit(180.0))
}

/// Maps an angle in degrees onto `[0, 360)`.
pub fn normalize_degrees<T: Scalar>(deg: T) -> T {
    let full = T::lit(360.0);
    let wrapped = deg - full * (deg / full).floor();
    if wrapped >= full || wrapped < T::zero() {
        T::zero()
    } else {
        wrapped
    }
}
