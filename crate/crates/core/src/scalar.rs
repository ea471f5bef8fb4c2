//! Scalar abstraction shared by every numerical module.
//!
//! The math is written once against [`Real`] and instantiated for `f64`
//! (the default everywhere tolerances are quoted) and `f32`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::ScalarOperand;
use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::{Deserialize, Serialize};

/// Real floating-point scalar usable by all kernels in this crate.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + ScalarOperand
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Conversion from a count or index.
    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    /// Error function. Evaluated in double precision and rounded back.
    #[inline]
    fn erf(self) -> Self {
        Self::lit(libm::erf(self.as_f64()))
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Serialized complex number, `{"re": .., "im": ..}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ComplexRecord {
    pub re: f64,
    pub im: f64,
}

impl ComplexRecord {
    pub fn from_complex<T: Real>(z: Complex<T>) -> Self {
        Self { re: z.re.as_f64(), im: z.im.as_f64() }
    }

    pub fn to_complex<T: Real>(self) -> Complex<T> {
        Complex::new(T::lit(self.re), T::lit(self.im))
    }
}

/// `exp(i·theta)` on the unit circle.
#[inline]
pub fn cis<T: Real>(theta: T) -> Complex<T> {
    let (s, c) = theta.sin_cos();
    Complex::new(c, s)
}

/// Principal argument in `(-π, π]`.
///
/// `atan2` already returns values in `[-π, π]`; the one point on the lower
/// branch (`-π`, produced by a negative real with `-0.0` imaginary part) is
/// folded onto `+π`.
#[inline]
pub fn principal_arg<T: Real>(z: Complex<T>) -> T {
    let a = z.im.atan2(z.re);
    if a <= -T::PI() {
        T::PI()
    } else {
        a
    }
}
