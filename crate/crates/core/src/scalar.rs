//! Scalar abstraction shared by every numerical module.
//!
//! All kernels are written against [`Real`], which is implemented for `f32`
//! and `f64`. Tolerances that guard numerical integrity scale with the
//! precision of the scalar.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating point type usable by the simulation and regression kernels.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Display + LowerExp + Debug + Send + Sync + 'static
{
    /// Truncation tolerance for matrix-exponential series.
    const SERIES_TOL: f64;
    /// Largest admissible norm drift or imaginary residue.
    const INTEGRITY_TOL: f64;
}

impl Real for f64 {
    const SERIES_TOL: f64 = 1e-12;
    const INTEGRITY_TOL: f64 = 1e-10;
}

impl Real for f32 {
    const SERIES_TOL: f64 = 1e-6;
    const INTEGRITY_TOL: f64 = 1e-4;
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    <T as FromPrimitive>::from_f64(x).expect("f64 literal representable")
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    ToPrimitive::to_f64(&x).unwrap_or(f64::NAN)
}

pub type C<T> = Complex<T>;

#[inline]
pub fn cplx<T: Real>(re: T, im: T) -> C<T> {
    Complex::new(re, im)
}

#[inline]
pub fn czero<T: Real>() -> C<T> {
    Complex::new(T::zero(), T::zero())
}

/// `|z|` without requiring `num_traits::Float`.
#[inline]
pub fn cabs<T: Real>(z: C<T>) -> T {
    z.re.hypot(z.im)
}

/// `e^z`.
#[inline]
pub fn cexp<T: Real>(z: C<T>) -> C<T> {
    let r = z.re.exp();
    Complex::new(r * z.im.cos(), r * z.im.sin())
}

/// `r e^{iθ}`.
#[inline]
pub fn polar<T: Real>(r: T, theta: T) -> C<T> {
    Complex::new(r * theta.cos(), r * theta.sin())
}
