//! Scalar abstraction for the numeric kernel.
//!
//! All state vectors, gate matrices and linear-algebra helpers are generic
//! over a real scalar type implementing [`Scalar`]. The crate root exports
//! `f64`-backed aliases which the builders and the CLI use; `f32` works for
//! smoke testing at loose tolerances.

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use std::fmt::{Debug, Display};
use std::iter::Sum;

pub trait Scalar:
    Float + FloatConst + FromPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossless-enough conversion from an `f64` constant.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable")
    }
}

impl<T> Scalar for T where
    T: Float + FloatConst + FromPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
}

pub type Cx<R> = Complex<R>;

pub fn c<R: Scalar>(re: f64, im: f64) -> Cx<R> {
    Complex::new(R::of(re), R::of(im))
}

pub fn czero<R: Scalar>() -> Cx<R> {
    Complex::new(R::zero(), R::zero())
}

pub fn cone<R: Scalar>() -> Cx<R> {
    Complex::new(R::one(), R::zero())
}
