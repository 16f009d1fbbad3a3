//! Scalar abstraction shared by the plain `f64` evaluation path and the
//! reverse-mode tape in [`crate::autodiff`].
//!
//! Every numeric routine on the model path is written once against [`Real`],
//! so the same code computes values (with `f64`) and gradients (with
//! [`crate::autodiff::Var`]).

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

pub trait Real:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
    /// Lifts a constant. Constants carry no derivative.
    fn cst(v: f64) -> Self;
    /// Primal value.
    fn value(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn recip(self) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn one() -> Self {
        Self::cst(1.0)
    }

    fn square(self) -> Self {
        self * self
    }

    /// `max(self, 0)`, with a zero derivative on the clamped side.
    fn clamp_nonneg(self) -> Self {
        if self.value() > 0.0 {
            self
        } else {
            Self::zero()
        }
    }
}

impl Real for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn recip(self) -> Self {
        1.0 / self
    }
}

/// Sum of a sequence of scalars in iteration order.
pub fn sum<T: Real>(it: impl IntoIterator<Item = T>) -> T {
    it.into_iter().fold(T::zero(), |acc, x| acc + x)
}

/// Inner product of two equally long slices.
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// `ln Σ exp(x_i)` with max-shift. The shift is taken on primal values and
/// cancels analytically, so derivatives are unaffected.
pub fn log_sum_exp<T: Real>(xs: &[T]) -> T {
    let shift = xs
        .iter()
        .map(|x| x.value())
        .fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return T::cst(shift);
    }
    let s = sum(xs.iter().map(|&x| (x - shift).exp()));
    s.ln() + shift
}

pub fn to_values<T: Real>(xs: &[T]) -> Vec<f64> {
    xs.iter().map(|x| x.value()).collect()
}

pub fn lift<T: Real>(xs: &[f64]) -> Vec<T> {
    xs.iter().map(|&x| T::cst(x)).collect()
}
