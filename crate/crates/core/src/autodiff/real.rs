use core::fmt::Debug;
use core::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar carrier shared by plain evaluation (`f64`), forward-mode duals and
/// reverse-mode tape variables.
///
/// Every mechanics and integration routine in this crate is written against
/// this trait, so the same code path yields values, tangents, or tape nodes
/// depending on the type it is instantiated with.
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
{
    fn cst(v: f64) -> Self;

    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tanh(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    /// `ln(1 + e^x)`, evaluated without overflow.
    fn softplus(self) -> Self;
    fn sigmoid(self) -> Self;
    fn relu(self) -> Self;
    /// Unit step at zero (derivative of `relu`); carries no derivative.
    fn heaviside(self) -> Self;

    /// Primal value; for batched carriers, the first entry.
    fn primal(&self) -> f64;
    /// True when every primal entry is strictly positive.
    fn all_positive(&self) -> bool;
    fn all_finite(&self) -> bool;

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn one() -> Self {
        Self::cst(1.0)
    }

    fn square(self) -> Self {
        self * self
    }
}

pub(crate) fn softplus_f64(x: f64) -> f64 {
    if x > 30.0 {
        x + libm::exp(-x)
    } else if x < -30.0 {
        libm::exp(x)
    } else {
        libm::log1p(libm::exp(x))
    }
}

pub(crate) fn sigmoid_f64(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

impl Real for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn sin(self) -> Self {
        libm::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        libm::cos(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        libm::tanh(self)
    }
    #[inline]
    fn exp(self) -> Self {
        libm::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        libm::log(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        libm::sqrt(self)
    }
    #[inline]
    fn softplus(self) -> Self {
        softplus_f64(self)
    }
    #[inline]
    fn sigmoid(self) -> Self {
        sigmoid_f64(self)
    }
    #[inline]
    fn relu(self) -> Self {
        if self > 0.0 {
            self
        } else {
            0.0
        }
    }
    #[inline]
    fn heaviside(self) -> Self {
        if self > 0.0 {
            1.0
        } else {
            0.0
        }
    }
    #[inline]
    fn primal(&self) -> f64 {
        *self
    }
    #[inline]
    fn all_positive(&self) -> bool {
        *self > 0.0
    }
    #[inline]
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
}
