use core::ops::{Add, Div, Mul, Neg, Sub};

use super::real::Real;

/// Forward-mode dual number carrying a single directional tangent.
///
/// `Dual<R>` is itself [`Real`] for any `R: Real`, so duals nest (for
/// second derivatives) and wrap tape variables (forward-over-reverse).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<R> {
    pub re: R,
    pub eps: R,
}

impl<R: Real> Dual<R> {
    pub fn new(re: R, eps: R) -> Self {
        Dual { re, eps }
    }

    /// A dual seeded with unit tangent.
    pub fn variable(re: R) -> Self {
        Dual { re, eps: R::one() }
    }

    pub fn constant(re: R) -> Self {
        Dual { re, eps: R::zero() }
    }

    #[inline]
    fn chain(self, re: R, slope: R) -> Self {
        Dual { re, eps: self.eps * slope }
    }
}

impl<R: Real> Add for Dual<R> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Dual { re: self.re + rhs.re, eps: self.eps + rhs.eps }
    }
}

impl<R: Real> Sub for Dual<R> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Dual { re: self.re - rhs.re, eps: self.eps - rhs.eps }
    }
}

impl<R: Real> Mul for Dual<R> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        Dual { re: self.re * rhs.re, eps: self.eps * rhs.re + self.re * rhs.eps }
    }
}

impl<R: Real> Div for Dual<R> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let re = self.re / rhs.re;
        Dual { re, eps: (self.eps - re * rhs.eps) / rhs.re }
    }
}

impl<R: Real> Neg for Dual<R> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Dual { re: -self.re, eps: -self.eps }
    }
}

impl<R: Real> Add<f64> for Dual<R> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: f64) -> Self {
        Dual { re: self.re + rhs, eps: self.eps }
    }
}

impl<R: Real> Sub<f64> for Dual<R> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: f64) -> Self {
        Dual { re: self.re - rhs, eps: self.eps }
    }
}

impl<R: Real> Mul<f64> for Dual<R> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: f64) -> Self {
        Dual { re: self.re * rhs, eps: self.eps * rhs }
    }
}

impl<R: Real> Div<f64> for Dual<R> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: f64) -> Self {
        Dual { re: self.re / rhs, eps: self.eps / rhs }
    }
}

impl<R: Real> Real for Dual<R> {
    fn cst(v: f64) -> Self {
        Dual::constant(R::cst(v))
    }

    fn sin(self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }

    fn cos(self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }

    fn tanh(self) -> Self {
        let t = self.re.tanh();
        self.chain(t, R::one() - t * t)
    }

    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }

    fn ln(self) -> Self {
        self.chain(self.re.ln(), R::one() / self.re)
    }

    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        self.chain(s, R::one() / (s * 2.0))
    }

    fn softplus(self) -> Self {
        self.chain(self.re.softplus(), self.re.sigmoid())
    }

    fn sigmoid(self) -> Self {
        let s = self.re.sigmoid();
        self.chain(s, s * (R::one() - s))
    }

    fn relu(self) -> Self {
        self.chain(self.re.relu(), self.re.heaviside())
    }

    fn heaviside(self) -> Self {
        Dual::constant(self.re.heaviside())
    }

    fn primal(&self) -> f64 {
        self.re.primal()
    }

    fn all_positive(&self) -> bool {
        self.re.all_positive()
    }

    fn all_finite(&self) -> bool {
        self.re.all_finite() && self.eps.all_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_quotient_rules() {
        let x = Dual::variable(3.0);
        let y = x * x / (x + 1.0);
        // d/dx x^2/(x+1) = (x^2 + 2x)/(x+1)^2 = 15/16
        assert!((y.eps - 15.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn nested_duals_give_second_derivative() {
        let x = Dual::new(Dual::variable(0.7), Dual::constant(1.0));
        let y = x.sin();
        assert!((y.eps.eps + libm::sin(0.7)).abs() < 1e-15);
    }
}
