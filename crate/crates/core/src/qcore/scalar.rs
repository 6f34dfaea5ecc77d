use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Real scalar used throughout the simulator.
///
/// Implemented by `f64` for plain simulation and by
/// [`Dual`](crate::autodiff::Dual) when parameter tangents must be carried
/// through a trajectory.
pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
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
{
    fn cst(v: f64) -> Self;
    fn value(&self) -> f64;

    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn tanh(self) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn one() -> Self {
        Self::cst(1.0)
    }

    fn logistic(self) -> Self {
        // 1 / (1 + e^-x), split by sign to avoid overflow
        if self.value() >= 0.0 {
            let e = (-self).exp();
            (e + 1.0).recip()
        } else {
            let e = self.exp();
            e / (e + 1.0)
        }
    }

    /// `ln(1 + e^x)`.
    fn softplus(self) -> Self {
        if self.value() > 30.0 {
            self + (-self).exp()
        } else {
            (self.exp() + 1.0).ln()
        }
    }

    fn recip(self) -> Self {
        Self::one() / self
    }

    fn square(self) -> Self {
        self * self
    }
}

impl Scalar for f64 {
    #[inline(always)]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline(always)]
    fn value(&self) -> f64 {
        *self
    }
    #[inline(always)]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline(always)]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline(always)]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline(always)]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
}

/// Inverse of [`Scalar::softplus`] on plain floats.
pub fn softplus_inv(y: f64) -> f64 {
    if y > 30.0 {
        y + (-(-y).exp_m1()).ln()
    } else {
        y.exp_m1().ln()
    }
}

/// Inverse of [`Scalar::logistic`] on plain floats.
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squash_inverses() {
        for &y in &[1e-6, 0.1, 1.176, 5.0, 40.0] {
            assert!((softplus_inv(y).softplus() - y).abs() <= 1e-12 * y.max(1.0));
        }
        for &p in &[1e-6, 0.1469, 0.5, 0.99] {
            assert!((logit(p).logistic() - p).abs() < 1e-14);
        }
    }

    #[test]
    fn logistic_extremes_are_finite() {
        assert_eq!(Scalar::logistic(-800.0_f64), 0.0);
        assert_eq!(Scalar::logistic(800.0_f64), 1.0);
        assert!(Scalar::softplus(800.0_f64).is_finite());
    }
}
