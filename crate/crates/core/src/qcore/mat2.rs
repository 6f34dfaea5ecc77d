//! Complex numbers and 2×2 complex matrices over a generic [`Scalar`].

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cx<T> {
    pub re: T,
    pub im: T,
}

impl<T: Scalar> Cx<T> {
    #[inline(always)]
    pub fn new(re: T, im: T) -> Self {
        Self { re, im }
    }

    #[inline(always)]
    pub fn real(re: T) -> Self {
        Self { re, im: T::zero() }
    }

    #[inline(always)]
    pub fn zero() -> Self {
        Self::real(T::zero())
    }

    #[inline(always)]
    pub fn conj(self) -> Self {
        Self::new(self.re, -self.im)
    }

    /// Multiplication by the imaginary unit.
    #[inline(always)]
    pub fn mul_i(self) -> Self {
        Self::new(-self.im, self.re)
    }

    #[inline(always)]
    pub fn scale(self, s: T) -> Self {
        Self::new(self.re * s, self.im * s)
    }

    #[inline(always)]
    pub fn norm_sqr(self) -> T {
        self.re * self.re + self.im * self.im
    }

    pub fn lift(c: Cx<f64>) -> Self {
        Self::new(T::cst(c.re), T::cst(c.im))
    }

    pub fn value(&self) -> Cx<f64> {
        Cx::new(self.re.value(), self.im.value())
    }
}

impl<T: Scalar> Add for Cx<T> {
    type Output = Self;
    #[inline(always)]
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.im + o.im)
    }
}

impl<T: Scalar> Sub for Cx<T> {
    type Output = Self;
    #[inline(always)]
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.im - o.im)
    }
}

impl<T: Scalar> Mul for Cx<T> {
    type Output = Self;
    #[inline(always)]
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
}

impl<T: Scalar> Neg for Cx<T> {
    type Output = Self;
    #[inline(always)]
    fn neg(self) -> Self {
        Self::new(-self.re, -self.im)
    }
}

/// Row-major 2×2 complex matrix: `[m00, m01, m10, m11]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mat2<T> {
    pub m: [Cx<T>; 4],
}

/// The plain double-precision matrix used at API boundaries.
pub type Complex2x2 = Mat2<f64>;

impl<T: Scalar> Mat2<T> {
    #[inline(always)]
    pub fn new(m: [Cx<T>; 4]) -> Self {
        Self { m }
    }

    pub fn zero() -> Self {
        Self::new([Cx::zero(); 4])
    }

    pub fn identity() -> Self {
        Self::new([Cx::real(T::one()), Cx::zero(), Cx::zero(), Cx::real(T::one())])
    }

    pub fn lift(a: &Complex2x2) -> Self {
        Self::new([
            Cx::lift(a.m[0]),
            Cx::lift(a.m[1]),
            Cx::lift(a.m[2]),
            Cx::lift(a.m[3]),
        ])
    }

    pub fn value(&self) -> Complex2x2 {
        Mat2::new([
            self.m[0].value(),
            self.m[1].value(),
            self.m[2].value(),
            self.m[3].value(),
        ])
    }

    #[inline(always)]
    pub fn dagger(&self) -> Self {
        let [a, b, c, d] = self.m;
        Self::new([a.conj(), c.conj(), b.conj(), d.conj()])
    }

    #[inline(always)]
    pub fn trace(&self) -> Cx<T> {
        self.m[0] + self.m[3]
    }

    /// Real part of the trace of `self * other`, without forming the product.
    #[inline(always)]
    pub fn trace_mul_re(&self, o: &Self) -> T {
        let [a, b, c, d] = self.m;
        let [e, f, g, h] = o.m;
        (a * e + b * g + c * f + d * h).re
    }

    #[inline(always)]
    pub fn scale(&self, s: T) -> Self {
        Self::new([
            self.m[0].scale(s),
            self.m[1].scale(s),
            self.m[2].scale(s),
            self.m[3].scale(s),
        ])
    }

    #[inline(always)]
    pub fn scale_cx(&self, s: Cx<T>) -> Self {
        Self::new([self.m[0] * s, self.m[1] * s, self.m[2] * s, self.m[3] * s])
    }

    #[inline(always)]
    pub fn mul_i(&self) -> Self {
        Self::new([
            self.m[0].mul_i(),
            self.m[1].mul_i(),
            self.m[2].mul_i(),
            self.m[3].mul_i(),
        ])
    }

    /// `self * o + (self * o)†`, which is Hermitian by construction.
    #[inline(always)]
    pub fn mul_plus_dagger(&self, o: &Self) -> Self {
        let p = *self * *o;
        let a = p.m[0].re + p.m[0].re;
        let d = p.m[3].re + p.m[3].re;
        let off = p.m[1] + p.m[2].conj();
        Self::new([Cx::real(a), off, off.conj(), Cx::real(d)])
    }

    /// Largest entrywise modulus of `self - self†`.
    pub fn hermiticity_defect(&self) -> f64 {
        let v = self.value();
        let h = v - v.dagger();
        h.m.iter().map(|c| c.norm_sqr().sqrt()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, o: &Self) -> f64 {
        let d = self.value() - o.value();
        d.m.iter().map(|c| c.norm_sqr().sqrt()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.value()
            .m
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

impl<T: Scalar> Add for Mat2<T> {
    type Output = Self;
    #[inline(always)]
    fn add(self, o: Self) -> Self {
        Self::new([
            self.m[0] + o.m[0],
            self.m[1] + o.m[1],
            self.m[2] + o.m[2],
            self.m[3] + o.m[3],
        ])
    }
}

impl<T: Scalar> Sub for Mat2<T> {
    type Output = Self;
    #[inline(always)]
    fn sub(self, o: Self) -> Self {
        Self::new([
            self.m[0] - o.m[0],
            self.m[1] - o.m[1],
            self.m[2] - o.m[2],
            self.m[3] - o.m[3],
        ])
    }
}

impl<T: Scalar> Neg for Mat2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new([-self.m[0], -self.m[1], -self.m[2], -self.m[3]])
    }
}

impl<T: Scalar> Mul for Mat2<T> {
    type Output = Self;
    #[inline(always)]
    fn mul(self, o: Self) -> Self {
        let [a, b, c, d] = self.m;
        let [e, f, g, h] = o.m;
        Self::new([a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h])
    }
}

fn c(re: f64, im: f64) -> Cx<f64> {
    Cx { re, im }
}

pub const SIGMA_X: Complex2x2 = Mat2 {
    m: [Cx { re: 0.0, im: 0.0 }, Cx { re: 1.0, im: 0.0 }, Cx { re: 1.0, im: 0.0 }, Cx { re: 0.0, im: 0.0 }],
};
pub const SIGMA_Y: Complex2x2 = Mat2 {
    m: [Cx { re: 0.0, im: 0.0 }, Cx { re: 0.0, im: -1.0 }, Cx { re: 0.0, im: 1.0 }, Cx { re: 0.0, im: 0.0 }],
};
pub const SIGMA_Z: Complex2x2 = Mat2 {
    m: [Cx { re: 1.0, im: 0.0 }, Cx { re: 0.0, im: 0.0 }, Cx { re: 0.0, im: 0.0 }, Cx { re: -1.0, im: 0.0 }],
};
/// `σ₊ = |1⟩⟨0|` (raises |0⟩ to |1⟩ with `σ_z|0⟩ = +|0⟩`).
pub const SIGMA_PLUS: Complex2x2 = Mat2 {
    m: [Cx { re: 0.0, im: 0.0 }, Cx { re: 0.0, im: 0.0 }, Cx { re: 1.0, im: 0.0 }, Cx { re: 0.0, im: 0.0 }],
};
/// `σ₋ = |0⟩⟨1|`.
pub const SIGMA_MINUS: Complex2x2 = Mat2 {
    m: [Cx { re: 0.0, im: 0.0 }, Cx { re: 1.0, im: 0.0 }, Cx { re: 0.0, im: 0.0 }, Cx { re: 0.0, im: 0.0 }],
};
pub const IDENTITY: Complex2x2 = Mat2 {
    m: [Cx { re: 1.0, im: 0.0 }, Cx { re: 0.0, im: 0.0 }, Cx { re: 0.0, im: 0.0 }, Cx { re: 1.0, im: 0.0 }],
};

impl Complex2x2 {
    pub fn from_entries(e: [(f64, f64); 4]) -> Self {
        Mat2::new([c(e[0].0, e[0].1), c(e[1].0, e[1].1), c(e[2].0, e[2].1), c(e[3].0, e[3].1)])
    }

    /// `hx σx + hy σy + hz σz`.
    pub fn pauli_combination(hx: f64, hy: f64, hz: f64) -> Self {
        SIGMA_X.scale(hx) + SIGMA_Y.scale(hy) + SIGMA_Z.scale(hz)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_algebra() {
        // σx σy = i σz
        let p = SIGMA_X * SIGMA_Y;
        assert_eq!(p, SIGMA_Z.mul_i());
        assert_eq!(SIGMA_Z * SIGMA_Z, IDENTITY);
        // σ₋|1⟩ = |0⟩ and σ₊ = σ₋†
        assert_eq!(SIGMA_MINUS.dagger(), SIGMA_PLUS);
        assert_eq!((SIGMA_PLUS * SIGMA_MINUS).m[3], c(1.0, 0.0));
    }

    #[test]
    fn trace_mul_matches_product() {
        let a = Complex2x2::from_entries([(0.3, 0.1), (-1.2, 0.5), (0.7, -0.4), (2.0, 0.0)]);
        let b = Complex2x2::from_entries([(1.1, -0.2), (0.0, 0.9), (0.25, 0.5), (-0.6, 0.3)]);
        assert!(((a * b).trace().re - a.trace_mul_re(&b)).abs() < 1e-15);
        let s = a.mul_plus_dagger(&b);
        let r = a * b + (a * b).dagger();
        assert!(s.max_abs_diff(&r) < 1e-15);
    }
}
