//! Generator pieces of the qubit master equation.
//!
//! All functions take plain matrices so they can be driven either by
//! validated [`DensityMatrix`](super::DensityMatrix) values or by the
//! dual-number states of the learning path.

use super::mat2::Mat2;
use super::scalar::Scalar;

/// `−i[H, ρ]`.
#[inline(always)]
pub fn hamiltonian_term<T: Scalar>(h: &Mat2<T>, rho: &Mat2<T>) -> Mat2<T> {
    (*h * *rho - *rho * *h).mul_i().scale(T::cst(-1.0))
}

/// `D[L]ρ = LρL† − ½(L†Lρ + ρL†L)`.
#[inline(always)]
pub fn dissipator<T: Scalar>(l: &Mat2<T>, rho: &Mat2<T>) -> Mat2<T> {
    let ldl = l.dagger() * *l;
    dissipator_with(l, &ldl, rho)
}

/// [`dissipator`] with `L†L` supplied by the caller.
#[inline(always)]
pub fn dissipator_with<T: Scalar>(l: &Mat2<T>, ldl: &Mat2<T>, rho: &Mat2<T>) -> Mat2<T> {
    let jump = *l * *rho * l.dagger();
    let anti = *ldl * *rho + *rho * *ldl;
    jump - anti.scale(T::cst(0.5))
}

/// `H[c]ρ = cρ + ρc† − ρ Tr ρ(c + c†)`.
#[inline(always)]
pub fn meas_superop<T: Scalar>(c: &Mat2<T>, rho: &Mat2<T>) -> Mat2<T> {
    let expect = rho.trace_mul_re(c) * 2.0;
    *c * *rho + *rho * c.dagger() - rho.scale(expect)
}

/// Directional derivative of `ρ ↦ H[c]ρ` at `ρ` along `B`:
/// `cB + Bc† − B Tr ρ(c+c†) − ρ Tr B(c+c†)`.
#[inline(always)]
pub fn meas_superop_dderiv<T: Scalar>(c: &Mat2<T>, rho: &Mat2<T>, b: &Mat2<T>) -> Mat2<T> {
    let expect_rho = rho.trace_mul_re(c) * 2.0;
    let expect_b = b.trace_mul_re(c) * 2.0;
    *c * *b + *b * c.dagger() - b.scale(expect_rho) - rho.scale(expect_b)
}
