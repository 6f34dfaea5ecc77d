//! Forward-mode differentiation over small parameter vectors, the Adam
//! optimizer, and the fixed-order reduction shared by every parallel
//! gradient accumulation in the crate.

mod adam;
mod dual;

use thiserror::Error;

pub use adam::{AdamConfig, AdamState};
pub use dual::Dual;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum DomainError {
    #[error("logarithm of non-positive value {0}")]
    Log(f64),
    #[error("square root of negative value {0}")]
    Sqrt(f64),
    #[error("division by zero")]
    DivByZero,
}

/// Seeds one tangent slot per parameter and evaluates `f` once.
///
/// Returns the loss value and its gradient with respect to `theta`.
pub fn gradient<const N: usize, E, F>(f: F, theta: &[f64; N]) -> Result<(f64, [f64; N]), E>
where
    F: FnOnce(&[Dual<N>; N]) -> Result<Dual<N>, E>,
{
    let vars: [Dual<N>; N] = std::array::from_fn(|i| Dual::variable(theta[i], i));
    let out = f(&vars)?;
    Ok((out.v, out.d))
}

/// Pairwise tree reduction with an order fixed by the input order alone.
///
/// Parallel callers collect partial results into a `Vec` (rayon preserves
/// index order) and reduce here, so sums do not depend on worker count.
pub fn tree_reduce<T, F>(mut items: Vec<T>, combine: F) -> Option<T>
where
    F: Fn(T, T) -> T,
{
    if items.is_empty() {
        return None;
    }
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(combine(a, b)),
                None => next.push(a),
            }
        }
        items = next;
    }
    items.pop()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::Scalar;

    #[test]
    fn constant_loss_has_zero_gradient() {
        let (v, g) = gradient::<3, DomainError, _>(|_| Ok(Dual::constant(2.5)), &[1.0, -2.0, 0.3])
            .unwrap();
        assert_eq!(v, 2.5);
        assert_eq!(g, [0.0; 3]);
    }

    #[test]
    fn quadratic_gradient() {
        let target = [0.5, -1.0, 2.0];
        let theta = [1.0, 1.0, 1.0];
        let (_, g) = gradient::<3, DomainError, _>(
            |p| {
                let mut acc = Dual::constant(0.0);
                for i in 0..3 {
                    acc += (p[i] - target[i]).square();
                }
                Ok(acc)
            },
            &theta,
        )
        .unwrap();
        for i in 0..3 {
            assert!((g[i] - 2.0 * (theta[i] - target[i])).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_propagates_domain_error() {
        let r = gradient::<1, DomainError, _>(|p| p[0].checked_ln(), &[-1.0]);
        assert_eq!(r, Err(DomainError::Log(-1.0)));
    }

    #[test]
    fn tree_reduce_order() {
        let v: Vec<String> = (0..5).map(|i| i.to_string()).collect();
        let s = tree_reduce(v, |a, b| format!("({a}{b})")).unwrap();
        assert_eq!(s, "(((01)(23))4)");
        assert_eq!(tree_reduce(Vec::<f64>::new(), |a, b| a + b), None);
    }
}
