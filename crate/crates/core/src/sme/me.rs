//! Deterministic master-equation evolution (the SME without its stochastic
//! terms), integrated with classical RK4.

use crate::qcore::{bloch_components, rho_from_bloch, rho_from_components, BlochVector, Mat2, Scalar};

use super::model::{ModelOps, PhysicalModel};
use super::step::drift;
use super::SmeError;

fn rk4<T: Scalar>(rho: &Mat2<T>, ops: &ModelOps<T>, h: f64) -> Mat2<T> {
    let k1 = drift(rho, ops);
    let k2 = drift(&(*rho + k1.scale(T::cst(h / 2.0))), ops);
    let k3 = drift(&(*rho + k2.scale(T::cst(h / 2.0))), ops);
    let k4 = drift(&(*rho + k3.scale(T::cst(h))), ops);
    *rho + (k1 + k2.scale(T::cst(2.0)) + k3.scale(T::cst(2.0)) + k4).scale(T::cst(h / 6.0))
}

/// Evolves `rho0` for `n_steps` output intervals of length `dt`, each split
/// into `substeps` RK4 steps. Returns `n_steps + 1` states.
pub fn me_evolve<T: Scalar>(rho0: Mat2<T>, ops: &ModelOps<T>, dt: f64, n_steps: usize, substeps: usize) -> Vec<Mat2<T>> {
    let sub = substeps.max(1);
    let h = dt / sub as f64;
    let mut out = Vec::with_capacity(n_steps + 1);
    let mut rho = rho0;
    out.push(rho);
    for _ in 0..n_steps {
        for _ in 0..sub {
            rho = rk4(&rho, ops, h);
        }
        // the generator is trace preserving; rebuilding keeps ρ exactly Hermitian
        let [x, y, z] = bloch_components(&rho);
        rho = rho_from_components(x, y, z);
        out.push(rho);
    }
    out
}

/// Bloch series of the deterministic evolution from `r0`.
pub fn me_bloch_series(
    m: &PhysicalModel,
    r0: BlochVector,
    dt: f64,
    n_steps: usize,
    substeps: usize,
) -> Result<Vec<BlochVector>, SmeError> {
    let rho0 = *rho_from_bloch(r0)?.matrix();
    Ok(me_evolve(rho0, &m.ops::<f64>(), dt, n_steps, substeps)
        .iter()
        .map(|r| {
            let [x, y, z] = bloch_components(r);
            BlochVector { x, y, z }
        })
        .collect())
}

/// Terminal Bloch vector after `n_steps` intervals.
pub fn me_final_bloch(m: &PhysicalModel, r0: BlochVector, dt: f64, n_steps: usize, substeps: usize) -> Result<BlochVector, SmeError> {
    Ok(*me_bloch_series(m, r0, dt, n_steps, substeps)?.last().expect("non-empty series"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sme::model::ConstrainedParams;

    #[test]
    fn pure_dephasing_is_exponential() {
        let p = ConstrainedParams { omega_r: 0.0, ..ConstrainedParams::DEVICE };
        let m = PhysicalModel::constrained(p).unwrap();
        let s = me_bloch_series(&m, BlochVector { x: 1.0, y: 0.0, z: 0.0 }, 0.04, 50, 4).unwrap();
        let expect = (-p.gamma_d * 2.0).exp();
        assert!((s[50].x - expect).abs() < 1e-10);
    }

    #[test]
    fn undamped_rabi() {
        let p = ConstrainedParams { gamma_d: 0.0, ..ConstrainedParams::DEVICE };
        let m = PhysicalModel::constrained(p).unwrap();
        let s = me_bloch_series(&m, BlochVector { x: 0.0, y: 0.0, z: 1.0 }, 0.04, 100, 4).unwrap();
        let t: f64 = 4.0;
        assert!((s[100].z - (p.omega_r * t).cos()).abs() < 1e-8);
        assert!((s[100].y + (p.omega_r * t).sin()).abs() < 1e-8);
    }
}
