//! Drift, diffusion and the Milstein update of the heterodyne SME.

use crate::qcore::{
    bloch_components, dissipator_with, hamiltonian_term, meas_superop, meas_superop_dderiv,
    rho_from_components, Mat2, Scalar,
};

use super::model::ModelOps;
use super::SmeError;

/// Counters accumulated while stepping.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepDiagnostics {
    /// Steps whose Bloch vector left the unit ball and was rescaled.
    pub clipped: u64,
    /// Largest Bloch norm observed before any rescaling.
    pub max_norm: f64,
}

impl StepDiagnostics {
    pub fn merge(&mut self, o: &StepDiagnostics) {
        self.clipped += o.clipped;
        self.max_norm = self.max_norm.max(o.max_norm);
    }
}

/// `A(ρ) = −i[H,ρ] + D[L]ρ + γ↑D[σ₊]ρ + γ↓D[σ₋]ρ`.
#[inline(always)]
pub fn drift<T: Scalar>(rho: &Mat2<T>, ops: &ModelOps<T>) -> Mat2<T> {
    let mut a = hamiltonian_term(&ops.h, rho) + dissipator_with(&ops.l, &ops.ldl, rho);
    if ops.relaxation {
        let sp = ModelOps::<T>::sigma_plus();
        let sm = ModelOps::<T>::sigma_minus();
        let up = dissipator_with(&sp, &(sp.dagger() * sp), rho);
        let down = dissipator_with(&sm, &(sm.dagger() * sm), rho);
        a = a + up.scale(ops.gamma_up) + down.scale(ops.gamma_down);
    }
    a
}

/// Deterministic part of each record increment per unit time:
/// `√(η/2) Tr[ρ(c_q + c_q†)]` for `q ∈ {I, Q}`.
#[inline(always)]
pub fn signal_rate<T: Scalar>(rho: &Mat2<T>, ops: &ModelOps<T>) -> (T, T) {
    let i = rho.trace_mul_re(&ops.c_i) * 2.0;
    let q = rho.trace_mul_re(&ops.c_q) * 2.0;
    (i * ops.diffusion, q * ops.diffusion)
}

/// Record increments `ΔM^q = √(η/2) Tr[ρ(c^q + c^q†)] dt + ΔW^q`.
#[inline(always)]
pub fn synth_record<T: Scalar>(rho: &Mat2<T>, dw_i: T, dw_q: T, ops: &ModelOps<T>, dt: f64) -> (T, T) {
    let (si, sq) = signal_rate(rho, ops);
    (si * dt + dw_i, sq * dt + dw_q)
}

/// Wiener increments recovered from observed record increments.
#[inline(always)]
pub fn invert_record<T: Scalar>(rho: &Mat2<T>, dm_i: T, dm_q: T, ops: &ModelOps<T>, dt: f64) -> (T, T) {
    let (si, sq) = signal_rate(rho, ops);
    (dm_i - si * dt, dm_q - sq * dt)
}

/// One Milstein step with diagonal `(ΔW² − dt)` corrections, followed by
/// trace renormalization and, if needed, rescaling onto the Bloch sphere.
///
/// The returned matrix is rebuilt from its Bloch vector, so it is exactly
/// Hermitian with unit trace.
#[inline]
pub fn milstein_step<T: Scalar>(
    rho: &Mat2<T>,
    dw_i: T,
    dw_q: T,
    ops: &ModelOps<T>,
    dt: f64,
    diag: &mut StepDiagnostics,
) -> Result<Mat2<T>, SmeError> {
    let a = drift(rho, ops);
    let hi = meas_superop(&ops.c_i, rho);
    let hq = meas_superop(&ops.c_q, rho);
    let di = meas_superop_dderiv(&ops.c_i, rho, &hi);
    let dq = meas_superop_dderiv(&ops.c_q, rho, &hq);

    let wi = ops.diffusion * dw_i;
    let wq = ops.diffusion * dw_q;
    let ci = ops.half_eta * ((dw_i * dw_i - dt) * 0.5);
    let cq = ops.half_eta * ((dw_q * dw_q - dt) * 0.5);

    let next = *rho + a.scale(T::cst(dt)) + hi.scale(wi) + hq.scale(wq) + di.scale(ci) + dq.scale(cq);
    finish_step(&next, diag)
}

/// Normalizes an unnormalized update and enforces positivity.
#[inline(always)]
fn finish_step<T: Scalar>(next: &Mat2<T>, diag: &mut StepDiagnostics) -> Result<Mat2<T>, SmeError> {
    let tr = next.trace().re;
    if !(tr.value() > 1e-12) {
        return Err(SmeError::DegenerateState { trace: tr.value() });
    }
    let [x, y, z] = bloch_components(next);
    let inv = tr.recip();
    let (mut x, mut y, mut z) = (x * inv, y * inv, z * inv);
    let n2 = x * x + y * y + z * z;
    let n = n2.value().sqrt();
    if !n.is_finite() {
        return Err(SmeError::DegenerateState { trace: tr.value() });
    }
    diag.max_norm = diag.max_norm.max(n);
    if n > 1.0 {
        diag.clipped += 1;
        let s = n2.sqrt().recip();
        x = x * s;
        y = y * s;
        z = z * s;
    }
    Ok(rho_from_components(x, y, z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{bloch_components, rho_from_components, Complex2x2, SIGMA_X, SIGMA_Z};
    use crate::sme::model::{ConstrainedParams, PhysicalModel};

    fn bloch(m: &Complex2x2) -> [f64; 3] {
        bloch_components(m)
    }

    #[test]
    fn drift_rabi_rate() {
        let m = PhysicalModel::new(SIGMA_X.scale(1.395 / 2.0), Complex2x2::zero(), 0.0, 0.0, 0.0)
            .unwrap();
        let a = drift(&rho_from_components(0.0, 0.0, 1.0), &m.ops());
        let r = bloch(&a);
        assert!((r[0]).abs() < 1e-15 && (r[1] + 1.395).abs() < 1e-14 && r[2].abs() < 1e-15);
    }

    #[test]
    fn drift_dephasing_rate() {
        let g: f64 = 1.176;
        let m = PhysicalModel::new(Complex2x2::zero(), SIGMA_Z.scale((g / 2.0).sqrt()), 0.0, 0.0, 0.0)
            .unwrap();
        let a = drift(&rho_from_components(1.0, 0.0, 0.0), &m.ops());
        let r = bloch(&a);
        assert!((r[0] + g).abs() < 1e-14 && r[1].abs() < 1e-15 && r[2].abs() < 1e-15);
    }

    #[test]
    fn balanced_pumping_leaves_mixed_state() {
        let m = PhysicalModel::new(Complex2x2::zero(), Complex2x2::zero(), 0.0, 0.3, 0.3).unwrap();
        let a = drift(&rho_from_components(0.0, 0.0, 0.0), &m.ops());
        assert!(bloch(&a)[2].abs() < 1e-15);
        // relaxation alone pulls |1⟩ towards |0⟩
        let m = PhysicalModel::new(Complex2x2::zero(), Complex2x2::zero(), 0.0, 0.0, 0.3).unwrap();
        let a = drift(&rho_from_components(0.0, 0.0, -1.0), &m.ops());
        assert!((bloch(&a)[2] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn zero_efficiency_is_euler() {
        let p = ConstrainedParams { eta: 0.0, ..ConstrainedParams::DEVICE };
        let ops = PhysicalModel::constrained(p).unwrap().ops::<f64>();
        let rho = rho_from_components(0.3, -0.2, 0.5);
        let mut d = StepDiagnostics::default();
        let out = milstein_step(&rho, 0.7, -1.3, &ops, 0.04, &mut d).unwrap();
        let euler = rho + drift(&rho, &ops).scale(0.04);
        assert!(out.max_abs_diff(&euler) < 1e-15);
    }

    #[test]
    fn sigma_z_eigenstate_is_fixed() {
        let p = ConstrainedParams { omega_r: 0.0, ..ConstrainedParams::DEVICE };
        let ops = PhysicalModel::constrained(p).unwrap().ops::<f64>();
        let rho = rho_from_components(0.0, 0.0, 1.0);
        let mut d = StepDiagnostics::default();
        for &(a, b) in &[(0.3, -0.1), (2.0, 1.5), (-0.7, 0.0)] {
            let out = milstein_step(&rho, a, b, &ops, 0.04, &mut d).unwrap();
            assert_eq!(out, rho);
        }
    }

    #[test]
    fn synth_record_examples() {
        let rho = rho_from_components(0.2, 0.1, 0.4);
        // η = 0
        let ops = PhysicalModel::constrained(ConstrainedParams { eta: 0.0, ..ConstrainedParams::DEVICE })
            .unwrap()
            .ops::<f64>();
        assert_eq!(synth_record(&rho, 0.11, -0.07, &ops, 0.04), (0.11, -0.07));
        // Hermitian L carries no Q signal
        let ops = PhysicalModel::constrained(ConstrainedParams::DEVICE).unwrap().ops::<f64>();
        assert_eq!(synth_record(&rho, 0.11, -0.07, &ops, 0.04).1, -0.07);
        // plug-in value at |0⟩
        let zero = rho_from_components(0.0, 0.0, 1.0);
        let (mi, _) = synth_record(&zero, 0.0, 0.0, &ops, 0.04);
        let expect = (0.1469f64 / 2.0).sqrt() * 2.0 * (1.176f64 / 2.0).sqrt() * 0.04;
        assert!((mi - expect).abs() < 1e-15);
        assert!((mi - 0.01663).abs() < 5e-6);
    }

    #[test]
    fn degenerate_update_is_rejected() {
        let mut d = StepDiagnostics::default();
        let r = finish_step(&Complex2x2::zero(), &mut d);
        assert!(matches!(r, Err(SmeError::DegenerateState { .. })));
    }
}
