use serde::{Deserialize, Serialize};

use crate::qcore::{
    Complex2x2, Mat2, Scalar, ALGEBRAIC_TOL, SIGMA_MINUS, SIGMA_PLUS, SIGMA_X, SIGMA_Z,
};

use super::SmeError;

/// Rabi drive, measurement dephasing and efficiency of the standard
/// `H = Ω/2 σx`, `L = √(Γ/2) σz` model (rates in rad/µs).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstrainedParams {
    pub omega_r: f64,
    pub gamma_d: f64,
    pub eta: f64,
}

impl ConstrainedParams {
    /// Independently calibrated transmon values: Ω_R/2π = 0.222 MHz,
    /// Γ_d = 1.176 µs⁻¹, η = 0.1469.
    pub const DEVICE: ConstrainedParams =
        ConstrainedParams { omega_r: 1.395, gamma_d: 1.176, eta: 0.1469 };

    pub fn as_array(&self) -> [f64; 3] {
        [self.omega_r, self.gamma_d, self.eta]
    }

    /// Componentwise `|self − truth| / |truth|`.
    pub fn relative_error(&self, truth: &ConstrainedParams) -> [f64; 3] {
        let a = self.as_array();
        let b = truth.as_array();
        std::array::from_fn(|i| ((a[i] - b[i]) / b[i]).abs())
    }
}

/// Dispersive coupling χ and cavity linewidth κ (rad/µs). Recorded as
/// dataset metadata only; the cavity is never simulated.
pub const CHI: f64 = -0.47 * std::f64::consts::TAU;
pub const KAPPA: f64 = 1.56 * std::f64::consts::TAU;

/// Parameters of the monitored-qubit SME.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalModel {
    /// Hermitian drive Hamiltonian, rad/µs.
    pub h: Complex2x2,
    /// Lindblad measurement operator, µs^(−1/2).
    pub l: Complex2x2,
    pub eta: f64,
    #[serde(default)]
    pub gamma_up: f64,
    #[serde(default)]
    pub gamma_down: f64,
}

impl PhysicalModel {
    pub fn new(
        h: Complex2x2,
        l: Complex2x2,
        eta: f64,
        gamma_up: f64,
        gamma_down: f64,
    ) -> Result<Self, SmeError> {
        let m = Self { h, l, eta, gamma_up, gamma_down };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), SmeError> {
        if !self.h.is_finite() || !self.l.is_finite() {
            return Err(SmeError::InvalidModel("non-finite operator entries".into()));
        }
        let defect = self.h.hermiticity_defect();
        if defect > ALGEBRAIC_TOL {
            return Err(SmeError::InvalidModel(format!(
                "Hamiltonian is not Hermitian (defect {defect:e})"
            )));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(SmeError::InvalidModel(format!("efficiency {} outside [0, 1]", self.eta)));
        }
        if !(self.gamma_up >= 0.0 && self.gamma_down >= 0.0) {
            return Err(SmeError::InvalidModel("negative relaxation rate".into()));
        }
        Ok(())
    }

    pub fn constrained(p: ConstrainedParams) -> Result<Self, SmeError> {
        if !(p.gamma_d >= 0.0) {
            return Err(SmeError::InvalidModel(format!("negative dephasing {}", p.gamma_d)));
        }
        Self::new(
            SIGMA_X.scale(p.omega_r / 2.0),
            SIGMA_Z.scale((p.gamma_d / 2.0).sqrt()),
            p.eta,
            0.0,
            0.0,
        )
    }

    /// `{Ω_R, Γ_d, η}` read off any model: `Ω_R = 2|H₁₀|` and
    /// `Γ_d = 2|(L₀₀ − L₁₁)/2|²`.
    pub fn constrained_view(&self) -> ConstrainedParams {
        let h = self.h.m[2];
        let lz_re = (self.l.m[0].re - self.l.m[3].re) / 2.0;
        let lz_im = (self.l.m[0].im - self.l.m[3].im) / 2.0;
        ConstrainedParams {
            omega_r: 2.0 * h.re.hypot(h.im),
            gamma_d: 2.0 * (lz_re * lz_re + lz_im * lz_im),
            eta: self.eta,
        }
    }

    /// I-quadrature measurement operator `c_I = L`.
    pub fn c_i(&self) -> Complex2x2 {
        self.l
    }

    /// Q-quadrature measurement operator `c_Q = −iL†`.
    pub fn c_q(&self) -> Complex2x2 {
        self.l.dagger().mul_i().scale(-1.0)
    }

    pub fn ops<T: Scalar>(&self) -> ModelOps<T> {
        ModelOps::new(
            Mat2::lift(&self.h),
            Mat2::lift(&self.l),
            T::cst(self.eta),
            T::cst(self.gamma_up),
            T::cst(self.gamma_down),
            self.gamma_up != 0.0 || self.gamma_down != 0.0,
        )
    }
}

/// Precomputed operators for the stepper, generic over the scalar so that
/// parameter tangents can ride along.
#[derive(Clone, Copy, Debug)]
pub struct ModelOps<T> {
    pub h: Mat2<T>,
    pub l: Mat2<T>,
    pub ldl: Mat2<T>,
    pub c_i: Mat2<T>,
    pub c_q: Mat2<T>,
    /// `√(η/2)`
    pub diffusion: T,
    /// `η/2`
    pub half_eta: T,
    pub gamma_up: T,
    pub gamma_down: T,
    pub relaxation: bool,
}

impl<T: Scalar> ModelOps<T> {
    pub fn new(h: Mat2<T>, l: Mat2<T>, eta: T, gamma_up: T, gamma_down: T, relaxation: bool) -> Self {
        let half_eta = eta * 0.5;
        Self {
            h,
            l,
            ldl: l.dagger() * l,
            c_i: l,
            c_q: l.dagger().mul_i().scale(T::cst(-1.0)),
            diffusion: half_eta.sqrt(),
            half_eta,
            gamma_up,
            gamma_down,
            relaxation,
        }
    }

    pub fn sigma_plus() -> Mat2<T> {
        Mat2::lift(&SIGMA_PLUS)
    }

    pub fn sigma_minus() -> Mat2<T> {
        Mat2::lift(&SIGMA_MINUS)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::Cx;

    #[test]
    fn channel_operators() {
        let l = Complex2x2::from_entries([(0.3, 0.1), (0.2, -0.4), (0.0, 0.5), (-0.6, 0.0)]);
        let m = PhysicalModel::new(Complex2x2::zero(), l, 0.5, 0.0, 0.0).unwrap();
        assert_eq!(m.c_i(), l);
        // −iL† entry (0,1) = −i·conj(L10) = −i·(−0.5i) = −0.5
        assert!((m.c_q().m[1] - Cx::new(-0.5, 0.0)).norm_sqr() < 1e-30);
        let ops = m.ops::<f64>();
        assert_eq!(ops.c_q, m.c_q());
    }

    #[test]
    fn validation() {
        let bad_h = Complex2x2::from_entries([(0.0, 0.0), (1.0, 0.0), (0.0, 0.0), (0.0, 0.0)]);
        assert!(PhysicalModel::new(bad_h, SIGMA_Z, 0.1, 0.0, 0.0).is_err());
        assert!(PhysicalModel::new(SIGMA_X, SIGMA_Z, 1.2, 0.0, 0.0).is_err());
        assert!(PhysicalModel::new(SIGMA_X, SIGMA_Z, 0.2, -0.1, 0.0).is_err());
        let c = PhysicalModel::constrained(ConstrainedParams::DEVICE).unwrap();
        assert!((c.h.m[1].re - 1.395 / 2.0).abs() < 1e-15);
        assert!((c.l.m[0].re - (0.588f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn metadata_constants() {
        assert!((CHI / std::f64::consts::TAU + 0.47).abs() < 1e-12);
        assert!((KAPPA - 9.8018).abs() < 1e-3);
    }
}
