use serde::{Deserialize, Serialize};

use super::mat2::{Complex2x2, Cx, Mat2};
use super::scalar::Scalar;
use super::QcoreError;

/// Tolerance on `|r|` above one still accepted as a physical state.
pub const BLOCH_NORM_TOL: f64 = 2e-9;
/// Tolerance on Hermiticity and unit trace.
pub const ALGEBRAIC_TOL: f64 = 1e-12;

/// Expectation values `(⟨σx⟩, ⟨σy⟩, ⟨σz⟩)` of a physical qubit state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Unconstrained model output; may sit outside the Bloch ball.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RawBloch {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const ORIGIN: BlochVector = BlochVector { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, QcoreError> {
        let r = Self { x, y, z };
        let n = r.norm();
        if !n.is_finite() || n > 1.0 + BLOCH_NORM_TOL {
            return Err(QcoreError::OutsideBlochBall { norm: n });
        }
        Ok(r)
    }

    /// Projects any finite vector into the closed unit ball.
    pub fn clipped(x: f64, y: f64, z: f64) -> Self {
        let n = (x * x + y * y + z * z).sqrt();
        if n > 1.0 {
            Self { x: x / n, y: y / n, z: z / n }
        } else {
            Self { x, y, z }
        }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn component(&self, axis: usize) -> f64 {
        self.as_array()[axis]
    }
}

impl From<BlochVector> for RawBloch {
    fn from(b: BlochVector) -> Self {
        RawBloch { x: b.x, y: b.y, z: b.z }
    }
}

impl RawBloch {
    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }
}

/// A validated qubit density matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Complex2x2", into = "Complex2x2")]
pub struct DensityMatrix(Complex2x2);

impl DensityMatrix {
    pub fn new(m: Complex2x2) -> Result<Self, QcoreError> {
        if !m.is_finite() {
            return Err(QcoreError::NonFinite);
        }
        let herm = m.hermiticity_defect();
        if herm > ALGEBRAIC_TOL {
            return Err(QcoreError::NotHermitian { defect: herm });
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > ALGEBRAIC_TOL || tr.im.abs() > ALGEBRAIC_TOL {
            return Err(QcoreError::NotUnitTrace { trace: tr.re });
        }
        let n = bloch_components(&m).iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 1.0 + BLOCH_NORM_TOL {
            return Err(QcoreError::OutsideBlochBall { norm: n });
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Complex2x2 {
        &self.0
    }

    pub fn maximally_mixed() -> Self {
        Self(Complex2x2::identity().scale(0.5))
    }

    /// Smallest eigenvalue, `(1 - |r|)/2` for a unit-trace Hermitian 2×2.
    pub fn min_eigenvalue(&self) -> f64 {
        0.5 * (1.0 - bloch_from_rho(self).norm())
    }
}

impl TryFrom<Complex2x2> for DensityMatrix {
    type Error = QcoreError;
    fn try_from(m: Complex2x2) -> Result<Self, Self::Error> {
        Self::new(m)
    }
}

impl From<DensityMatrix> for Complex2x2 {
    fn from(d: DensityMatrix) -> Self {
        d.0
    }
}

/// `ρ = ½(I + r·σ)`.
pub fn rho_from_bloch(r: BlochVector) -> Result<DensityMatrix, QcoreError> {
    let r = BlochVector::new(r.x, r.y, r.z)?;
    Ok(DensityMatrix(rho_from_components(r.x, r.y, r.z)))
}

/// `r_α = Tr(σ_α ρ)`.
pub fn bloch_from_rho(rho: &DensityMatrix) -> BlochVector {
    let [x, y, z] = bloch_components(&rho.0);
    BlochVector { x, y, z }
}

/// Unchecked `½(I + r·σ)` for any scalar type.
#[inline(always)]
pub fn rho_from_components<T: Scalar>(x: T, y: T, z: T) -> Mat2<T> {
    let h = 0.5;
    let a = (z + 1.0) * h;
    let d = (-z + 1.0) * h;
    let off = Cx::new(x * h, -(y * h));
    Mat2::new([Cx::real(a), off, off.conj(), Cx::real(d)])
}

/// `[Tr(σx ρ), Tr(σy ρ), Tr(σz ρ)]` for any scalar type.
#[inline(always)]
pub fn bloch_components<T: Scalar>(rho: &Mat2<T>) -> [T; 3] {
    let [a, b, c, d] = rho.m;
    // Tr(σx ρ) = ρ01 + ρ10, Tr(σy ρ) = i(ρ01 - ρ10), Tr(σz ρ) = ρ00 - ρ11
    [b.re + c.re, c.im - b.im, a.re - d.re]
}

/// Trace distance `½‖ρ − σ‖₁`, which for qubits is half the Bloch distance.
pub fn trace_distance(a: &BlochVector, b: &BlochVector) -> f64 {
    0.5 * ((a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2)).sqrt()
}
