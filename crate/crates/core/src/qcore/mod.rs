//! Exact 2×2 complex algebra, qubit states and master-equation superoperators.

mod mat2;
mod scalar;
mod state;
mod superop;

use thiserror::Error;

pub use mat2::{
    Complex2x2, Cx, Mat2, IDENTITY, SIGMA_MINUS, SIGMA_PLUS, SIGMA_X, SIGMA_Y, SIGMA_Z,
};
pub use scalar::{logit, softplus_inv, Scalar};
pub use state::{
    bloch_components, bloch_from_rho, rho_from_bloch, rho_from_components, trace_distance,
    BlochVector, DensityMatrix, RawBloch, ALGEBRAIC_TOL, BLOCH_NORM_TOL,
};
pub use superop::{
    dissipator, dissipator_with, hamiltonian_term, meas_superop, meas_superop_dderiv,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QcoreError {
    #[error("Bloch vector norm {norm} exceeds the unit ball")]
    OutsideBlochBall { norm: f64 },
    #[error("matrix is not Hermitian (defect {defect:e})")]
    NotHermitian { defect: f64 },
    #[error("matrix trace {trace} is not one")]
    NotUnitTrace { trace: f64 },
    #[error("matrix has non-finite entries")]
    NonFinite,
}
