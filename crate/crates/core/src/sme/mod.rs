//! Heterodyne stochastic master equation: integration, record synthesis,
//! projective readout and dataset generation.

mod dataset;
mod generate;
mod me;
mod model;
mod record;
mod rng;
mod step;

use thiserror::Error;

use crate::qcore::QcoreError;

pub use dataset::{generate_dataset, split_for_index, Dataset, DatasetMeta, Split, FORMAT_VERSION};
pub use generate::{
    born_probability, generate_trajectory, integrate_path, sample_outcome, simulate_shot, Trajectory,
};
pub use me::{me_bloch_series, me_evolve, me_final_bloch};
pub use model::{ConstrainedParams, ModelOps, PhysicalModel, CHI, KAPPA};
pub use record::{coarse_grain, coarse_grain_shot, Axis, Prep, TrajectoryRecord, WeakRecord};
pub use rng::{derive_seed, splitmix64, GaussianSource};
pub use step::{drift, invert_record, milstein_step, signal_rate, synth_record, StepDiagnostics};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SmeError {
    #[error("degenerate state: trace {trace:e} before normalization")]
    DegenerateState { trace: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("coarse-graining factor {k} does not divide {n} steps")]
    NonDivisible { k: usize, n: usize },
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("invalid dataset metadata: {0}")]
    InvalidMeta(String),
    #[error(transparent)]
    Qcore(#[from] QcoreError),
}

/// Number of whole steps of `dt` in `t`, rejecting grids that do not divide.
pub fn steps_in(t: f64, dt: f64) -> Result<usize, SmeError> {
    if !(dt > 0.0) || !(t >= 0.0) || !t.is_finite() {
        return Err(SmeError::InvalidGrid(format!("duration {t} with step {dt}")));
    }
    let n = (t / dt).round();
    if (n * dt - t).abs() > 1e-9 * t.max(1.0) {
        return Err(SmeError::InvalidGrid(format!("duration {t} is not a multiple of {dt}")));
    }
    Ok(n as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_counting() {
        assert_eq!(steps_in(8.0, 0.04).unwrap(), 200);
        assert_eq!(steps_in(0.0, 0.001).unwrap(), 0);
        assert_eq!(steps_in(0.04, 0.001).unwrap(), 40);
        assert!(steps_in(0.05, 0.04).is_err());
        assert!(steps_in(1.0, 0.0).is_err());
    }
}
