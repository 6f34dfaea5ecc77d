//! Simulation and characterization of continuously monitored qubits.
//!
//! The crate integrates the heterodyne stochastic master equation, generates
//! synthetic weak-measurement datasets, and recovers device parameters from
//! them with a differentiable SDE model, a recurrent network, and classical
//! binning fits.

pub mod autodiff;
pub mod characterize;
pub mod dataio;
pub mod qcore;
pub mod rnn;
pub mod sdelearn;
pub mod sme;

pub use qcore::{BlochVector, Complex2x2, DensityMatrix, RawBloch};
pub use sme::{Axis, Dataset, DatasetMeta, PhysicalModel, Prep, TrajectoryRecord, WeakRecord};
