//! Evaluation metrics and classical parameter-extraction baselines.

pub mod binfit;
pub mod ce;
mod coarse;
mod metrics;

use thiserror::Error;

use crate::sdelearn::SdeError;

pub use binfit::{bin_fit, fit_bloch_ode, me_bloch_ode, BinFitResult, MeFit, MeanPoint, MeanSeries, VarianceBin};
pub use ce::{ce_loss, ce_metric, ce_term, clip_prob, outcome_prob, PROB_CLIP};
pub use coarse::{coarse_study, CoarseRow, CoarseStudyReport, STUDY_VERSION};
pub use metrics::{me_baseline_probabilities, mse_vs_truth, self_consistency, ConsistencyBin, MseReport, SelfConsistencyReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CharError {
    #[error("fit is singular: {0}")]
    FitSingular(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Sde(#[from] SdeError),
}
