//! Learning SDE parameters from weak records and final readouts.

mod infer;
mod pack;
mod select;
mod spam;
mod train;

use thiserror::Error;

use crate::sme::{Axis, Prep, SmeError};

pub use infer::{
    batch_gradient, batch_value, infer_trajectory, predict_outcome_prob, predict_probabilities, shot_probability,
    BatchEval, CeObjective, MseObjective, Objective,
};
pub use pack::{ops_from_raw, PackKind, ParamPack};
pub use select::{model_select, ModelScore, NestedComparison, SelectionReport};
pub use spam::{fit_spam, SpamModel};
pub use train::{
    distill, resolve_spam, rough_me_fit, train_sde, train_sde_from, EpochStats, InitConfig, MemberResult,
    SpamSource, TrainConfig, TrainReport, REPORT_VERSION,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdeError {
    #[error("no zero-duration shots for preparation {prep:?}, axis {axis:?}")]
    MissingCell { prep: Prep, axis: Axis },
    #[error("invalid SPAM model: {0}")]
    InvalidSpam(String),
    #[error("dataset needs non-empty train and validation splits")]
    MissingSplit,
    #[error("initialization failed: {0}")]
    Init(String),
    #[error("{0}")]
    Mismatch(String),
    #[error(transparent)]
    Sme(#[from] SmeError),
}
