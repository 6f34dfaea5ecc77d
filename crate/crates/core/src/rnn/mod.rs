//! Recurrent comparator: a GRU trained on readout cross entropy, optionally
//! with physics-inspired penalty terms.

mod bptt;
mod loss;
mod model;
mod train;

use thiserror::Error;

use crate::sdelearn::SdeError;

pub use bptt::LossParts;
pub use loss::{posit_loss, pred_loss, prep_loss, LossWeights};
pub use model::{forward, gru_cell, GruModel, RnnOutput, MODEL_VERSION};
pub use train::{batch_loss, batch_loss_grad, rnn_ce, rnn_probabilities, rnn_states, train_rnn, RnnConfig};

pub use crate::characterize::ce::ce_loss;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RnnError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("dataset needs non-empty train and validation splits")]
    MissingSplit,
    #[error("loss diverged at epoch {epoch}, batch {batch} (loss {loss})")]
    Diverged { epoch: usize, batch: usize, loss: f64 },
    #[error(transparent)]
    Sde(#[from] SdeError),
}
