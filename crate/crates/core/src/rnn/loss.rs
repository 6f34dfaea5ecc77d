use serde::{Deserialize, Serialize};

use crate::qcore::{BlochVector, RawBloch};

/// Relative weights of the physics-inspired terms. All zero reduces the
/// objective to plain cross entropy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub w_posit: f64,
    pub w_prep: f64,
    pub w_dm: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { w_posit: 0.36, w_prep: 1.7, w_dm: 2.1 }
    }
}

impl LossWeights {
    pub const BLACK_BOX: LossWeights = LossWeights { w_posit: 0.0, w_prep: 0.0, w_dm: 0.0 };

    pub fn validate(&self) -> Result<(), super::RnnError> {
        if [self.w_posit, self.w_prep, self.w_dm].iter().all(|w| *w >= 0.0 && w.is_finite()) {
            Ok(())
        } else {
            Err(super::RnnError::InvalidModel(format!("negative or non-finite loss weights {self:?}")))
        }
    }

    pub fn is_black_box(&self) -> bool {
        *self == Self::BLACK_BOX
    }
}

/// Mean of `ReLU(|r̃|² − 1)` over all states.
pub fn posit_loss(states: &[RawBloch]) -> f64 {
    if states.is_empty() {
        return 0.0;
    }
    states.iter().map(|r| (r.norm_sqr() - 1.0).max(0.0)).sum::<f64>() / states.len() as f64
}

/// Mean squared distance between predicted and target initial states.
pub fn prep_loss(initial: &[RawBloch], targets: &[BlochVector]) -> f64 {
    assert_eq!(initial.len(), targets.len(), "initial state count mismatch");
    if initial.is_empty() {
        return 0.0;
    }
    initial
        .iter()
        .zip(targets)
        .map(|(a, b)| (a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2))
        .sum::<f64>()
        / initial.len() as f64
}

/// Mean squared error of record predictions, flattened over quadratures.
pub fn pred_loss(pred: &[f64], record: &[f64]) -> f64 {
    assert_eq!(pred.len(), record.len(), "prediction length mismatch");
    if pred.is_empty() {
        return 0.0;
    }
    pred.iter().zip(record).map(|(p, m)| (p - m).powi(2)).sum::<f64>() / pred.len() as f64
}
