use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::characterize::ce::ce_loss;
use crate::sme::TrajectoryRecord;

use super::infer::predict_probabilities;
use super::spam::SpamModel;
use super::train::TrainReport;
use super::SdeError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub name: String,
    pub n_params: usize,
    pub test_ce: f64,
    /// Shots whose propagation failed and were left out.
    pub skipped: usize,
}

/// Likelihood-ratio comparison of a model with the next larger one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NestedComparison {
    pub smaller: String,
    pub larger: String,
    /// `CE(smaller) − CE(larger)`.
    pub delta_ce: f64,
    /// `2·N·ΔCE`.
    pub lr_statistic: f64,
    pub dof: usize,
    /// Upper tail of χ²(dof) at the statistic (1 when dof is 0 or ΔCE ≤ 0).
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub n_test: usize,
    pub models: Vec<ModelScore>,
    pub comparisons: Vec<NestedComparison>,
}

/// Scores trained SDE models on a test set and compares consecutive ones.
///
/// `reports` must be ordered by increasing parameter count. Every model is
/// scored on the same shots, dropping any shot on which any model fails.
pub fn model_select(reports: &[(String, &TrainReport)], test: &[&TrajectoryRecord]) -> Result<SelectionReport, SdeError> {
    let mut probs = Vec::new();
    let mut sizes = Vec::new();
    for (name, r) in reports {
        let pack = r.best_pack().ok_or_else(|| SdeError::Mismatch(format!("report {name} has no SDE pack")))?;
        let spam = r.spam.clone().unwrap_or_else(SpamModel::ideal);
        sizes.push(pack.raw.len());
        probs.push(predict_probabilities(&pack.to_model(), &spam, test));
    }
    for w in sizes.windows(2) {
        if w[1] < w[0] {
            return Err(SdeError::Mismatch("models must be ordered by parameter count".into()));
        }
    }
    let keep: Vec<usize> = (0..test.len()).filter(|&i| probs.iter().all(|p| p[i].is_finite())).collect();
    let y: Vec<i8> = keep.iter().map(|&i| test[i].outcome).collect();
    let n = keep.len();
    let models: Vec<ModelScore> = reports
        .iter()
        .zip(&probs)
        .zip(&sizes)
        .map(|(((name, _), p), &k)| {
            let pk: Vec<f64> = keep.iter().map(|&i| p[i]).collect();
            ModelScore { name: name.clone(), n_params: k, test_ce: ce_loss(&pk, &y), skipped: test.len() - n }
        })
        .collect();
    let comparisons = models
        .windows(2)
        .map(|w| {
            let delta = w[0].test_ce - w[1].test_ce;
            let stat = 2.0 * n as f64 * delta;
            let dof = w[1].n_params - w[0].n_params;
            let p_value = if dof == 0 || stat <= 0.0 {
                1.0
            } else {
                1.0 - ChiSquared::new(dof as f64).map(|c| c.cdf(stat)).unwrap_or(0.0)
            };
            NestedComparison {
                smaller: w[0].name.clone(),
                larger: w[1].name.clone(),
                delta_ce: delta,
                lr_statistic: stat,
                dof,
                p_value,
            }
        })
        .collect();
    Ok(SelectionReport { n_test: n, models, comparisons })
}
