use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::sdelearn::{batch_value, train_sde, CeObjective, PackKind, ParamPack, TrainConfig, TrainReport};
use crate::sme::{ConstrainedParams, Dataset, Split};

use super::CharError;

pub const STUDY_VERSION: &str = "1.0";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoarseRow {
    pub k: usize,
    pub dt: f64,
    pub omega_r: f64,
    pub gamma_d: f64,
    pub eta: f64,
    /// Relative errors of `{Ω_R, Γ_d, η}`.
    pub rel_err: [f64; 3],
    pub val_ce_learned: f64,
    pub val_ce_true: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoarseStudyReport {
    pub format_version: String,
    pub base_dt: f64,
    pub truth: ConstrainedParams,
    pub rows: Vec<CoarseRow>,
    #[serde(skip)]
    pub reports: Vec<TrainReport>,
}

impl CoarseStudyReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "k,dt,omega_r,gamma_d,eta,rel_err_omega_r,rel_err_gamma_d,rel_err_eta,val_ce_learned,val_ce_true\n",
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.k, r.dt, r.omega_r, r.gamma_d, r.eta, r.rel_err[0], r.rel_err[1], r.rel_err[2], r.val_ce_learned, r.val_ce_true
            ));
        }
        s
    }
}

/// Trains one SDE model per coarse-graining factor in `ks` and compares it
/// with the true parameters on the validation split of the same level.
pub fn coarse_study(
    base: &Dataset,
    ks: &[usize],
    kind: PackKind,
    cfg: &TrainConfig,
    truth: ConstrainedParams,
) -> Result<CoarseStudyReport, CharError> {
    let mut sorted = ks.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.is_empty() || sorted[0] == 0 {
        return Err(CharError::InvalidInput("coarse factors must be positive".into()));
    }
    let rows: Vec<(CoarseRow, TrainReport)> = sorted
        .par_iter()
        .map(|&k| -> Result<_, CharError> {
            let data = base.coarse_grained(k).map_err(crate::sdelearn::SdeError::from)?;
            let rep = train_sde(&data, kind, cfg)?;
            let spam = rep.spam.clone().unwrap_or_default();
            let val = data.split(Split::Validation);
            let obj = CeObjective { shots: val, spam: &spam };
            let idx: Vec<usize> = (0..obj.shots.len()).collect();
            let true_pack = ParamPack::from_constrained(PackKind::Constrained, truth, 0.0);
            let ce_true = batch_value(&true_pack, &obj, &idx).loss;
            let learned = rep.best_pack().expect("sde pack");
            let ce_learned = batch_value(&learned, &obj, &idx).loss;
            let v = learned.constrained_view();
            let row = CoarseRow {
                k,
                dt: data.meta.dt,
                omega_r: v.omega_r,
                gamma_d: v.gamma_d,
                eta: v.eta,
                rel_err: v.relative_error(&truth),
                val_ce_learned: ce_learned,
                val_ce_true: ce_true,
            };
            Ok((row, rep))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (rows, reports) = rows.into_iter().unzip();
    Ok(CoarseStudyReport { format_version: STUDY_VERSION.into(), base_dt: base.meta.dt, truth, rows, reports })
}
