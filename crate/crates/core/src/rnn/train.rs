use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{tree_reduce, AdamConfig, AdamState};
use crate::characterize::ce::{ce_loss, outcome_prob};
use crate::qcore::RawBloch;
use crate::sdelearn::{resolve_spam, EpochStats, SpamModel, SpamSource, TrainReport, REPORT_VERSION};
use crate::sme::{Dataset, Split, TrajectoryRecord};

use super::bptt::{shot_loss_grad, LossParts, Norms, ShotTarget};
use super::loss::LossWeights;
use super::model::{forward, GruModel};
use super::RnnError;

/// Shots per sequential work unit; fixed so sums do not depend on threads.
const CHUNK: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RnnConfig {
    pub hidden: usize,
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub spam: SpamSource,
    pub fit_readout: bool,
    /// Keep `T = 0` shots in the loss. By default they only feed SPAM
    /// tomography and the network trains on the weak-measurement series.
    pub zero_duration_in_loss: bool,
}

impl Default for RnnConfig {
    fn default() -> Self {
        Self {
            hidden: 16,
            adam: AdamConfig::default(),
            batch_size: 1024,
            epochs: 100,
            patience: 10,
            seed: 0,
            spam: SpamSource::Tomography,
            fit_readout: false,
            zero_duration_in_loss: false,
        }
    }
}

fn target<'a>(shot: &'a TrajectoryRecord, spam: &SpamModel) -> ShotTarget<'a> {
    ShotTarget { shot, r0: spam.r0[shot.prep.index()], visibility: spam.visibility[shot.axis.index()] }
}

/// Batch-mean loss terms without the gradient; all shots share one length.
pub fn batch_loss(m: &GruModel, shots: &[&TrajectoryRecord], spam: &SpamModel, w: &LossWeights) -> LossParts {
    let norms = Norms::batch(shots.len(), shots[0].record.len());
    let parts: Vec<LossParts> = shots
        .par_chunks(CHUNK)
        .map(|c| c.iter().fold(LossParts::default(), |p, s| p.add(shot_loss_grad(m, &target(s, spam), w, norms, None))))
        .collect();
    tree_reduce(parts, LossParts::add).expect("non-empty batch")
}

/// Batch-mean loss terms and their gradient by backpropagation through
/// time; all shots must share one length.
pub fn batch_loss_grad(m: &GruModel, shots: &[&TrajectoryRecord], spam: &SpamModel, w: &LossWeights) -> (LossParts, GruModel) {
    let norms = Norms::batch(shots.len(), shots[0].record.len());
    let parts: Vec<(LossParts, GruModel)> = shots
        .par_chunks(CHUNK)
        .map(|c| {
            let mut g = GruModel::zeros(m.hidden);
            let mut p = LossParts::default();
            for s in c {
                p = p.add(shot_loss_grad(m, &target(s, spam), w, norms, Some(&mut g)));
            }
            (p, g)
        })
        .collect();
    tree_reduce(parts, |mut a, b| {
        a.1.add_assign(&b.1);
        (a.0.add(b.0), a.1)
    })
    .expect("non-empty batch")
}

/// Outcome probability of each shot's final readout.
pub fn rnn_probabilities(m: &GruModel, spam: &SpamModel, shots: &[&TrajectoryRecord]) -> Vec<f64> {
    shots
        .par_iter()
        .map(|s| {
            let out = forward(m, s);
            let r = out.states[out.states.len() - 1].as_array()[s.axis.index()];
            outcome_prob(r, spam.visibility[s.axis.index()])
        })
        .collect()
}

/// Decoded state series of each shot.
pub fn rnn_states(m: &GruModel, shots: &[&TrajectoryRecord]) -> Vec<Vec<RawBloch>> {
    shots.par_iter().map(|s| forward(m, s).states).collect()
}

pub fn rnn_ce(m: &GruModel, spam: &SpamModel, shots: &[&TrajectoryRecord]) -> f64 {
    let pi = rnn_probabilities(m, spam, shots);
    let y: Vec<i8> = shots.iter().map(|s| s.outcome).collect();
    ce_loss(&pi, &y)
}

/// Trains the GRU by BPTT and Adam on `CE + w_posit·L_posit + w_prep·L_prep
/// + w_dm·L_ΔM`, stopping early on validation cross entropy.
///
/// Validation CE covers the same shots the loss does. Mini-batches hold
/// shots of a single length; batch order and membership
/// are reshuffled every epoch from `cfg.seed`.
pub fn train_rnn(data: &Dataset, weights: LossWeights, cfg: &RnnConfig) -> Result<(GruModel, TrainReport), RnnError> {
    let start = Instant::now();
    weights.validate()?;
    let all_train = data.split(Split::Train);
    let spam = resolve_spam(&all_train, cfg.spam, cfg.fit_readout)?;
    let keep = |s: &&TrajectoryRecord| cfg.zero_duration_in_loss || !s.record.is_empty();
    let train: Vec<&TrajectoryRecord> = all_train.iter().copied().filter(keep).collect();
    let val: Vec<&TrajectoryRecord> = data.split(Split::Validation).into_iter().filter(keep).collect();
    if train.is_empty() || val.is_empty() {
        return Err(RnnError::MissingSplit);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = GruModel::init(cfg.hidden.max(1), &mut rng);
    let mut groups: BTreeMap<usize, Vec<&TrajectoryRecord>> = BTreeMap::new();
    for s in &train {
        groups.entry(s.record.len()).or_default().push(s);
    }
    let bs = cfg.batch_size.max(1);
    let mut flat = model.to_flat();
    let mut adam = AdamState::new(flat.len(), cfg.adam);

    let init_ce = rnn_ce(&model, &spam, &val);
    let mut best = (init_ce, model.clone(), 0usize);
    let mut epochs = Vec::new();
    let mut since_best = 0usize;
    for epoch in 1..=cfg.epochs {
        let mut batches: Vec<Vec<&TrajectoryRecord>> = Vec::new();
        for g in groups.values_mut() {
            g.shuffle(&mut rng);
            batches.extend(g.chunks(bs).map(|c| c.to_vec()));
        }
        batches.shuffle(&mut rng);
        let (mut tl, mut tn) = (0.0, 0usize);
        for (bi, batch) in batches.iter().enumerate() {
            let (parts, grad) = batch_loss_grad(&model, batch, &spam, &weights);
            let loss = parts.total(&weights);
            let g = grad.to_flat();
            if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
                return Err(RnnError::Diverged { epoch, batch: bi, loss });
            }
            tl += loss * batch.len() as f64;
            tn += batch.len();
            adam.update(&mut flat, &g);
            model.set_flat(&flat);
        }
        let val_ce = rnn_ce(&model, &spam, &val);
        epochs.push(EpochStats { epoch, train_loss: tl / tn as f64, val_loss: val_ce });
        if val_ce < best.0 {
            best = (val_ce, model.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience.max(1) {
                break;
            }
        }
    }
    let mut params = BTreeMap::new();
    params.insert("hidden".to_string(), model.hidden as f64);
    params.insert("w_posit".to_string(), weights.w_posit);
    params.insert("w_prep".to_string(), weights.w_prep);
    params.insert("w_dm".to_string(), weights.w_dm);
    let report = TrainReport {
        format_version: REPORT_VERSION.into(),
        model: "rnn".into(),
        objective: if weights.is_black_box() { "cross_entropy" } else { "physics_inspired" }.into(),
        pack: None,
        seed: cfg.seed,
        epochs,
        best_epoch: best.2,
        init_val_loss: init_ce,
        best_val_loss: best.0,
        best_params: params,
        best_raw: Vec::new(),
        constrained_view: None,
        members: Vec::new(),
        skipped_shots: 0,
        clipped_steps: 0,
        spam: Some(spam),
        final_mse: None,
        best_val_ce: Some(best.0),
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    Ok((best.1, report))
}
