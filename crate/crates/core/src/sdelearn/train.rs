use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamConfig, AdamState};
use crate::characterize::binfit::{fit_bloch_ode, MeanPoint, MeanSeries};
use crate::qcore::RawBloch;
use crate::sme::{derive_seed, ConstrainedParams, Dataset, Split, StepDiagnostics, TrajectoryRecord};

use super::infer::{batch_gradient, batch_value, CeObjective, MseObjective, Objective};
use super::pack::{PackKind, ParamPack};
use super::spam::{fit_spam, SpamModel};
use super::SdeError;

pub const REPORT_VERSION: &str = "1.0";

/// Where preparation states and readout visibilities come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpamSource {
    /// Cardinal states and unit visibility.
    Ideal,
    /// Tomography on the zero-duration training shots.
    Tomography,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitConfig {
    /// Center of the random initialization. When absent it is taken from a
    /// master-equation fit of the mean outcomes for `Ω_R, Γ_d`, and
    /// `eta_center` for the efficiency.
    pub center: Option<ConstrainedParams>,
    pub eta_center: f64,
    /// Multiplicative half-width of the log-uniform draw.
    pub spread: f64,
    /// Standard deviation of the extra operator-entry perturbations.
    pub operator_sigma: f64,
    /// Initial relaxation rates of the extended pack, µs⁻¹.
    pub relax_rate: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self { center: None, eta_center: 0.25, spread: 3.0, operator_sigma: 0.05, relax_rate: 0.01 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub ensemble: usize,
    pub seed: u64,
    pub init: InitConfig,
    pub spam: SpamSource,
    pub fit_readout: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            batch_size: 1024,
            epochs: 100,
            patience: 10,
            ensemble: 32,
            seed: 0,
            init: InitConfig::default(),
            spam: SpamSource::Tomography,
            fit_readout: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean mini-batch loss during the epoch.
    pub train_loss: f64,
    /// Loss on the validation split after the epoch.
    pub val_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberResult {
    pub member: usize,
    pub seed: u64,
    pub init_params: BTreeMap<String, f64>,
    pub best_params: BTreeMap<String, f64>,
    pub best_raw: Vec<f64>,
    pub init_val_loss: f64,
    pub best_val_loss: f64,
    pub best_epoch: usize,
    pub epochs: Vec<EpochStats>,
    pub skipped_shots: usize,
    pub clipped_steps: u64,
}

/// Outcome of a training run, serialized as JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub format_version: String,
    /// `sde`, `distill` or `rnn`.
    pub model: String,
    /// `cross_entropy`, `mse` or `physics_inspired`.
    pub objective: String,
    pub pack: Option<PackKind>,
    pub seed: u64,
    /// Curve of the selected member; one entry per epoch run.
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub init_val_loss: f64,
    pub best_val_loss: f64,
    pub best_params: BTreeMap<String, f64>,
    pub best_raw: Vec<f64>,
    pub constrained_view: Option<ConstrainedParams>,
    pub members: Vec<MemberResult>,
    pub skipped_shots: usize,
    pub clipped_steps: u64,
    pub spam: Option<SpamModel>,
    pub final_mse: Option<f64>,
    /// Validation cross entropy of the selected model (for RNN runs).
    pub best_val_ce: Option<f64>,
    #[serde(skip)]
    pub wall_clock_s: f64,
}

impl TrainReport {
    pub fn best_pack(&self) -> Option<ParamPack> {
        self.pack.map(|kind| ParamPack { kind, raw: self.best_raw.clone() })
    }
}

/// Mean outcome per (preparation, axis, duration) cell, fitted to the
/// constrained master equation. Gives a rough `(Ω_R, Γ_d)`.
pub fn rough_me_fit(shots: &[&TrajectoryRecord], spam: &SpamModel) -> Result<ConstrainedParams, SdeError> {
    let dt = shots.iter().find(|s| !s.record.is_empty()).map(|s| s.record.dt).unwrap_or(0.04);
    let mut cells: BTreeMap<(usize, usize, usize), (f64, usize)> = BTreeMap::new();
    for s in shots {
        let e = cells.entry((s.prep.index(), s.record.len(), s.axis.index())).or_default();
        e.0 += s.outcome as f64;
        e.1 += 1;
    }
    let mut series = Vec::new();
    for p in 0..6 {
        let points: Vec<MeanPoint> = cells
            .iter()
            .filter(|((q, n, _), _)| *q == p && *n > 0)
            .map(|((_, n, a), (sum, c))| MeanPoint {
                step: *n,
                axis: *a,
                mean: sum / *c as f64 / spam.visibility[*a],
                weight: *c as f64,
            })
            .collect();
        if !points.is_empty() {
            series.push(MeanSeries { r0: spam.r0[p], dt, points });
        }
    }
    let f = fit_bloch_ode(&series).map_err(|e| SdeError::Init(e.to_string()))?;
    Ok(ConstrainedParams { omega_r: f.omega_r, gamma_d: f.gamma_d.max(1e-3), eta: f64::NAN })
}

/// Resolves the SPAM model for training from the training split.
pub fn resolve_spam(train: &[&TrajectoryRecord], source: SpamSource, fit_readout: bool) -> Result<SpamModel, SdeError> {
    match source {
        SpamSource::Ideal => Ok(SpamModel::ideal()),
        SpamSource::Tomography => fit_spam(train.iter().copied(), fit_readout),
    }
}

fn resolve_center(train: &[&TrajectoryRecord], spam: &SpamModel, init: &InitConfig) -> Result<ConstrainedParams, SdeError> {
    match init.center {
        Some(c) => Ok(c),
        None => {
            let mut c = rough_me_fit(train, spam)?;
            c.eta = init.eta_center;
            Ok(c)
        }
    }
}

fn train_member<O: Objective, V: Objective>(
    member: usize,
    kind: PackKind,
    center: ConstrainedParams,
    cfg: &TrainConfig,
    train: &O,
    val: &V,
    fixed_init: Option<&ParamPack>,
) -> MemberResult {
    let seed = derive_seed(cfg.seed, member as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pack = match fixed_init {
        Some(p) => p.clone(),
        None => ParamPack::init(kind, center, cfg.init.spread, cfg.init.operator_sigma, cfg.init.relax_rate, &mut rng),
    };
    let all_val: Vec<usize> = (0..val.n_items()).collect();
    let mut diag = StepDiagnostics::default();
    let mut skipped = 0usize;

    let v0 = batch_value(&pack, val, &all_val);
    skipped += v0.skipped;
    diag.merge(&v0.diag);
    let init_params = pack.named();
    let mut best = (v0.loss, pack.raw.clone(), 0usize);
    let mut adam = AdamState::new(pack.raw.len(), cfg.adam);
    let mut order: Vec<usize> = (0..train.n_items()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut since_best = 0usize;
    let bs = cfg.batch_size.max(1);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut tl, mut tn) = (0.0, 0usize);
        for batch in order.chunks(bs) {
            let ev = batch_gradient(&pack, train, batch);
            skipped += ev.skipped;
            diag.merge(&ev.diag);
            if ev.used == 0 || !ev.loss.is_finite() || ev.grad.iter().any(|g| !g.is_finite()) {
                continue;
            }
            tl += ev.loss * ev.used as f64;
            tn += ev.used;
            adam.update(&mut pack.raw, &ev.grad);
        }
        let ve = batch_value(&pack, val, &all_val);
        skipped += ve.skipped;
        diag.merge(&ve.diag);
        let train_loss = if tn > 0 { tl / tn as f64 } else { f64::NAN };
        epochs.push(EpochStats { epoch, train_loss, val_loss: ve.loss });
        // NaN validation never counts as an improvement
        if ve.loss < best.0 || (best.0.is_nan() && ve.loss.is_finite()) {
            best = (ve.loss, pack.raw.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience.max(1) {
                break;
            }
        }
    }
    let best_pack = ParamPack { kind, raw: best.1 };
    MemberResult {
        member,
        seed,
        init_params,
        best_params: best_pack.named(),
        best_raw: best_pack.raw,
        init_val_loss: v0.loss,
        best_val_loss: best.0,
        best_epoch: best.2,
        epochs,
        skipped_shots: skipped,
        clipped_steps: diag.clipped,
    }
}

fn nan_last(a: f64, b: f64) -> std::cmp::Ordering {
    match (a.is_nan(), b.is_nan()) {
        (true, true) => std::cmp::Ordering::Equal,
        (true, false) => std::cmp::Ordering::Greater,
        (false, true) => std::cmp::Ordering::Less,
        _ => a.partial_cmp(&b).unwrap(),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_ensemble<O: Objective, V: Objective>(
    model: &str,
    objective: &str,
    kind: PackKind,
    center: ConstrainedParams,
    cfg: &TrainConfig,
    train: &O,
    val: &V,
    spam: Option<SpamModel>,
    fixed_init: Option<&ParamPack>,
) -> TrainReport {
    let start = Instant::now();
    let n = if fixed_init.is_some() { 1 } else { cfg.ensemble.max(1) };
    let members: Vec<MemberResult> = (0..n)
        .into_par_iter()
        .map(|k| train_member(k, kind, center, cfg, train, val, fixed_init))
        .collect();
    let best = members
        .iter()
        .min_by(|a, b| nan_last(a.best_val_loss, b.best_val_loss).then(a.member.cmp(&b.member)))
        .expect("at least one member")
        .clone();
    let pack = ParamPack { kind, raw: best.best_raw.clone() };
    TrainReport {
        format_version: REPORT_VERSION.into(),
        model: model.into(),
        objective: objective.into(),
        pack: Some(kind),
        seed: cfg.seed,
        epochs: best.epochs.clone(),
        best_epoch: best.best_epoch,
        init_val_loss: best.init_val_loss,
        best_val_loss: best.best_val_loss,
        best_params: best.best_params.clone(),
        best_raw: best.best_raw.clone(),
        constrained_view: Some(pack.constrained_view()),
        skipped_shots: members.iter().map(|m| m.skipped_shots).sum(),
        clipped_steps: members.iter().map(|m| m.clipped_steps).sum(),
        members,
        spam,
        final_mse: None,
        best_val_ce: None,
        wall_clock_s: start.elapsed().as_secs_f64(),
    }
}

fn splits(data: &Dataset) -> Result<(Vec<&TrajectoryRecord>, Vec<&TrajectoryRecord>), SdeError> {
    let train = data.split(Split::Train);
    let val = data.split(Split::Validation);
    if train.is_empty() || val.is_empty() {
        return Err(SdeError::MissingSplit);
    }
    Ok((train, val))
}

/// Learns SDE parameters by mini-batch Adam on the readout cross entropy.
///
/// Each ensemble member draws its initialization from its own seed, trains
/// with early stopping on validation cross entropy, and keeps its best
/// epoch. The report describes the member with the lowest validation loss.
pub fn train_sde(data: &Dataset, kind: PackKind, cfg: &TrainConfig) -> Result<TrainReport, SdeError> {
    let (train, val) = splits(data)?;
    let spam = resolve_spam(&train, cfg.spam, cfg.fit_readout)?;
    let center = resolve_center(&train, &spam, &cfg.init)?;
    let tobj = CeObjective { shots: train, spam: &spam };
    let vobj = CeObjective { shots: val, spam: &spam };
    Ok(run_ensemble("sde", "cross_entropy", kind, center, cfg, &tobj, &vobj, Some(spam.clone()), None))
}

/// Like [`train_sde`] but starting every run from `init` (a single member).
pub fn train_sde_from(data: &Dataset, init: &ParamPack, cfg: &TrainConfig) -> Result<TrainReport, SdeError> {
    let (train, val) = splits(data)?;
    let spam = resolve_spam(&train, cfg.spam, cfg.fit_readout)?;
    let center = init.constrained_view();
    let tobj = CeObjective { shots: train, spam: &spam };
    let vobj = CeObjective { shots: val, spam: &spam };
    Ok(run_ensemble("sde", "cross_entropy", init.kind, center, cfg, &tobj, &vobj, Some(spam.clone()), Some(init)))
}

/// Fits SDE parameters so that filtered trajectories match the given
/// target series (for example RNN outputs on the same records) in mean
/// squared distance. `targets[i]` belongs to `data.shots[i]`.
pub fn distill(data: &Dataset, targets: &[Vec<RawBloch>], kind: PackKind, cfg: &TrainConfig) -> Result<TrainReport, SdeError> {
    if targets.len() != data.shots.len() {
        return Err(SdeError::Mismatch(format!("{} targets for {} shots", targets.len(), data.shots.len())));
    }
    let mut tr = (Vec::new(), Vec::new());
    let mut va = (Vec::new(), Vec::new());
    for ((s, t), sp) in data.shots.iter().zip(targets).zip(&data.splits) {
        match sp {
            Split::Train => {
                tr.0.push(s);
                tr.1.push(t.as_slice());
            }
            Split::Validation => {
                va.0.push(s);
                va.1.push(t.as_slice());
            }
            Split::Test => {}
        }
    }
    if tr.0.is_empty() || va.0.is_empty() {
        return Err(SdeError::MissingSplit);
    }
    let spam = resolve_spam(&tr.0, cfg.spam, cfg.fit_readout)?;
    let center = resolve_center(&tr.0, &spam, &cfg.init)?;
    let all: Vec<&TrajectoryRecord> = tr.0.iter().chain(&va.0).copied().collect();
    let all_t: Vec<&[RawBloch]> = tr.1.iter().chain(&va.1).copied().collect();
    let tobj = MseObjective { shots: tr.0, targets: tr.1, spam: &spam };
    let vobj = MseObjective { shots: va.0, targets: va.1, spam: &spam };
    let mut rep = run_ensemble("distill", "mse", kind, center, cfg, &tobj, &vobj, Some(spam.clone()), None);
    let full = MseObjective { shots: all, targets: all_t, spam: &spam };
    let idx: Vec<usize> = (0..full.n_items()).collect();
    let pack = rep.best_pack().expect("pack");
    rep.final_mse = Some(batch_value(&pack, &full, &idx).loss);
    Ok(rep)
}
