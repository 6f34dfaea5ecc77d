use rayon::prelude::*;

use crate::autodiff::{tree_reduce, Dual};
use crate::characterize::ce::{ce_term, outcome_prob};
use crate::qcore::{bloch_components, rho_from_components, BlochVector, Mat2, RawBloch, Scalar};
use crate::sme::{invert_record, milstein_step, Axis, ModelOps, PhysicalModel, SmeError, StepDiagnostics, WeakRecord};

use super::pack::{ops_from_raw, PackKind, ParamPack};
use super::spam::SpamModel;
use crate::sme::TrajectoryRecord;

/// Filters the record through the model: at each step the Wiener increments
/// are recovered by subtracting the predicted signal, then one Milstein step
/// is taken. `visit` sees every state including the initial one.
#[inline]
pub(crate) fn propagate<T: Scalar, F: FnMut(usize, &Mat2<T>)>(
    ops: &ModelOps<T>,
    r0: &BlochVector,
    rec: &WeakRecord,
    diag: &mut StepDiagnostics,
    mut visit: F,
) -> Result<Mat2<T>, SmeError> {
    let mut rho = rho_from_components(T::cst(r0.x), T::cst(r0.y), T::cst(r0.z));
    visit(0, &rho);
    let dt = rec.dt;
    for t in 0..rec.len() {
        let (wi, wq) = invert_record(&rho, T::cst(rec.dm_i[t]), T::cst(rec.dm_q[t]), ops, dt);
        rho = milstein_step(&rho, wi, wq, ops, dt, diag)?;
        visit(t + 1, &rho);
    }
    Ok(rho)
}

fn to_bloch(m: &Mat2<f64>) -> BlochVector {
    let [x, y, z] = bloch_components(m);
    BlochVector { x, y, z }
}

/// Bloch series of the conditional state, length `record.len() + 1`.
pub fn infer_trajectory(m: &PhysicalModel, spam: &SpamModel, shot: &TrajectoryRecord) -> Result<Vec<BlochVector>, SmeError> {
    let ops = m.ops::<f64>();
    let mut out = Vec::with_capacity(shot.record.len() + 1);
    let mut diag = StepDiagnostics::default();
    propagate(&ops, &spam.r0[shot.prep.index()], &shot.record, &mut diag, |_, rho| out.push(to_bloch(rho)))?;
    Ok(out)
}

/// `Π = (1 + f_α r_T·e_α)/2` from the last state of `series`, clipped.
pub fn predict_outcome_prob(series: &[BlochVector], axis: Axis, spam: &SpamModel) -> f64 {
    let r = series.last().expect("non-empty series");
    outcome_prob(r.component(axis.index()), spam.visibility[axis.index()])
}

/// Outcome probability of one shot under a model.
pub fn shot_probability<T: Scalar>(
    ops: &ModelOps<T>,
    spam: &SpamModel,
    shot: &TrajectoryRecord,
    diag: &mut StepDiagnostics,
) -> Result<T, SmeError> {
    let rho = propagate(ops, &spam.r0[shot.prep.index()], &shot.record, diag, |_, _| {})?;
    let r = bloch_components(&rho)[shot.axis.index()];
    Ok(outcome_prob(r, spam.visibility[shot.axis.index()]))
}

/// Per-item loss used by the batch evaluators: returns a sum of loss terms
/// and the number of terms it covers.
pub trait Objective: Sync {
    fn n_items(&self) -> usize;
    fn eval<T: Scalar>(&self, ops: &ModelOps<T>, item: usize, diag: &mut StepDiagnostics) -> Result<(T, f64), SmeError>;
}

/// Cross entropy of the final readout.
pub struct CeObjective<'a> {
    pub shots: Vec<&'a TrajectoryRecord>,
    pub spam: &'a SpamModel,
}

impl Objective for CeObjective<'_> {
    fn n_items(&self) -> usize {
        self.shots.len()
    }

    fn eval<T: Scalar>(&self, ops: &ModelOps<T>, item: usize, diag: &mut StepDiagnostics) -> Result<(T, f64), SmeError> {
        let shot = self.shots[item];
        let p = shot_probability(ops, self.spam, shot, diag)?;
        Ok((ce_term(p, shot.outcome), 1.0))
    }
}

/// Squared distance between the filtered trajectory and a target series.
pub struct MseObjective<'a> {
    pub shots: Vec<&'a TrajectoryRecord>,
    pub targets: Vec<&'a [RawBloch]>,
    pub spam: &'a SpamModel,
}

impl Objective for MseObjective<'_> {
    fn n_items(&self) -> usize {
        self.shots.len()
    }

    fn eval<T: Scalar>(&self, ops: &ModelOps<T>, item: usize, diag: &mut StepDiagnostics) -> Result<(T, f64), SmeError> {
        let shot = self.shots[item];
        let target = self.targets[item];
        if target.len() != shot.record.len() + 1 {
            return Err(SmeError::InvalidRecord(format!(
                "target series has {} states for {} steps",
                target.len(),
                shot.record.len()
            )));
        }
        let mut acc = T::zero();
        propagate(ops, &self.spam.r0[shot.prep.index()], &shot.record, diag, |t, rho| {
            let [x, y, z] = bloch_components(rho);
            let g = &target[t];
            acc += (x - g.x).square() + (y - g.y).square() + (z - g.z).square();
        })?;
        Ok((acc, target.len() as f64))
    }
}

/// Aggregate of a batch evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchEval {
    /// Mean loss over the terms of all non-skipped items.
    pub loss: f64,
    /// Gradient of `loss` with respect to the raw parameters (empty for
    /// value-only evaluations).
    pub grad: Vec<f64>,
    pub used: usize,
    pub skipped: usize,
    pub diag: StepDiagnostics,
}

struct Partial<T> {
    sum: T,
    count: f64,
    used: usize,
    skipped: usize,
    diag: StepDiagnostics,
}

fn combine<T: Scalar>(a: Partial<T>, b: Partial<T>) -> Partial<T> {
    let mut diag = a.diag;
    diag.merge(&b.diag);
    Partial { sum: a.sum + b.sum, count: a.count + b.count, used: a.used + b.used, skipped: a.skipped + b.skipped, diag }
}

fn run_batch<T: Scalar, O: Objective>(ops: &ModelOps<T>, obj: &O, items: &[usize]) -> Partial<T> {
    let parts: Vec<Partial<T>> = items
        .par_iter()
        .map(|&i| {
            let mut diag = StepDiagnostics::default();
            match obj.eval(ops, i, &mut diag) {
                Ok((v, c)) if v.value().is_finite() => Partial { sum: v, count: c, used: 1, skipped: 0, diag },
                _ => Partial { sum: T::zero(), count: 0.0, used: 0, skipped: 1, diag },
            }
        })
        .collect();
    tree_reduce(parts, combine).unwrap_or(Partial {
        sum: T::zero(),
        count: 0.0,
        used: 0,
        skipped: 0,
        diag: StepDiagnostics::default(),
    })
}

fn finish<T: Scalar>(p: Partial<T>, grad: impl Fn(&T) -> Vec<f64>) -> BatchEval {
    let (loss, g) = if p.count > 0.0 {
        let mean = p.sum / p.count;
        (mean.value(), grad(&mean))
    } else {
        (f64::NAN, grad(&T::zero()))
    };
    BatchEval { loss, grad: g, used: p.used, skipped: p.skipped, diag: p.diag }
}

/// Loss of `pack` over `items`, without derivatives.
pub fn batch_value<O: Objective>(pack: &ParamPack, obj: &O, items: &[usize]) -> BatchEval {
    let ops = pack.ops::<f64>();
    finish(run_batch(&ops, obj, items), |_| Vec::new())
}

fn grad_n<const N: usize, O: Objective>(pack: &ParamPack, obj: &O, items: &[usize]) -> BatchEval {
    let raw: Vec<Dual<N>> = (0..N).map(|i| Dual::variable(pack.raw[i], i)).collect();
    let ops = ops_from_raw(pack.kind, &raw);
    finish(run_batch(&ops, obj, items), |d: &Dual<N>| d.d.to_vec())
}

/// Loss and forward-mode gradient of `pack` over `items`. Items whose
/// propagation fails are skipped and counted.
pub fn batch_gradient<O: Objective>(pack: &ParamPack, obj: &O, items: &[usize]) -> BatchEval {
    match pack.kind {
        PackKind::Constrained => grad_n::<3, O>(pack, obj, items),
        PackKind::Operator => grad_n::<12, O>(pack, obj, items),
        PackKind::Extended => grad_n::<14, O>(pack, obj, items),
    }
}

/// Outcome probabilities for many shots (NaN where propagation failed).
pub fn predict_probabilities(m: &PhysicalModel, spam: &SpamModel, shots: &[&TrajectoryRecord]) -> Vec<f64> {
    let ops = m.ops::<f64>();
    shots
        .par_iter()
        .map(|s| {
            let mut d = StepDiagnostics::default();
            shot_probability(&ops, spam, s, &mut d).unwrap_or(f64::NAN)
        })
        .collect()
}
