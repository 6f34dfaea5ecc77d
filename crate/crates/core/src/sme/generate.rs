use crate::qcore::{bloch_components, rho_from_bloch, BlochVector};

use super::model::PhysicalModel;
use super::record::{Axis, Prep, TrajectoryRecord, WeakRecord};
use super::rng::GaussianSource;
use super::step::{milstein_step, synth_record, StepDiagnostics};
use super::{steps_in, SmeError};

/// A simulated path: record increments, the generating Bloch series
/// (length `record.len() + 1`) and stepper diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub record: WeakRecord,
    pub truth: Vec<BlochVector>,
    pub diag: StepDiagnostics,
}

fn to_bloch(m: &crate::qcore::Complex2x2) -> BlochVector {
    let [x, y, z] = bloch_components(m);
    BlochVector { x, y, z }
}

fn run<F>(r0: BlochVector, m: &PhysicalModel, n: usize, dt: f64, mut noise: F) -> Result<Trajectory, SmeError>
where
    F: FnMut(usize) -> (f64, f64),
{
    let ops = m.ops::<f64>();
    let mut rho = *rho_from_bloch(r0)?.matrix();
    let mut diag = StepDiagnostics::default();
    let mut dm_i = Vec::with_capacity(n);
    let mut dm_q = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n + 1);
    truth.push(to_bloch(&rho));
    for t in 0..n {
        let (wi, wq) = noise(t);
        let (mi, mq) = synth_record(&rho, wi, wq, &ops, dt);
        dm_i.push(mi);
        dm_q.push(mq);
        rho = milstein_step(&rho, wi, wq, &ops, dt, &mut diag)?;
        truth.push(to_bloch(&rho));
    }
    Ok(Trajectory { record: WeakRecord { dm_i, dm_q, dt }, truth, diag })
}

/// Integrates the SME from `r0` along an explicit Brownian path.
pub fn integrate_path(
    r0: BlochVector,
    m: &PhysicalModel,
    dw_i: &[f64],
    dw_q: &[f64],
    dt: f64,
) -> Result<Trajectory, SmeError> {
    if dw_i.len() != dw_q.len() {
        return Err(SmeError::InvalidRecord("noise path lengths differ".into()));
    }
    run(r0, m, dw_i.len(), dt, |t| (dw_i[t], dw_q[t]))
}

/// Born probability of outcome `+1` for a projective measurement along `axis`.
pub fn born_probability(r: &BlochVector, axis: Axis) -> f64 {
    ((1.0 + r.component(axis.index())) / 2.0).clamp(0.0, 1.0)
}

pub fn sample_outcome(r: &BlochVector, axis: Axis, src: &mut GaussianSource) -> i8 {
    if src.uniform() < born_probability(r, axis) {
        1
    } else {
        -1
    }
}

/// Simulates `n_steps` fine steps from an ideal preparation with noise drawn
/// from `seed`, then samples the readout from the terminal state.
pub fn simulate_shot(
    prep: Prep,
    axis: Axis,
    m: &PhysicalModel,
    n_steps: usize,
    dt_fine: f64,
    seed: u64,
) -> Result<(Trajectory, i8), SmeError> {
    if !(dt_fine > 0.0) {
        return Err(SmeError::InvalidGrid(format!("non-positive step {dt_fine}")));
    }
    let mut src = GaussianSource::new(seed);
    let sd = dt_fine.sqrt();
    let traj = run(prep.bloch(), m, n_steps, dt_fine, |_| {
        let (a, b) = src.normal_pair();
        (a * sd, b * sd)
    })?;
    let outcome = sample_outcome(traj.truth.last().expect("non-empty truth"), axis, &mut src);
    Ok((traj, outcome))
}

/// One synthetic shot of duration `t_total` at the fine step `dt_fine`.
pub fn generate_trajectory(
    prep: Prep,
    axis: Axis,
    m: &PhysicalModel,
    t_total: f64,
    dt_fine: f64,
    seed: u64,
) -> Result<TrajectoryRecord, SmeError> {
    let n = steps_in(t_total, dt_fine)?;
    let (traj, outcome) = simulate_shot(prep, axis, m, n, dt_fine, seed)?;
    Ok(TrajectoryRecord { prep, record: traj.record, axis, outcome, truth: Some(traj.truth) })
}
