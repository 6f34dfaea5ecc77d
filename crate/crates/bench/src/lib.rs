//! Shared fixtures for the benchmarks.

use weakcal::rnn::GruModel;
use weakcal::sdelearn::SpamModel;
use weakcal::sme::{generate_trajectory, ConstrainedParams, PhysicalModel};
use weakcal::{Axis, Prep, TrajectoryRecord};

/// Shots of `n_steps` record steps from the device model.
pub fn device_shots(count: usize, n_steps: usize) -> Vec<TrajectoryRecord> {
    let m = PhysicalModel::constrained(ConstrainedParams::DEVICE).expect("device model");
    (0..count)
        .map(|i| {
            let mut s = generate_trajectory(Prep::ALL[i % 6], Axis::ALL[i % 3], &m, n_steps as f64 * 0.04, 0.04, i as u64)
                .expect("trajectory");
            s.truth = None;
            s
        })
        .collect()
}

pub fn gru(hidden: usize) -> GruModel {
    use rand::SeedableRng;
    GruModel::init(hidden, &mut rand_chacha::ChaCha8Rng::seed_from_u64(5))
}

pub fn spam() -> SpamModel {
    SpamModel::ideal()
}
