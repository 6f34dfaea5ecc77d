use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::qcore::BlochVector;

use super::generate::simulate_shot;
use super::model::{PhysicalModel, CHI, KAPPA};
use super::record::{coarse_grain, Axis, Prep, TrajectoryRecord};
use super::rng::derive_seed;
use super::{steps_in, SmeError};

pub const FORMAT_VERSION: &str = "1.0";

const AXIS_SALT: u64 = 0xA5A5_0000_0000_0001;
const SPLIT_SALT: u64 = 0x5EED_5717_0000_0000;

pub const SPLIT_RULE: &str = "u = splitmix64(0x5EED571700000000 + 0x9E3779B97F4A7C15*(index+1)) / 2^64; \
train if u < f_train, validation if u < f_train + f_validation, else test";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// Split of the shot at `index`; depends on the index and fractions only.
pub fn split_for_index(index: usize, fractions: &[f64; 3]) -> Split {
    let u = (derive_seed(SPLIT_SALT, index as u64) >> 11) as f64 / (1u64 << 53) as f64;
    if u < fractions[0] {
        Split::Train
    } else if u < fractions[0] + fractions[1] {
        Split::Validation
    } else {
        Split::Test
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub format_version: String,
    /// Record step of the stored shots, µs.
    pub dt: f64,
    /// Integration step used for generation, µs.
    pub dt_fine: f64,
    /// Total durations, µs.
    pub t_grid: Vec<f64>,
    /// Shots per (preparation, axis) setup at each entry of `t_grid`.
    pub counts: Vec<usize>,
    pub master_seed: u64,
    pub generator: Option<PhysicalModel>,
    pub chi: f64,
    pub kappa: f64,
    /// Train, validation and test fractions.
    pub split_fractions: [f64; 3],
    pub split_rule: String,
    pub store_truth: bool,
}

impl DatasetMeta {
    pub fn new(
        generator: PhysicalModel,
        dt: f64,
        dt_fine: f64,
        t_grid: Vec<f64>,
        counts: Vec<usize>,
        master_seed: u64,
    ) -> Self {
        Self {
            format_version: FORMAT_VERSION.into(),
            dt,
            dt_fine,
            t_grid,
            counts,
            master_seed,
            generator: Some(generator),
            chi: CHI,
            kappa: KAPPA,
            split_fractions: [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
            split_rule: SPLIT_RULE.into(),
            store_truth: true,
        }
    }

    /// The default grid `T ∈ {0, dt, …, t_max}` with equal counts.
    pub fn uniform_grid(dt: f64, t_max: f64, per_setup: usize) -> Result<(Vec<f64>, Vec<usize>), SmeError> {
        let n = steps_in(t_max, dt)?;
        let grid: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
        let counts = vec![per_setup; grid.len()];
        Ok((grid, counts))
    }

    pub fn validate(&self) -> Result<(), SmeError> {
        let bad = |s: String| Err(SmeError::InvalidMeta(s));
        let sum: f64 = self.split_fractions.iter().sum();
        if self.split_fractions.iter().any(|f| !(*f >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return bad(format!("split fractions {:?} must be non-negative and sum to 1", self.split_fractions));
        }
        if self.t_grid.len() != self.counts.len() {
            return bad("t_grid and counts differ in length".into());
        }
        if !(self.dt > 0.0 && self.dt_fine > 0.0) {
            return bad("time steps must be positive".into());
        }
        let k = steps_in(self.dt, self.dt_fine)?;
        if k == 0 {
            return bad("dt is smaller than dt_fine".into());
        }
        for &t in &self.t_grid {
            steps_in(t, self.dt)?;
        }
        if let Some(m) = &self.generator {
            m.validate()?;
        }
        Ok(())
    }

    /// Total number of shots the grid describes.
    pub fn n_shots(&self) -> usize {
        self.counts.iter().map(|c| c * Prep::ALL.len() * Axis::ALL.len()).sum()
    }

    /// Coarse-graining factor from the generation step to the record step.
    pub fn fine_factor(&self) -> Result<usize, SmeError> {
        steps_in(self.dt, self.dt_fine)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub shots: Vec<TrajectoryRecord>,
    pub splits: Vec<Split>,
}

impl Dataset {
    /// Wraps shots, assigning splits from their positions.
    pub fn new(meta: DatasetMeta, shots: Vec<TrajectoryRecord>) -> Self {
        let splits = (0..shots.len()).map(|i| split_for_index(i, &meta.split_fractions)).collect();
        Self { meta, shots, splits }
    }

    pub fn len(&self) -> usize {
        self.shots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shots.is_empty()
    }

    pub fn split(&self, s: Split) -> Vec<&TrajectoryRecord> {
        self.shots.iter().zip(&self.splits).filter(|(_, x)| **x == s).map(|(r, _)| r).collect()
    }

    /// Shots satisfying `keep`, retaining their split labels.
    pub fn filtered<F: Fn(&TrajectoryRecord) -> bool>(&self, keep: F) -> Dataset {
        let (shots, splits) = self
            .shots
            .iter()
            .zip(&self.splits)
            .filter(|(r, _)| keep(r))
            .map(|(r, s)| (r.clone(), *s))
            .unzip();
        Dataset { meta: self.meta.clone(), shots, splits }
    }

    /// Every record summed over blocks of `k`; truth series subsampled.
    pub fn coarse_grained(&self, k: usize) -> Result<Dataset, SmeError> {
        let shots = self
            .shots
            .iter()
            .map(|s| super::record::coarse_grain_shot(s, k))
            .collect::<Result<Vec<_>, _>>()?;
        let mut meta = self.meta.clone();
        meta.dt *= k as f64;
        Ok(Dataset { meta, shots, splits: self.splits.clone() })
    }
}

fn quantize(v: f64) -> f64 {
    v as f32 as f64
}

/// Nearest `f32` not larger in magnitude, so a clipped Bloch vector stays
/// inside the ball after storage.
fn quantize_toward_zero(v: f64) -> f64 {
    let mut f = v as f32;
    if (f as f64).abs() > v.abs() {
        f = f32::from_bits(f.to_bits() - 1);
    }
    f as f64
}

fn quantize_bloch(b: &BlochVector) -> BlochVector {
    BlochVector { x: quantize_toward_zero(b.x), y: quantize_toward_zero(b.y), z: quantize_toward_zero(b.z) }
}

/// Shot plan in storage order: for each `T`, for each preparation, a cell
/// of `3·count` shots whose axes are dealt round-robin and then shuffled.
fn plan(meta: &DatasetMeta) -> Vec<(Prep, Axis, usize)> {
    let mut out = Vec::with_capacity(meta.n_shots());
    let mut cell = 0u64;
    for (ti, &t) in meta.t_grid.iter().enumerate() {
        let n = steps_in(t, meta.dt).expect("validated grid");
        for prep in Prep::ALL {
            let mut axes: Vec<Axis> = (0..meta.counts[ti] * 3).map(|j| Axis::ALL[j % 3]).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(meta.master_seed ^ AXIS_SALT, cell));
            axes.shuffle(&mut rng);
            out.extend(axes.into_iter().map(|a| (prep, a, n)));
            cell += 1;
        }
    }
    out
}

/// Simulates every shot of `meta` at `dt_fine`, coarse-grains to `dt` and
/// rounds records to `f32` precision (the on-disk precision).
///
/// Shot `i` draws its noise from `derive_seed(master_seed, i)`, so output is
/// independent of the worker count.
pub fn generate_dataset(meta: &DatasetMeta) -> Result<Dataset, SmeError> {
    meta.validate()?;
    let model = meta
        .generator
        .ok_or_else(|| SmeError::InvalidMeta("generation requires a generator model".into()))?;
    let k = meta.fine_factor()?;
    let plan = plan(meta);
    let shots = plan
        .par_iter()
        .enumerate()
        .map(|(i, &(prep, axis, n))| {
            let seed = derive_seed(meta.master_seed, i as u64);
            let (traj, outcome) = simulate_shot(prep, axis, &model, n * k, meta.dt_fine, seed)?;
            let mut rec = coarse_grain(&traj.record, k)?;
            rec.dm_i.iter_mut().for_each(|v| *v = quantize(*v));
            rec.dm_q.iter_mut().for_each(|v| *v = quantize(*v));
            rec.dt = meta.dt;
            let truth = meta
                .store_truth
                .then(|| traj.truth.iter().step_by(k).map(quantize_bloch).collect::<Vec<_>>());
            Ok(TrajectoryRecord { prep, record: rec, axis, outcome, truth })
        })
        .collect::<Result<Vec<_>, SmeError>>()?;
    Ok(Dataset::new(meta.clone(), shots))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sme::model::ConstrainedParams;

    fn small_meta(seed: u64) -> DatasetMeta {
        let m = PhysicalModel::constrained(ConstrainedParams::DEVICE).unwrap();
        DatasetMeta::new(m, 0.04, 0.001, vec![0.0, 0.08], vec![2, 1], seed)
    }

    #[test]
    fn counts_per_setup() {
        let d = generate_dataset(&small_meta(5)).unwrap();
        assert_eq!(d.len(), 18 * 3);
        for prep in Prep::ALL {
            for axis in Axis::ALL {
                let n0 = d.shots.iter().filter(|s| s.prep == prep && s.axis == axis && s.record.is_empty()).count();
                let n1 = d.shots.iter().filter(|s| s.prep == prep && s.axis == axis && s.record.len() == 2).count();
                assert_eq!((n0, n1), (2, 1));
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        assert_eq!(generate_dataset(&small_meta(5)).unwrap(), generate_dataset(&small_meta(5)).unwrap());
        assert_ne!(generate_dataset(&small_meta(5)).unwrap(), generate_dataset(&small_meta(6)).unwrap());
    }

    #[test]
    fn records_hold_f32_values() {
        let d = generate_dataset(&small_meta(1)).unwrap();
        for s in &d.shots {
            for v in s.record.dm_i.iter().chain(&s.record.dm_q) {
                assert_eq!(*v as f32 as f64, *v);
            }
            for b in s.truth.as_ref().unwrap() {
                assert!(b.norm() <= 1.0 + 2e-9);
            }
            assert_eq!(s.truth.as_ref().unwrap().len(), s.record.len() + 1);
        }
    }

    #[test]
    fn meta_validation() {
        let mut m = small_meta(0);
        m.split_fractions = [0.5, 0.2, 0.2];
        assert!(m.validate().is_err());
        let mut m = small_meta(0);
        m.t_grid = vec![0.05];
        m.counts = vec![1];
        assert!(m.validate().is_err());
        let mut m = small_meta(0);
        m.dt = 0.0015;
        assert!(m.validate().is_err());
    }

    #[test]
    fn split_fractions_are_respected() {
        let f = [0.75, 0.20, 0.05];
        let n = 100_000;
        let mut c = [0usize; 3];
        for i in 0..n {
            c[split_for_index(i, &f) as usize] += 1;
        }
        for j in 0..3 {
            let p = f[j];
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((c[j] as f64 / n as f64 - p).abs() < 4.0 * sd);
        }
    }

    #[test]
    fn toward_zero_rounding() {
        for v in [1.0 - 1e-12, -0.3, 0.7000000001, 1e-40] {
            let q = quantize_toward_zero(v);
            assert!(q.abs() <= v.abs());
            assert_eq!(q as f32 as f64, q);
        }
    }
}
