use serde::{Deserialize, Serialize};

use crate::qcore::BlochVector;

use super::SmeError;

/// The six cardinal preparations, indexed 0–5 in the order
/// `|0⟩, |1⟩, |+⟩, |−⟩, |+i⟩, |−i⟩` (with `σz|0⟩ = +|0⟩`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
#[repr(u8)]
pub enum Prep {
    Zero = 0,
    One = 1,
    Plus = 2,
    Minus = 3,
    PlusI = 4,
    MinusI = 5,
}

impl Prep {
    pub const ALL: [Prep; 6] = [Prep::Zero, Prep::One, Prep::Plus, Prep::Minus, Prep::PlusI, Prep::MinusI];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Prep> {
        Self::ALL.get(i).copied()
    }

    pub fn bloch(self) -> BlochVector {
        let (x, y, z) = match self {
            Prep::Zero => (0.0, 0.0, 1.0),
            Prep::One => (0.0, 0.0, -1.0),
            Prep::Plus => (1.0, 0.0, 0.0),
            Prep::Minus => (-1.0, 0.0, 0.0),
            Prep::PlusI => (0.0, 1.0, 0.0),
            Prep::MinusI => (0.0, -1.0, 0.0),
        };
        BlochVector { x, y, z }
    }
}

impl From<Prep> for u8 {
    fn from(p: Prep) -> u8 {
        p as u8
    }
}

impl TryFrom<u8> for Prep {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, String> {
        Prep::from_index(v as usize).ok_or_else(|| format!("invalid preparation index {v}"))
    }
}

/// Projective readout axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
#[repr(u8)]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Axis> {
        Self::ALL.get(i).copied()
    }
}

impl From<Axis> for u8 {
    fn from(a: Axis) -> u8 {
        a as u8
    }
}

impl TryFrom<u8> for Axis {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, String> {
        Axis::from_index(v as usize).ok_or_else(|| format!("invalid axis index {v}"))
    }
}

/// Heterodyne record increments (units √µs) on a uniform grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakRecord {
    pub dm_i: Vec<f64>,
    pub dm_q: Vec<f64>,
    pub dt: f64,
}

impl WeakRecord {
    pub fn new(dm_i: Vec<f64>, dm_q: Vec<f64>, dt: f64) -> Result<Self, SmeError> {
        if dm_i.len() != dm_q.len() {
            return Err(SmeError::InvalidRecord("quadrature lengths differ".into()));
        }
        if !(dt > 0.0) {
            return Err(SmeError::InvalidRecord(format!("non-positive dt {dt}")));
        }
        if dm_i.iter().chain(&dm_q).any(|v| !v.is_finite()) {
            return Err(SmeError::InvalidRecord("non-finite increment".into()));
        }
        Ok(Self { dm_i, dm_q, dt })
    }

    pub fn empty(dt: f64) -> Self {
        Self { dm_i: Vec::new(), dm_q: Vec::new(), dt }
    }

    pub fn len(&self) -> usize {
        self.dm_i.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dm_i.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 * self.dt
    }
}

/// One shot: preparation, weak record, readout axis and outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub prep: Prep,
    pub record: WeakRecord,
    pub axis: Axis,
    /// Projective outcome, `+1` or `−1`.
    pub outcome: i8,
    /// Generating Bloch series, length `record.len() + 1` (synthetic data only).
    pub truth: Option<Vec<BlochVector>>,
}

impl TrajectoryRecord {
    pub fn n_steps(&self) -> usize {
        self.record.len()
    }
}

/// Sums consecutive blocks of `k` increments, giving a record at step `k·dt`.
pub fn coarse_grain(rec: &WeakRecord, k: usize) -> Result<WeakRecord, SmeError> {
    if k == 0 || rec.len() % k != 0 {
        return Err(SmeError::NonDivisible { k, n: rec.len() });
    }
    let sum = |v: &[f64]| v.chunks_exact(k).map(|c| c.iter().sum()).collect::<Vec<f64>>();
    Ok(WeakRecord { dm_i: sum(&rec.dm_i), dm_q: sum(&rec.dm_q), dt: rec.dt * k as f64 })
}

/// Applies [`coarse_grain`] to a whole shot, subsampling its truth series.
pub fn coarse_grain_shot(shot: &TrajectoryRecord, k: usize) -> Result<TrajectoryRecord, SmeError> {
    let record = coarse_grain(&shot.record, k)?;
    let truth = shot
        .truth
        .as_ref()
        .map(|t| t.iter().step_by(k).copied().collect::<Vec<_>>());
    Ok(TrajectoryRecord { prep: shot.prep, record, axis: shot.axis, outcome: shot.outcome, truth })
}
