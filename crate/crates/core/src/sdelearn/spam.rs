use serde::{Deserialize, Serialize};

use crate::qcore::BlochVector;
use crate::sme::{Axis, Prep, TrajectoryRecord};

use super::SdeError;

/// Preparation states and per-axis readout visibilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpamModel {
    pub r0: [BlochVector; 6],
    pub visibility: [f64; 3],
}

impl Default for SpamModel {
    fn default() -> Self {
        Self::ideal()
    }
}

impl SpamModel {
    pub fn ideal() -> Self {
        Self { r0: Prep::ALL.map(Prep::bloch), visibility: [1.0; 3] }
    }

    pub fn validate(&self) -> Result<(), SdeError> {
        for r in &self.r0 {
            if !(r.norm() <= 1.0 + crate::qcore::BLOCH_NORM_TOL) {
                return Err(SdeError::InvalidSpam(format!("preparation outside the ball: {r:?}")));
            }
        }
        if self.visibility.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(SdeError::InvalidSpam(format!("visibility outside [0, 1]: {:?}", self.visibility)));
        }
        Ok(())
    }
}

/// Tomography of the six preparations from shots read out right after
/// preparation (zero-length records).
///
/// Each `r0[p]·e_α` is the mean outcome of cell `(p, α)`. With `fit_readout`
/// the visibility `f_α` is set to the largest `|mean Y|` over preparations and
/// the states are rescaled by it; this is the likelihood maximizer that puts
/// the best-prepared state on the sphere. Vectors are finally clipped into
/// the unit ball.
pub fn fit_spam<'a, I>(shots: I, fit_readout: bool) -> Result<SpamModel, SdeError>
where
    I: IntoIterator<Item = &'a TrajectoryRecord>,
{
    let mut sum = [[0.0f64; 3]; 6];
    let mut count = [[0usize; 3]; 6];
    for s in shots.into_iter().filter(|s| s.record.is_empty()) {
        sum[s.prep.index()][s.axis.index()] += s.outcome as f64;
        count[s.prep.index()][s.axis.index()] += 1;
    }
    let mut mean = [[0.0f64; 3]; 6];
    for p in 0..6 {
        for a in 0..3 {
            if count[p][a] == 0 {
                return Err(SdeError::MissingCell { prep: Prep::ALL[p], axis: Axis::ALL[a] });
            }
            mean[p][a] = sum[p][a] / count[p][a] as f64;
        }
    }
    let mut visibility = [1.0; 3];
    if fit_readout {
        for a in 0..3 {
            let f = (0..6).map(|p| mean[p][a].abs()).fold(0.0, f64::max);
            if f > 0.0 {
                visibility[a] = f;
            }
        }
    }
    let r0 = std::array::from_fn(|p| {
        BlochVector::clipped(mean[p][0] / visibility[0], mean[p][1] / visibility[1], mean[p][2] / visibility[2])
    });
    Ok(SpamModel { r0, visibility })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sme::WeakRecord;

    fn shot(prep: Prep, axis: Axis, outcome: i8) -> TrajectoryRecord {
        TrajectoryRecord { prep, record: WeakRecord::empty(0.04), axis, outcome, truth: None }
    }

    fn ideal_shots() -> Vec<TrajectoryRecord> {
        let mut v = vec![];
        for p in Prep::ALL {
            for a in Axis::ALL {
                let c = p.bloch().component(a.index());
                if c != 0.0 {
                    v.push(shot(p, a, c as i8));
                } else {
                    v.push(shot(p, a, 1));
                    v.push(shot(p, a, -1));
                }
            }
        }
        v
    }

    #[test]
    fn ideal_tomography() {
        let s = fit_spam(&ideal_shots(), false).unwrap();
        assert_eq!(s, SpamModel::ideal());
    }

    #[test]
    fn cell_means_define_state() {
        let mut v = ideal_shots();
        v.retain(|s| s.prep != Prep::Plus);
        // x mean 0.9 (19 of +1 against 1 of −1 in 20), y mean 0.0, z mean −0.1
        for i in 0..20 {
            v.push(shot(Prep::Plus, Axis::X, if i < 19 { 1 } else { -1 }));
            v.push(shot(Prep::Plus, Axis::Y, if i < 10 { 1 } else { -1 }));
            v.push(shot(Prep::Plus, Axis::Z, if i < 9 { 1 } else { -1 }));
        }
        let s = fit_spam(&v, false).unwrap();
        let r = s.r0[Prep::Plus.index()];
        assert!((r.x - 0.9).abs() < 1e-15 && r.y.abs() < 1e-15 && (r.z + 0.1).abs() < 1e-15);
    }

    #[test]
    fn missing_cell() {
        let mut v = ideal_shots();
        v.retain(|s| !(s.prep == Prep::One && s.axis == Axis::Y));
        assert_eq!(
            fit_spam(&v, false).unwrap_err(),
            SdeError::MissingCell { prep: Prep::One, axis: Axis::Y }
        );
    }

    #[test]
    fn readout_fit_scales_states() {
        let mut v = vec![];
        for p in Prep::ALL {
            for a in Axis::ALL {
                let c = p.bloch().component(a.index());
                // visibility 0.8: 9 of 10 outcomes follow the state
                for i in 0..10 {
                    let y = if c == 0.0 { if i < 5 { 1 } else { -1 } } else if i < 9 { c as i8 } else { -(c as i8) };
                    v.push(shot(p, a, y));
                }
            }
        }
        let s = fit_spam(&v, true).unwrap();
        assert!((s.visibility[2] - 0.8).abs() < 1e-12);
        assert!((s.r0[0].z - 1.0).abs() < 1e-12);
        s.validate().unwrap();
    }
}
