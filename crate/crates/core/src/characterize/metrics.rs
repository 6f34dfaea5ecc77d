use serde::{Deserialize, Serialize};

use crate::qcore::BlochVector;
use crate::sdelearn::{predict_probabilities, SpamModel};
use crate::sme::{PhysicalModel, TrajectoryRecord};

use super::CharError;

/// Squared trajectory error against ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MseReport {
    /// Mean over shots reaching step `t` and over components.
    pub per_time: Vec<f64>,
    /// Shots contributing at each step.
    pub counts: Vec<usize>,
    /// Mean over shots, steps and components.
    pub total: f64,
}

/// Compares predicted series with truth series shot by shot. With
/// `max_step`, only steps `0..=max_step` enter.
pub fn mse_vs_truth(pred: &[Vec<[f64; 3]>], truth: &[&[BlochVector]], max_step: Option<usize>) -> Result<MseReport, CharError> {
    if pred.len() != truth.len() {
        return Err(CharError::InvalidInput(format!("{} predictions for {} truths", pred.len(), truth.len())));
    }
    let mut sum = Vec::<f64>::new();
    let mut counts = Vec::<usize>::new();
    let (mut total, mut n) = (0.0, 0usize);
    for (p, t) in pred.iter().zip(truth) {
        if p.len() != t.len() {
            return Err(CharError::InvalidInput(format!("series lengths {} and {}", p.len(), t.len())));
        }
        let len = max_step.map_or(p.len(), |m| p.len().min(m + 1));
        if sum.len() < len {
            sum.resize(len, 0.0);
            counts.resize(len, 0);
        }
        for i in 0..len {
            let a = t[i].as_array();
            let e: f64 = (0..3).map(|k| (p[i][k] - a[k]).powi(2)).sum();
            sum[i] += e;
            counts[i] += 1;
            total += e;
            n += 1;
        }
    }
    let per_time = sum.iter().zip(&counts).map(|(s, c)| s / (3.0 * *c as f64)).collect();
    let total = if n > 0 { total / (3.0 * n as f64) } else { 0.0 };
    Ok(MseReport { per_time, counts, total })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyBin {
    pub center: f64,
    pub predicted_mean: f64,
    /// Fraction of `+1` outcomes.
    pub empirical_mean: f64,
    pub count: usize,
}

/// Calibration of outcome probabilities against observed outcomes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfConsistencyReport {
    pub delta: f64,
    pub bins: Vec<ConsistencyBin>,
    /// Count-weighted RMS gap between predicted and empirical bin means.
    pub epsilon: f64,
    /// Count-weighted least-squares line of empirical against predicted.
    pub slope: f64,
    pub intercept: f64,
}

impl SelfConsistencyReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_center,predicted_mean,empirical_mean,count\n");
        for b in &self.bins {
            s.push_str(&format!("{},{},{},{}\n", b.center, b.predicted_mean, b.empirical_mean, b.count));
        }
        s
    }
}

/// Bins predictions into intervals of width `delta` on `[0, 1]` and
/// compares each bin's mean prediction with its frequency of `+1`.
pub fn self_consistency(pi: &[f64], y: &[i8], delta: f64) -> Result<SelfConsistencyReport, CharError> {
    if pi.len() != y.len() {
        return Err(CharError::InvalidInput("probability and outcome counts differ".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(CharError::InvalidInput(format!("bin width {delta} outside (0, 1)")));
    }
    if pi.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(CharError::InvalidInput("probability outside [0, 1]".into()));
    }
    let nb = (1.0 / delta).ceil() as usize;
    let mut acc = vec![(0.0f64, 0usize, 0usize); nb];
    for (p, o) in pi.iter().zip(y) {
        let k = ((p / delta) as usize).min(nb - 1);
        acc[k].0 += p;
        acc[k].1 += (*o > 0) as usize;
        acc[k].2 += 1;
    }
    let bins: Vec<ConsistencyBin> = acc
        .iter()
        .enumerate()
        .filter(|(_, a)| a.2 > 0)
        .map(|(k, a)| ConsistencyBin {
            center: (k as f64 + 0.5) * delta,
            predicted_mean: a.0 / a.2 as f64,
            empirical_mean: a.1 as f64 / a.2 as f64,
            count: a.2,
        })
        .collect();
    let w: f64 = bins.iter().map(|b| b.count as f64).sum();
    if w == 0.0 {
        return Ok(SelfConsistencyReport { delta, bins, epsilon: 0.0, slope: f64::NAN, intercept: f64::NAN });
    }
    let eps2: f64 = bins.iter().map(|b| b.count as f64 * (b.predicted_mean - b.empirical_mean).powi(2)).sum::<f64>() / w;
    let mx: f64 = bins.iter().map(|b| b.count as f64 * b.predicted_mean).sum::<f64>() / w;
    let my: f64 = bins.iter().map(|b| b.count as f64 * b.empirical_mean).sum::<f64>() / w;
    let sxx: f64 = bins.iter().map(|b| b.count as f64 * (b.predicted_mean - mx).powi(2)).sum();
    let sxy: f64 = bins.iter().map(|b| b.count as f64 * (b.predicted_mean - mx) * (b.empirical_mean - my)).sum();
    let (slope, intercept) = if sxx > 0.0 { (sxy / sxx, my - sxy / sxx * mx) } else { (f64::NAN, f64::NAN) };
    Ok(SelfConsistencyReport { delta, bins, epsilon: eps2.sqrt(), slope, intercept })
}

/// Master-equation prediction that ignores the record: the filter with the
/// efficiency set to zero.
pub fn me_baseline_probabilities(m: &PhysicalModel, spam: &SpamModel, shots: &[&TrajectoryRecord]) -> Vec<f64> {
    let me = PhysicalModel { eta: 0.0, ..*m };
    predict_probabilities(&me, spam, shots)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_examples() {
        let t = vec![BlochVector { x: 0.1, y: 0.2, z: 0.3 }; 4];
        let p: Vec<[f64; 3]> = t.iter().map(|b| b.as_array()).collect();
        let r = mse_vs_truth(&[p.clone()], &[&t], None).unwrap();
        assert_eq!(r.total, 0.0);
        let q: Vec<[f64; 3]> = p.iter().map(|a| [a[0] + 0.1, a[1], a[2]]).collect();
        let r = mse_vs_truth(&[q], &[&t], Some(1)).unwrap();
        assert!((r.total - 0.01 / 3.0).abs() < 1e-15);
        assert_eq!(r.per_time.len(), 2);
    }

    #[test]
    fn consistency_examples() {
        let r = self_consistency(&[0.9; 10], &[-1; 10], 0.04).unwrap();
        assert_eq!(r.bins.len(), 1);
        assert!((r.epsilon - 0.9).abs() < 1e-12);
        let y: Vec<i8> = (0..1000).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        let r = self_consistency(&vec![0.5; 1000], &y, 0.04).unwrap();
        assert_eq!(r.bins.len(), 1);
        assert!(r.epsilon < 1e-12);
    }

    #[test]
    fn permutation_invariance() {
        let pi = [0.1, 0.35, 0.8, 0.81, 0.5, 0.99];
        let y = [1, -1, 1, 1, -1, 1];
        let a = self_consistency(&pi, &y, 0.04).unwrap();
        let pi2 = [0.99, 0.5, 0.81, 0.8, 0.35, 0.1];
        let y2 = [1, -1, 1, 1, -1, 1];
        let b = self_consistency(&pi2, &y2, 0.04).unwrap();
        assert!((a.epsilon - b.epsilon).abs() < 1e-15);
    }
}
