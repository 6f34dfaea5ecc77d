use crate::qcore::Scalar;

/// Predicted probabilities are clipped to `[PROB_CLIP, 1 − PROB_CLIP]`.
pub const PROB_CLIP: f64 = 1e-6;

/// Clips a probability, dropping its tangent when the clip is active.
#[inline]
pub fn clip_prob<T: Scalar>(p: T) -> T {
    let v = p.value();
    if v < PROB_CLIP {
        T::cst(PROB_CLIP)
    } else if v > 1.0 - PROB_CLIP {
        T::cst(1.0 - PROB_CLIP)
    } else {
        p
    }
}

/// `(1 + f·r)/2`, clipped.
#[inline]
pub fn outcome_prob<T: Scalar>(r_alpha: T, visibility: f64) -> T {
    clip_prob((r_alpha * visibility + 1.0) * 0.5)
}

/// Negative log-likelihood of outcome `y ∈ {+1, −1}` under `P(+1) = pi`.
#[inline]
pub fn ce_term<T: Scalar>(pi: T, y: i8) -> T {
    if y > 0 {
        -pi.ln()
    } else {
        -(T::one() - pi).ln()
    }
}

/// Binary cross entropy averaged over the batch.
pub fn ce_loss(pi: &[f64], y: &[i8]) -> f64 {
    assert_eq!(pi.len(), y.len(), "probability and outcome counts differ");
    if pi.is_empty() {
        return 0.0;
    }
    let mut s = 0.0;
    for (p, o) in pi.iter().zip(y) {
        s += ce_term(*p, *o);
    }
    s / pi.len() as f64
}

/// Cross entropy used as an evaluation metric. Shares [`ce_loss`].
pub fn ce_metric(pi: &[f64], y: &[i8]) -> f64 {
    ce_loss(pi, y)
}
