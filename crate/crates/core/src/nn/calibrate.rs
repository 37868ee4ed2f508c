//! Acceptance-threshold calibration against a set of background samples.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{forward, LabeledExample, MlpModel, NnClass};

/// Smallest candidate threshold `tau` among the scores such that at most
/// `target_fpr * n` scores are strictly greater than `tau`.
///
/// With scores sorted descending, `tau` is the `(k+1)`-th largest where `k` is
/// the largest count with `k / n <= target_fpr`.
pub fn threshold_from_scores<T: Scalar>(scores: &[T], target_fpr: T) -> Result<T> {
    if scores.is_empty() {
        return Err(Error::EmptyNegatives);
    }
    if !(target_fpr > T::zero() && target_fpr < T::one()) {
        return Err(Error::InvalidInput(format!(
            "target false positive rate {target_fpr} outside (0, 1)"
        )));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.as_f64().total_cmp(&a.as_f64()));
    let n = sorted.len();
    let target = target_fpr.as_f64();
    let mut k = ((target * n as f64).floor() as usize).min(n - 1);
    while k > 0 && k as f64 / n as f64 > target {
        k -= 1;
    }
    while k + 1 < n && (k + 1) as f64 / n as f64 <= target {
        k += 1;
    }
    Ok(sorted[k])
}

/// Highest gesture (non-Negative) probability.
fn gesture_score<T: Scalar>(model: &MlpModel<T>, ex: &LabeledExample<T>) -> Result<T> {
    let p = forward(model, &ex.features)?;
    Ok(NnClass::GESTURES
        .iter()
        .map(|c| p[c.index()])
        .fold(T::zero(), T::max))
}

/// Threshold such that the fraction of `negatives` whose best gesture
/// probability exceeds it is at most `target_fpr`.
pub fn calibrate_threshold<T: Scalar>(
    model: &MlpModel<T>,
    negatives: &[LabeledExample<T>],
    target_fpr: T,
) -> Result<T> {
    if negatives.is_empty() {
        return Err(Error::EmptyNegatives);
    }
    if let Some(e) = negatives.iter().find(|e| e.label != NnClass::Negative) {
        return Err(Error::InvalidInput(format!(
            "calibration set contains a {} example",
            e.label
        )));
    }
    let scores = negatives
        .iter()
        .map(|e| gesture_score(model, e))
        .collect::<Result<Vec<_>>>()?;
    threshold_from_scores(&scores, target_fpr)
}
