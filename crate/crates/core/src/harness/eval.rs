//! Recall, false positive rate, confusion matrix and keypoint error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lifting::normalize_world;
use crate::nn::{NnClass, NUM_CLASSES};
use crate::scalar::Scalar;
use crate::skeleton::Keypoints3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: String,
    pub samples: usize,
    /// Truth count per class in [`NnClass::ALL`] order.
    pub class_counts: [u64; NUM_CLASSES],
    /// Recall per target gesture; `None` when the class has no samples.
    pub recall: [Option<f64>; 6],
    /// Unweighted mean of the defined per-gesture recalls.
    pub average_recall: Option<f64>,
    /// Fraction of Negative samples predicted as any gesture; `None` without negatives.
    pub false_positive_rate: Option<f64>,
    /// `confusion[truth][prediction]`.
    pub confusion: [[u64; NUM_CLASSES]; NUM_CLASSES],
    /// Mean 3D keypoint error in centimeters, when ground truth 3D was available.
    pub keypoint_error_cm: Option<f64>,
    /// Frames whose 3D fit failed and are left out of `keypoint_error_cm`.
    #[serde(default)]
    pub lift_failures: usize,
}

pub fn eval_classifier(predictions: &[NnClass], truths: &[NnClass]) -> Result<EvalReport> {
    if predictions.len() != truths.len() {
        return Err(Error::LengthMismatch(predictions.len(), truths.len()));
    }
    if truths.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut confusion = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    for (p, t) in predictions.iter().zip(truths) {
        confusion[t.index()][p.index()] += 1;
    }
    let class_counts = confusion.map(|row| row.iter().sum());
    let recall = NnClass::GESTURES.map(|c| {
        let n = class_counts[c.index()];
        (n > 0).then(|| confusion[c.index()][c.index()] as f64 / n as f64)
    });
    let defined: Vec<f64> = recall.iter().flatten().copied().collect();
    let average_recall =
        (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    let neg = NnClass::Negative.index();
    let false_positive_rate = (class_counts[neg] > 0).then(|| {
        let fp: u64 = NnClass::GESTURES
            .iter()
            .map(|c| confusion[neg][c.index()])
            .sum();
        fp as f64 / class_counts[neg] as f64
    });
    Ok(EvalReport {
        schema: "handgest.eval.v1".into(),
        samples: truths.len(),
        class_counts,
        recall,
        average_recall,
        false_positive_rate,
        confusion,
        keypoint_error_cm: None,
        lift_failures: 0,
    })
}

/// Mean per-keypoint Euclidean distance in centimeters after moving both
/// skeletons' middle knuckles to the origin. Inputs are in meters.
pub fn keypoint_error<T: Scalar>(pred: &Keypoints3<T>, gt: &Keypoints3<T>) -> T {
    let (a, b) = (normalize_world(pred), normalize_world(gt));
    let total: T = a.iter().zip(&b).map(|(p, q)| (*p - *q).norm()).sum();
    total / T::lit(a.len() as f64) * T::lit(100.0)
}
