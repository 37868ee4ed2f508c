//! Softmax and focal loss, `FL(p_t) = -alpha_t (1 - p_t)^gamma ln(p_t)`.

use crate::scalar::Scalar;

use super::NUM_CLASSES;

/// Lower clamp applied to `p_t` before taking its logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

pub fn log_softmax<T: Scalar>(z: &[T]) -> Vec<T> {
    let m = z.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = m + z.iter().map(|&v| (v - m).exp()).sum::<T>().ln();
    z.iter().map(|&v| v - lse).collect()
}

pub fn softmax<T: Scalar>(z: &[T]) -> Vec<T> {
    let m = z.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = z.iter().map(|&v| (v - m).exp()).collect();
    let s: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Focal loss of a probability vector for the true class `label`.
pub fn focal_loss<T: Scalar>(probs: &[T], label: usize, gamma: T, alpha: &[T; NUM_CLASSES]) -> T {
    let p = probs[label].max(T::lit(PROB_FLOOR)).min(T::one());
    -alpha[label] * (T::one() - p).powf(gamma) * p.ln()
}

/// Focal loss and its gradient with respect to the logits.
///
/// `ln p_t` comes from a log-softmax and `1 - p_t` from the sum of the other
/// probabilities, which keeps both accurate near `p_t = 0` and `p_t = 1`. The
/// gradient is `g (onehot - p)` with
/// `g = alpha (gamma (1-p)^(gamma-1) p ln p - (1-p)^gamma)`; it is zero while the
/// probability clamp is active.
pub fn focal_loss_from_logits<T: Scalar>(z: &[T], label: usize, gamma: T, alpha: T) -> (T, Vec<T>) {
    let logp = log_softmax(z);
    let p: Vec<T> = logp.iter().map(|v| v.exp()).collect();
    let floor = T::lit(PROB_FLOOR);
    let clamped = logp[label] < floor.ln();
    let (lnp, pt, q) = if clamped {
        (floor.ln(), floor, T::one() - floor)
    } else {
        let q: T = p
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != label)
            .map(|(_, &v)| v)
            .sum();
        (logp[label], p[label], q)
    };
    let loss = -alpha * q.powf(gamma) * lnp;
    let g = if clamped || q == T::zero() {
        T::zero()
    } else if gamma == T::zero() {
        -alpha
    } else {
        alpha * (gamma * q.powf(gamma - T::one()) * pt * lnp - q.powf(gamma))
    };
    let grad = p
        .iter()
        .enumerate()
        .map(|(j, &pj)| if j == label { g * q } else { -g * pj })
        .collect();
    (loss, grad)
}
