//! Backpropagation, Adam training and finite-difference gradient checking.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_DIM};
use crate::scalar::Scalar;

use super::loss::focal_loss_from_logits;
use super::{Dense, MlpModel, NnClass, HIDDEN_WIDTHS, NUM_CLASSES};

/// Central-difference step used by [`gradient_check`].
pub const FD_STEP: f64 = 1e-5;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
const STD_FLOOR: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabeledExample<T> {
    pub features: FeatureVector<T>,
    pub label: NnClass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    default,
    bound(
        serialize = "T: Clone + Serialize",
        deserialize = "T: Scalar + Deserialize<'de>"
    )
)]
pub struct TrainConfig<T> {
    /// Focal-loss focusing parameter, >= 0.
    pub gamma: T,
    /// Per-class weights in [`NnClass::ALL`] order.
    pub alpha: [T; NUM_CLASSES],
    pub learning_rate: T,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Fraction of the dataset held out for the validation loss curve.
    pub validation_fraction: T,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            gamma: T::lit(2.0),
            alpha: [T::one(); NUM_CLASSES],
            learning_rate: T::lit(1e-3),
            batch_size: 64,
            epochs: 60,
            seed: 0,
            validation_fraction: T::lit(0.1),
        }
    }
}

impl<T: Scalar> TrainConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.gamma >= T::zero() && self.gamma.is_finite()) {
            return bad("gamma must be >= 0");
        }
        if !self.alpha.iter().all(|&a| a > T::zero() && a.is_finite()) {
            return bad("alpha entries must be > 0");
        }
        if !(self.learning_rate > T::zero() && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(self.validation_fraction >= T::zero() && self.validation_fraction < T::one()) {
            return bad("validation_fraction must be in [0, 1)");
        }
        Ok(())
    }
}

/// Gradient of the loss with respect to every layer parameter, laid out like the model.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Dense<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(model: &MlpModel<T>) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    fn clear(&mut self) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|v| *v = T::zero());
            l.bias.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    /// Flattened in model order: per layer, weights then biases.
    pub fn flat(&self) -> Vec<T> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory<T> {
    /// Mean training loss per epoch, accumulated while the epoch ran.
    pub train_loss: Vec<T>,
    /// Mean validation loss after each epoch; empty without a validation split.
    pub val_loss: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    pub model: MlpModel<T>,
    pub history: TrainHistory<T>,
}

/// Forward and backward pass for one standardized input; gradients are added into `grads`.
fn backprop<T: Scalar>(
    model: &MlpModel<T>,
    x: &[T],
    label: usize,
    gamma: T,
    alpha: T,
    grads: &mut Gradients<T>,
) -> T {
    let last = model.layers.len() - 1;
    let mut acts: Vec<Vec<T>> = Vec::with_capacity(model.layers.len() + 1);
    acts.push(x.to_vec());
    for (i, layer) in model.layers.iter().enumerate() {
        let mut out = Vec::new();
        layer.apply(&acts[i], &mut out);
        if i < last {
            out.iter_mut().for_each(|v| *v = v.max(T::zero()));
        }
        acts.push(out);
    }
    let (loss, mut delta) = focal_loss_from_logits(&acts[last + 1], label, gamma, alpha);
    for l in (0..=last).rev() {
        let layer = &model.layers[l];
        let input = &acts[l];
        let g = &mut grads.layers[l];
        for (o, &d) in delta.iter().enumerate() {
            if d == T::zero() {
                continue;
            }
            g.bias[o] += d;
            let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
            for (gw, &a) in row.iter_mut().zip(input) {
                *gw += d * a;
            }
        }
        if l > 0 {
            let mut prev = vec![T::zero(); layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == T::zero() {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (p, &w) in prev.iter_mut().zip(row) {
                    *p += w * d;
                }
            }
            for (p, &a) in prev.iter_mut().zip(input) {
                if a <= T::zero() {
                    *p = T::zero();
                }
            }
            delta = prev;
        }
    }
    loss
}

fn example_loss<T: Scalar>(model: &MlpModel<T>, x: &[T], label: usize, gamma: T, alpha: T) -> T {
    focal_loss_from_logits(&model.logits(x), label, gamma, alpha).0
}

/// Focal loss of one example and its analytic gradient.
pub fn loss_gradient<T: Scalar>(
    model: &MlpModel<T>,
    example: &LabeledExample<T>,
    gamma: T,
    alpha: &[T; NUM_CLASSES],
) -> (T, Gradients<T>) {
    let mut grads = Gradients::zeros_like(model);
    let y = example.label.index();
    let loss = backprop(
        model,
        &model.standardize(&example.features),
        y,
        gamma,
        alpha[y],
        &mut grads,
    );
    (loss, grads)
}

/// Maximum relative error between [`loss_gradient`] and central finite
/// differences over every weight and bias. Relative error is
/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn gradient_check<T: Scalar>(
    model: &MlpModel<T>,
    example: &LabeledExample<T>,
    gamma: T,
    alpha: &[T; NUM_CLASSES],
) -> T {
    gradient_check_with(model, example, gamma, alpha, |m, e, g, a| {
        loss_gradient(m, e, g, a).1
    })
}

/// [`gradient_check`] against an arbitrary gradient implementation.
pub fn gradient_check_with<T, F>(
    model: &MlpModel<T>,
    example: &LabeledExample<T>,
    gamma: T,
    alpha: &[T; NUM_CLASSES],
    grad_fn: F,
) -> T
where
    T: Scalar,
    F: Fn(&MlpModel<T>, &LabeledExample<T>, T, &[T; NUM_CLASSES]) -> Gradients<T>,
{
    let analytic = grad_fn(model, example, gamma, alpha).flat();
    let x = model.standardize(&example.features);
    let y = example.label.index();
    let h = T::lit(FD_STEP);
    let floor = T::lit(1e-6);
    let mut probe = model.clone();
    let mut worst = T::zero();
    let mut k = 0;
    for l in 0..probe.layers.len() {
        for idx in 0..probe.layers[l].num_params() {
            let orig = *param_mut(&mut probe, l, idx);
            *param_mut(&mut probe, l, idx) = orig + h;
            let up = example_loss(&probe, &x, y, gamma, alpha[y]);
            *param_mut(&mut probe, l, idx) = orig - h;
            let down = example_loss(&probe, &x, y, gamma, alpha[y]);
            *param_mut(&mut probe, l, idx) = orig;
            let numeric = (up - down) / (h + h);
            let a = analytic.get(k).copied().unwrap_or_else(T::nan);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            if !(rel <= worst) {
                worst = rel;
            }
            k += 1;
        }
    }
    worst
}

/// Weight `idx` of layer `l`, counting the biases after the weights.
fn param_mut<T>(m: &mut MlpModel<T>, l: usize, idx: usize) -> &mut T {
    let layer = &mut m.layers[l];
    let n_w = layer.weights.len();
    if idx < n_w {
        &mut layer.weights[idx]
    } else {
        &mut layer.bias[idx - n_w]
    }
}

fn feature_stats<T: Scalar>(
    data: &[LabeledExample<T>],
    idx: &[usize],
) -> ([T; FEATURE_DIM], [T; FEATURE_DIM]) {
    let n = T::lit(idx.len() as f64);
    let mut mean = [T::zero(); FEATURE_DIM];
    for &i in idx {
        for (m, v) in mean.iter_mut().zip(data[i].features.to_array()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = [T::zero(); FEATURE_DIM];
    for &i in idx {
        for ((s, v), m) in var.iter_mut().zip(data[i].features.to_array()).zip(mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.map(|s| {
        let sd = (s / n).sqrt();
        if sd < T::lit(STD_FLOOR) {
            T::one()
        } else {
            sd
        }
    });
    (mean, std)
}

fn adam_step<T: Scalar>(
    model: &mut MlpModel<T>,
    grads: &Gradients<T>,
    m: &mut Gradients<T>,
    v: &mut Gradients<T>,
    t: i32,
    lr: T,
    batch: T,
) {
    let (b1, b2, eps) = (T::lit(ADAM_BETA1), T::lit(ADAM_BETA2), T::lit(ADAM_EPS));
    let c1 = T::one() - b1.powi(t);
    let c2 = T::one() - b2.powi(t);
    for l in 0..model.layers.len() {
        let layer = &mut model.layers[l];
        let g = &grads.layers[l];
        let (ml, vl) = (&mut m.layers[l], &mut v.layers[l]);
        let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
        let gs = g.weights.iter().chain(&g.bias);
        let ms = ml.weights.iter_mut().chain(ml.bias.iter_mut());
        let vs = vl.weights.iter_mut().chain(vl.bias.iter_mut());
        for (((p, &gi), mi), vi) in params.zip(gs).zip(ms).zip(vs) {
            let gi = gi / batch;
            *mi = b1 * *mi + (T::one() - b1) * gi;
            *vi = b2 * *vi + (T::one() - b2) * gi * gi;
            *p -= lr * (*mi / c1) / ((*vi / c2).sqrt() + eps);
        }
    }
}

/// Train a standard-architecture model with mini-batch Adam on the mean focal loss.
///
/// Runs single-threaded; the result is bitwise reproducible for a fixed
/// `config.seed`. The returned model has `tau = 0` (plain argmax) until
/// calibrated.
pub fn train<T: Scalar>(
    data: &[LabeledExample<T>],
    config: &TrainConfig<T>,
) -> Result<TrainOutcome<T>> {
    train_with_hidden(data, config, &HIDDEN_WIDTHS)
}

pub(crate) fn train_with_hidden<T: Scalar>(
    data: &[LabeledExample<T>],
    config: &TrainConfig<T>,
    hidden: &[usize],
) -> Result<TrainOutcome<T>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.iter().all(|e| e.label == data[0].label) {
        return Err(Error::SingleClassDataset);
    }
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((data.len() as f64) * config.validation_fraction.as_f64()).floor() as usize;
    let n_val = n_val.min(data.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();

    let mut model = MlpModel::he_uniform(hidden, &mut rng);
    let (mean, std) = feature_stats(data, &train_idx);
    model.feat_mean = mean;
    model.feat_std = std;
    let inputs: Vec<[T; FEATURE_DIM]> = data
        .iter()
        .map(|e| model.standardize(&e.features))
        .collect();

    let mut grads = Gradients::zeros_like(&model);
    let mut m = Gradients::zeros_like(&model);
    let mut v = Gradients::zeros_like(&model);
    let mut history = TrainHistory::default();
    let mut t = 0;
    for _ in 0..config.epochs {
        train_idx.shuffle(&mut rng);
        let mut epoch_loss = T::zero();
        for batch in train_idx.chunks(config.batch_size) {
            grads.clear();
            for &i in batch {
                let y = data[i].label.index();
                epoch_loss += backprop(
                    &model,
                    &inputs[i],
                    y,
                    config.gamma,
                    config.alpha[y],
                    &mut grads,
                );
            }
            t += 1;
            adam_step(
                &mut model,
                &grads,
                &mut m,
                &mut v,
                t,
                config.learning_rate,
                T::lit(batch.len() as f64),
            );
        }
        history
            .train_loss
            .push(epoch_loss / T::lit(train_idx.len() as f64));
        if !val_idx.is_empty() {
            let total: T = val_idx
                .iter()
                .map(|&i| {
                    let y = data[i].label.index();
                    example_loss(&model, &inputs[i], y, config.gamma, config.alpha[y])
                })
                .sum();
            history.val_loss.push(total / T::lit(val_idx.len() as f64));
        }
    }
    Ok(TrainOutcome { model, history })
}
