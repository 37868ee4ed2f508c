//! Small fully connected classifier over the 12-value feature vector.
//!
//! Architecture: 12 -> 50 -> 50 -> 50 -> 7, ReLU hidden units, softmax output.
//! Inputs are standardized with the training-set mean and standard deviation
//! stored in the model. A gesture is only reported when its probability
//! exceeds the calibrated acceptance threshold `tau`.

mod calibrate;
mod loss;
mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_DIM};
use crate::scalar::Scalar;

pub use calibrate::{calibrate_threshold, threshold_from_scores};
pub use loss::{focal_loss, focal_loss_from_logits, log_softmax, softmax, PROB_FLOOR};
pub use train::{
    gradient_check, gradient_check_with, loss_gradient, train, Gradients, LabeledExample,
    TrainConfig, TrainHistory, TrainOutcome, FD_STEP,
};

pub const NUM_CLASSES: usize = 7;
pub const HIDDEN_WIDTHS: [usize; 3] = [50, 50, 50];
pub const MODEL_FORMAT_VERSION: u32 = 1;
const MODEL_SCHEMA: &str = "handgest.mlp.v1";

/// The six target gestures plus the background class, in output order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NnClass {
    OpenPalm,
    ClosedFist,
    PointingUp,
    Victory,
    ThumbUp,
    ThumbDown,
    Negative,
}

impl NnClass {
    pub const ALL: [NnClass; NUM_CLASSES] = [
        NnClass::OpenPalm,
        NnClass::ClosedFist,
        NnClass::PointingUp,
        NnClass::Victory,
        NnClass::ThumbUp,
        NnClass::ThumbDown,
        NnClass::Negative,
    ];
    pub const GESTURES: [NnClass; 6] = [
        NnClass::OpenPalm,
        NnClass::ClosedFist,
        NnClass::PointingUp,
        NnClass::Victory,
        NnClass::ThumbUp,
        NnClass::ThumbDown,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            NnClass::OpenPalm => "OpenPalm",
            NnClass::ClosedFist => "ClosedFist",
            NnClass::PointingUp => "PointingUp",
            NnClass::Victory => "Victory",
            NnClass::ThumbUp => "ThumbUp",
            NnClass::ThumbDown => "ThumbDown",
            NnClass::Negative => "Negative",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    pub fn is_gesture(self) -> bool {
        self != NnClass::Negative
    }
}

impl std::fmt::Display for NnClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Dense layer `y = W x + b`, `W` stored row-major as `outputs x inputs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![T::zero(); inputs * outputs],
            bias: vec![T::zero(); outputs],
        }
    }

    /// He-uniform: weights drawn from U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases.
    pub fn he_uniform<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / inputs as f64).sqrt();
        let weights = (0..inputs * outputs)
            .map(|_| T::lit(rng.random_range(-limit..limit)))
            .collect();
        Self {
            inputs,
            outputs,
            weights,
            bias: vec![T::zero(); outputs],
        }
    }

    pub fn apply(&self, x: &[T], out: &mut Vec<T>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.inputs)
                .zip(&self.bias)
                .map(|(row, &b)| row.iter().zip(x).fold(b, |acc, (&w, &v)| acc + w * v)),
        );
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn shape_ok(&self) -> bool {
        self.weights.len() == self.inputs * self.outputs && self.bias.len() == self.outputs
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel<T> {
    pub layers: Vec<Dense<T>>,
    pub feat_mean: [T; FEATURE_DIM],
    pub feat_std: [T; FEATURE_DIM],
    /// Minimum probability for a gesture to be accepted, in [0, 1].
    pub tau: T,
}

impl<T: Scalar> MlpModel<T> {
    /// All-zero weights with the standard architecture; outputs the uniform distribution.
    pub fn zeros() -> Self {
        Self::zeros_with_hidden(&HIDDEN_WIDTHS)
    }

    pub fn zeros_with_hidden(hidden: &[usize]) -> Self {
        let widths = layer_widths(hidden);
        Self::from_layers(
            widths
                .windows(2)
                .map(|w| Dense::zeros(w[0], w[1]))
                .collect(),
        )
    }

    pub fn he_uniform<R: Rng + ?Sized>(hidden: &[usize], rng: &mut R) -> Self {
        let widths = layer_widths(hidden);
        Self::from_layers(
            widths
                .windows(2)
                .map(|w| Dense::he_uniform(w[0], w[1], rng))
                .collect(),
        )
    }

    fn from_layers(layers: Vec<Dense<T>>) -> Self {
        Self {
            layers,
            feat_mean: [T::zero(); FEATURE_DIM],
            feat_std: [T::one(); FEATURE_DIM],
            tau: T::zero(),
        }
    }

    /// Layer chain 12 -> ... -> 7 with consistent buffers, positive std, tau in [0, 1].
    pub fn check(&self) -> Result<()> {
        let (Some(first), Some(last)) = (self.layers.first(), self.layers.last()) else {
            return Err(Error::ShapeMismatch("model has no layers".into()));
        };
        if first.inputs != FEATURE_DIM || last.outputs != NUM_CLASSES {
            return Err(Error::ShapeMismatch(format!(
                "model maps {} -> {}, expected {FEATURE_DIM} -> {NUM_CLASSES}",
                first.inputs, last.outputs
            )));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if !l.shape_ok() {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i} buffers do not match {}x{}",
                    l.outputs, l.inputs
                )));
            }
        }
        for (i, w) in self.layers.windows(2).enumerate() {
            if w[0].outputs != w[1].inputs {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i} outputs {} but layer {} takes {}",
                    w[0].outputs,
                    i + 1,
                    w[1].inputs
                )));
            }
        }
        if !self
            .feat_std
            .iter()
            .all(|&s| s > T::zero() && s.is_finite())
        {
            return Err(Error::ShapeMismatch("feature std must be positive".into()));
        }
        if !(self.tau >= T::zero() && self.tau <= T::one()) {
            return Err(Error::ShapeMismatch(format!(
                "tau {} outside [0, 1]",
                self.tau
            )));
        }
        Ok(())
    }

    /// True when the hidden widths are exactly 50, 50, 50.
    pub fn is_standard(&self) -> bool {
        self.layers.len() == HIDDEN_WIDTHS.len() + 1
            && self
                .layers
                .iter()
                .zip(&HIDDEN_WIDTHS)
                .all(|(l, &w)| l.outputs == w)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Dense::num_params).sum()
    }

    pub fn standardize(&self, fv: &FeatureVector<T>) -> [T; FEATURE_DIM] {
        let x = fv.to_array();
        std::array::from_fn(|i| (x[i] - self.feat_mean[i]) / self.feat_std[i])
    }

    /// Logits for an already standardized input.
    pub fn logits(&self, x: &[T]) -> Vec<T> {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.apply(&cur, &mut next);
            if i < last {
                next.iter_mut().for_each(|v| *v = v.max(T::zero()));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    pub fn to_json(&self) -> String {
        let f = |v: &[T]| v.iter().map(|x| x.as_f64()).collect::<Vec<_>>();
        let file = ModelFile {
            schema: MODEL_SCHEMA.into(),
            format_version: MODEL_FORMAT_VERSION,
            classes: NnClass::ALL.iter().map(|c| c.name().to_string()).collect(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    inputs: l.inputs,
                    outputs: l.outputs,
                    weights: f(&l.weights),
                    bias: f(&l.bias),
                })
                .collect(),
            feat_mean: f(&self.feat_mean),
            feat_std: f(&self.feat_std),
            tau: self.tau.as_f64(),
        };
        serde_json::to_string(&file).expect("model serializes")
    }

    /// Load a model file. Only the standard architecture is accepted.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ShapeMismatch(format!(
                "unsupported model format version {}",
                file.format_version
            )));
        }
        let classes: Vec<&str> = NnClass::ALL.iter().map(|c| c.name()).collect();
        if file.classes != classes {
            return Err(Error::ShapeMismatch(
                "class list differs from the 7-class vocabulary".into(),
            ));
        }
        let arr = |v: &[f64], what: &str| -> Result<[T; FEATURE_DIM]> {
            if v.len() != FEATURE_DIM {
                return Err(Error::ShapeMismatch(format!(
                    "{what} has {} entries",
                    v.len()
                )));
            }
            Ok(std::array::from_fn(|i| T::lit(v[i])))
        };
        let model = Self {
            layers: file
                .layers
                .iter()
                .map(|l| Dense {
                    inputs: l.inputs,
                    outputs: l.outputs,
                    weights: l.weights.iter().map(|&w| T::lit(w)).collect(),
                    bias: l.bias.iter().map(|&b| T::lit(b)).collect(),
                })
                .collect(),
            feat_mean: arr(&file.feat_mean, "feat_mean")?,
            feat_std: arr(&file.feat_std, "feat_std")?,
            tau: T::lit(file.tau),
        };
        model.check()?;
        if !model.is_standard() {
            return Err(Error::ShapeMismatch(
                "hidden layers must be 50, 50, 50".into(),
            ));
        }
        Ok(model)
    }
}

fn layer_widths(hidden: &[usize]) -> Vec<usize> {
    std::iter::once(FEATURE_DIM)
        .chain(hidden.iter().copied())
        .chain(std::iter::once(NUM_CLASSES))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema: String,
    format_version: u32,
    classes: Vec<String>,
    layers: Vec<LayerFile>,
    feat_mean: Vec<f64>,
    feat_std: Vec<f64>,
    tau: f64,
}

/// Class probabilities in [`NnClass::ALL`] order.
pub fn forward<T: Scalar>(model: &MlpModel<T>, fv: &FeatureVector<T>) -> Result<[T; NUM_CLASSES]> {
    model.check()?;
    let z = model.logits(&model.standardize(fv));
    let p = softmax(&z);
    Ok(std::array::from_fn(|i| p[i]))
}

/// Argmax class, demoted to Negative when the winning gesture's probability is at most `tau`.
pub fn classify_probs<T: Scalar>(probs: &[T; NUM_CLASSES], tau: T) -> NnClass {
    let best = (0..NUM_CLASSES).fold(0, |b, i| if probs[i] > probs[b] { i } else { b });
    let class = NnClass::ALL[best];
    if class.is_gesture() && probs[best] <= tau {
        NnClass::Negative
    } else {
        class
    }
}

pub fn classify_nn<T: Scalar>(model: &MlpModel<T>, fv: &FeatureVector<T>) -> Result<NnClass> {
    Ok(classify_probs(&forward(model, fv)?, model.tau))
}
