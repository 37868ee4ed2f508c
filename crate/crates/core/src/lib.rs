//! Static hand gesture recognition from streams of 21-keypoint hand skeletons.
//!
//! The crate covers everything downstream of a keypoint detector: hand
//! alignment geometry, extrinsic/intrinsic feature decomposition, a rule-based
//! and a small neural classifier, fitting a kinematic hand model to 2D
//! keypoints, a flow-controlled streaming scheduler, and a synthetic data
//! harness for evaluation.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`). The aliases at
//! the crate root fix the scalar to `f64`, which is what the CLI and file
//! formats use.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alignment;
pub mod error;
pub mod features;
pub mod geom;
pub mod harness;
pub mod heuristic;
pub mod io;
pub mod lifting;
pub mod nn;
pub mod pipeline;
pub mod scalar;
pub mod skeleton;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use skeleton::{Finger, FingerPair, Handedness, KeypointIndex};

pub type Point2 = geom::Vec2<f64>;
pub type Point3 = geom::Vec3<f64>;
pub type Rotation = geom::Mat3<f64>;
pub type HandSkeleton = skeleton::HandSkeleton<f64>;
pub type HandFrame = skeleton::HandFrame<f64>;
pub type RawFrame = skeleton::RawFrame<f64>;
pub type AlignmentFrame = alignment::AlignmentFrame<f64>;
pub type PalmPose = features::PalmPose<f64>;
pub type EulerAngles = features::EulerAngles<f64>;
pub type FeatureVector = features::FeatureVector<f64>;
pub type StateThresholds = heuristic::StateThresholds<f64>;
pub type GestureConfig = heuristic::GestureConfig<f64>;
pub type MlpModel = nn::MlpModel<f64>;
pub type TrainConfig = nn::TrainConfig<f64>;
pub type HandModel = lifting::HandModel<f64>;
pub type PoseParams = lifting::PoseParams<f64>;
pub type CameraIntrinsics = lifting::CameraIntrinsics<f64>;
pub type PipelineConfig = pipeline::PipelineConfig<f64>;
pub type SynthConfig = harness::SynthConfig<f64>;

pub type HandSkeleton32 = skeleton::HandSkeleton<f32>;
pub type FeatureVector32 = features::FeatureVector<f32>;
pub type MlpModel32 = nn::MlpModel<f32>;
