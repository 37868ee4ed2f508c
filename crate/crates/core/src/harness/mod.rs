//! Synthetic labeled hand poses and classifier evaluation.

mod eval;
mod synth;

pub use eval::{eval_classifier, keypoint_error, EvalReport};
pub use synth::{
    default_templates, sample_rng, synth_corpus, synth_pose, GestureTemplate, SynthConfig,
    SynthSample,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::NnClass;

/// The 21 gesture code names of the evaluation vocabulary plus `Negative`,
/// which stands for hard negatives: near misses of a target gesture.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GestureLabel {
    OpenPalm,
    Victory,
    ClosedFist,
    PointingUp,
    ThumbUp,
    ThumbDown,
    OK,
    CallMe,
    IndexMiddlePointingUp,
    Three,
    Four,
    ILoveYou,
    FingerHeart,
    HandHeart,
    IndexMiddlePointingUpWithClosedThumb,
    IndexMiddlePointingUpWithOpenThumb,
    IndexPointingToCamera,
    Loser,
    PinchedFingers,
    VulcanSalute,
    SignOfTheHorns,
    Negative,
}

impl GestureLabel {
    pub const ALL: [GestureLabel; 22] = [
        GestureLabel::OpenPalm,
        GestureLabel::Victory,
        GestureLabel::ClosedFist,
        GestureLabel::PointingUp,
        GestureLabel::ThumbUp,
        GestureLabel::ThumbDown,
        GestureLabel::OK,
        GestureLabel::CallMe,
        GestureLabel::IndexMiddlePointingUp,
        GestureLabel::Three,
        GestureLabel::Four,
        GestureLabel::ILoveYou,
        GestureLabel::FingerHeart,
        GestureLabel::HandHeart,
        GestureLabel::IndexMiddlePointingUpWithClosedThumb,
        GestureLabel::IndexMiddlePointingUpWithOpenThumb,
        GestureLabel::IndexPointingToCamera,
        GestureLabel::Loser,
        GestureLabel::PinchedFingers,
        GestureLabel::VulcanSalute,
        GestureLabel::SignOfTheHorns,
        GestureLabel::Negative,
    ];

    /// The six gestures the classifiers recognize.
    pub const TARGETS: [GestureLabel; 6] = [
        GestureLabel::OpenPalm,
        GestureLabel::Victory,
        GestureLabel::ClosedFist,
        GestureLabel::PointingUp,
        GestureLabel::ThumbUp,
        GestureLabel::ThumbDown,
    ];

    /// The fifteen named gestures outside the target set.
    pub fn named_negatives() -> impl Iterator<Item = GestureLabel> {
        Self::ALL[6..21].iter().copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            GestureLabel::OpenPalm => "OpenPalm",
            GestureLabel::Victory => "Victory",
            GestureLabel::ClosedFist => "ClosedFist",
            GestureLabel::PointingUp => "PointingUp",
            GestureLabel::ThumbUp => "ThumbUp",
            GestureLabel::ThumbDown => "ThumbDown",
            GestureLabel::OK => "OK",
            GestureLabel::CallMe => "CallMe",
            GestureLabel::IndexMiddlePointingUp => "IndexMiddlePointingUp",
            GestureLabel::Three => "Three",
            GestureLabel::Four => "Four",
            GestureLabel::ILoveYou => "ILoveYou",
            GestureLabel::FingerHeart => "FingerHeart",
            GestureLabel::HandHeart => "HandHeart",
            GestureLabel::IndexMiddlePointingUpWithClosedThumb => {
                "IndexMiddlePointingUpWithClosedThumb"
            }
            GestureLabel::IndexMiddlePointingUpWithOpenThumb => {
                "IndexMiddlePointingUpWithOpenThumb"
            }
            GestureLabel::IndexPointingToCamera => "IndexPointingToCamera",
            GestureLabel::Loser => "Loser",
            GestureLabel::PinchedFingers => "PinchedFingers",
            GestureLabel::VulcanSalute => "VulcanSalute",
            GestureLabel::SignOfTheHorns => "SignOfTheHorns",
            GestureLabel::Negative => "Negative",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }

    pub fn is_target(self) -> bool {
        Self::TARGETS.contains(&self)
    }

    /// Classifier class: the target gestures map to themselves, everything else to Negative.
    pub fn nn_class(self) -> NnClass {
        NnClass::from_name(self.name()).unwrap_or(NnClass::Negative)
    }
}

impl std::fmt::Display for GestureLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
