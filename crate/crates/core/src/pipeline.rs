//! Flow-controlled streaming: throttled detection while no hand is tracked,
//! per-frame classification while one is.
//!
//! Detection is simulated: it succeeds when the frame carries a hand whose
//! score reaches `min_track_score`. Timestamps drive every decision, so a
//! stream always replays to the same outputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::feature_vector;
use crate::heuristic::{classify_heuristic, GestureConfig, NEGATIVE};
use crate::lifting::{lift_skeleton, HandModel};
use crate::nn::{classify_nn, MlpModel};
use crate::scalar::Scalar;
use crate::skeleton::{HandFrame, HandSkeleton};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[default]
    Untracked,
    Tracked,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Classifier<T> {
    Heuristic(GestureConfig<T>),
    Nn(MlpModel<T>),
}

impl<T: Scalar> Classifier<T> {
    /// Gesture name or `Negative`. Skeletons without 3D keypoints are lifted
    /// first; a skeleton whose features cannot be computed is `Negative`.
    pub fn classify(
        &self,
        skel: &HandSkeleton<T>,
        image_w: u32,
        image_h: u32,
        model: &HandModel<T>,
    ) -> String {
        let kp3d = match skel.kp3d {
            Some(k) => k,
            None => match lift_skeleton(skel, image_w, image_h, model) {
                Ok(k) => k,
                Err(_) => return NEGATIVE.to_string(),
            },
        };
        let Ok(fv) = feature_vector(&kp3d, skel.handedness) else {
            return NEGATIVE.to_string();
        };
        match self {
            Classifier::Heuristic(cfg) => classify_heuristic(&fv, cfg).to_string(),
            Classifier::Nn(m) => {
                classify_nn(m, &fv).map_or_else(|_| NEGATIVE.to_string(), |c| c.name().to_string())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig<T> {
    /// Upper bound on detection attempts per second while untracked.
    pub max_detect_hz: T,
    /// Consecutive frames without a usable hand before tracking is dropped.
    pub track_loss_frames: u32,
    pub min_track_score: T,
    pub classifier: Classifier<T>,
    /// Used to lift frames that arrive without 3D keypoints.
    pub hand_model: HandModel<T>,
}

impl<T: Scalar> PipelineConfig<T> {
    pub fn new(classifier: Classifier<T>) -> Self {
        Self {
            max_detect_hz: T::lit(5.0),
            track_loss_frames: 3,
            min_track_score: T::lit(0.5),
            classifier,
            hand_model: HandModel::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.max_detect_hz > T::zero() && self.max_detect_hz.is_finite()) {
            return Err(Error::InvalidConfig("max_detect_hz must be > 0".into()));
        }
        if self.track_loss_frames == 0 {
            return Err(Error::InvalidConfig(
                "track_loss_frames must be >= 1".into(),
            ));
        }
        if !(self.min_track_score >= T::zero() && self.min_track_score <= T::one()) {
            return Err(Error::InvalidConfig(
                "min_track_score must be in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Minimum spacing between detections in microseconds.
    pub fn detect_period_us(&self) -> f64 {
        1e6 / self.max_detect_hz.as_f64()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineStats {
    pub frames: u64,
    pub detect_invocations: u64,
    pub classify_invocations: u64,
    /// Frames that ended in each mode.
    pub untracked_frames: u64,
    pub tracked_frames: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PipelineState {
    pub mode: Mode,
    pub last_detect_us: Option<i64>,
    pub last_frame_us: Option<i64>,
    pub consecutive_misses: u32,
    pub stats: PipelineStats,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameOutput {
    pub t_us: i64,
    /// Mode after this frame.
    pub mode: Mode,
    /// `None` when classification did not run on this frame.
    pub label: Option<String>,
    pub detect: bool,
    pub classify: bool,
}

fn usable<'a, T: Scalar>(
    frame: &'a HandFrame<T>,
    cfg: &PipelineConfig<T>,
) -> Option<&'a HandSkeleton<T>> {
    frame
        .hand
        .as_ref()
        .filter(|h| h.score >= cfg.min_track_score)
}

/// Advance the state machine by one frame.
pub fn step<T: Scalar>(
    state: &PipelineState,
    frame: &HandFrame<T>,
    cfg: &PipelineConfig<T>,
) -> Result<(PipelineState, FrameOutput)> {
    let t = frame.timestamp_us;
    if let Some(prev) = state.last_frame_us {
        if t <= prev {
            return Err(Error::NonMonotonicTimestamp {
                prev_us: prev,
                t_us: t,
            });
        }
    }
    let mut s = *state;
    s.last_frame_us = Some(t);
    s.stats.frames += 1;
    let hand = usable(frame, cfg);
    let mut detect = false;
    let mut classify_on = None;
    match s.mode {
        Mode::Untracked => {
            let due = s
                .last_detect_us
                .is_none_or(|last| (t - last) as f64 >= cfg.detect_period_us());
            if due {
                detect = true;
                s.stats.detect_invocations += 1;
                s.last_detect_us = Some(t);
                if let Some(h) = hand {
                    s.mode = Mode::Tracked;
                    s.consecutive_misses = 0;
                    classify_on = Some(h);
                }
            }
        }
        Mode::Tracked => match hand {
            Some(h) => {
                s.consecutive_misses = 0;
                classify_on = Some(h);
            }
            None => {
                s.consecutive_misses += 1;
                if s.consecutive_misses >= cfg.track_loss_frames {
                    s.mode = Mode::Untracked;
                    s.consecutive_misses = 0;
                }
            }
        },
    }
    let label = classify_on.map(|h| {
        s.stats.classify_invocations += 1;
        cfg.classifier
            .classify(h, frame.image_w, frame.image_h, &cfg.hand_model)
    });
    match s.mode {
        Mode::Untracked => s.stats.untracked_frames += 1,
        Mode::Tracked => s.stats.tracked_frames += 1,
    }
    Ok((
        s,
        FrameOutput {
            t_us: t,
            mode: s.mode,
            label,
            detect,
            classify: classify_on.is_some(),
        },
    ))
}

/// Fold [`step`] over a stream from the initial untracked state.
pub fn run_stream<T: Scalar>(
    frames: &[HandFrame<T>],
    cfg: &PipelineConfig<T>,
) -> Result<(Vec<FrameOutput>, PipelineStats)> {
    cfg.validate()?;
    let mut state = PipelineState::default();
    let mut out = Vec::with_capacity(frames.len());
    for f in frames {
        let (next, o) = step(&state, f, cfg)?;
        state = next;
        out.push(o);
    }
    Ok((out, state.stats))
}
