//! Hand skeleton data model and the 21-point keypoint topology.
//!
//! Index layout: 0 is the wrist, then four joints per finger ordered base to
//! tip: thumb 1-4, index 5-8, middle 9-12, ring 13-16, pinky 17-20.
//!
//! 2D keypoints are pixels with y pointing down. 3D keypoints are meters in a
//! right-handed y-up frame (x right, z toward the viewer).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Vec2, Vec3};
use crate::scalar::Scalar;

pub const NUM_KEYPOINTS: usize = 21;

pub type Keypoints2<T> = [Vec2<T>; NUM_KEYPOINTS];
pub type Keypoints3<T> = [Vec3<T>; NUM_KEYPOINTS];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KeypointIndex(u8);

impl KeypointIndex {
    pub const WRIST: Self = Self(0);
    pub const THUMB_CMC: Self = Self(1);
    pub const INDEX_MCP: Self = Self(5);
    pub const MIDDLE_MCP: Self = Self(9);
    pub const RING_MCP: Self = Self(13);
    pub const PINKY_MCP: Self = Self(17);

    pub fn new(i: usize) -> Option<Self> {
        (i < NUM_KEYPOINTS).then_some(Self(i as u8))
    }

    /// Joint `joint` (0 = base .. 3 = tip) of `finger`.
    pub fn of(finger: Finger, joint: usize) -> Self {
        assert!(joint < 4, "finger joint index {joint} out of range");
        Self((4 * finger.ordinal() + 1 + joint) as u8)
    }

    pub fn get(self) -> usize {
        self.0 as usize
    }

    /// Topological parent; `None` for the wrist.
    pub fn parent(self) -> Option<Self> {
        match self.0 {
            0 => None,
            i if (i - 1) % 4 == 0 => Some(Self::WRIST),
            i => Some(Self(i - 1)),
        }
    }

    pub fn finger(self) -> Option<Finger> {
        (self.0 > 0).then(|| Finger::ALL[(self.0 as usize - 1) / 4])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Finger {
    Thumb,
    Index,
    Middle,
    Ring,
    Pinky,
}

impl Finger {
    pub const ALL: [Finger; 5] = [
        Finger::Thumb,
        Finger::Index,
        Finger::Middle,
        Finger::Ring,
        Finger::Pinky,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Finger::Thumb => "thumb",
            Finger::Index => "index",
            Finger::Middle => "middle",
            Finger::Ring => "ring",
            Finger::Pinky => "pinky",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
    }
}

/// Adjacent finger pair, ordered thumb side first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FingerPair {
    ThumbIndex,
    IndexMiddle,
    MiddleRing,
    RingPinky,
}

impl FingerPair {
    pub const ALL: [FingerPair; 4] = [
        FingerPair::ThumbIndex,
        FingerPair::IndexMiddle,
        FingerPair::MiddleRing,
        FingerPair::RingPinky,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn fingers(self) -> (Finger, Finger) {
        let i = self.ordinal();
        (Finger::ALL[i], Finger::ALL[i + 1])
    }

    pub fn name(self) -> &'static str {
        match self {
            FingerPair::ThumbIndex => "thumb_index",
            FingerPair::IndexMiddle => "index_middle",
            FingerPair::MiddleRing => "middle_ring",
            FingerPair::RingPinky => "ring_pinky",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Handedness {
    Left,
    #[default]
    Right,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HandSkeleton<T> {
    pub kp2d: Keypoints2<T>,
    pub kp3d: Option<Keypoints3<T>>,
    pub handedness: Handedness,
    pub score: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HandFrame<T> {
    pub timestamp_us: i64,
    pub image_w: u32,
    pub image_h: u32,
    pub hand: Option<HandSkeleton<T>>,
}

/// Wire form of a hand, before count and range checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Clone + Serialize",
    deserialize = "T: Deserialize<'de>"
))]
pub struct RawHand<T> {
    pub handedness: Handedness,
    pub score: T,
    pub kp2d: Vec<Vec2<T>>,
    #[serde(default)]
    pub kp3d: Option<Vec<Vec3<T>>>,
}

/// Wire form of a frame: `{"t_us","w","h","hand"}`. Unknown fields are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Clone + Serialize",
    deserialize = "T: Deserialize<'de>"
))]
pub struct RawFrame<T> {
    pub t_us: i64,
    pub w: i64,
    pub h: i64,
    pub hand: Option<RawHand<T>>,
}

impl<T: Scalar> From<&HandFrame<T>> for RawFrame<T> {
    fn from(f: &HandFrame<T>) -> Self {
        RawFrame {
            t_us: f.timestamp_us,
            w: f.image_w as i64,
            h: f.image_h as i64,
            hand: f.hand.as_ref().map(|h| RawHand {
                handedness: h.handedness,
                score: h.score,
                kp2d: h.kp2d.to_vec(),
                kp3d: h.kp3d.map(|k| k.to_vec()),
            }),
        }
    }
}

/// Check every frame invariant and convert to the fixed-size representation.
pub fn validate_frame<T: Scalar>(raw: &RawFrame<T>) -> Result<HandFrame<T>> {
    let dim = |v: i64, name: &str| -> Result<u32> {
        if v <= 0 || v > u32::MAX as i64 {
            return Err(Error::MalformedFrame(format!(
                "{name} = {v} must be a positive pixel count"
            )));
        }
        Ok(v as u32)
    };
    let image_w = dim(raw.w, "w")?;
    let image_h = dim(raw.h, "h")?;
    let hand = raw.hand.as_ref().map(validate_hand).transpose()?;
    Ok(HandFrame {
        timestamp_us: raw.t_us,
        image_w,
        image_h,
        hand,
    })
}

fn validate_hand<T: Scalar>(h: &RawHand<T>) -> Result<HandSkeleton<T>> {
    if !(h.score >= T::zero() && h.score <= T::one()) {
        return Err(Error::MalformedFrame(format!(
            "score {} outside [0, 1]",
            h.score
        )));
    }
    let kp2d: Keypoints2<T> = h.kp2d.as_slice().try_into().map_err(|_| {
        Error::MalformedFrame(format!(
            "expected {NUM_KEYPOINTS} 2D keypoints, got {}",
            h.kp2d.len()
        ))
    })?;
    if let Some(i) = kp2d.iter().position(|p| !p.is_finite()) {
        return Err(Error::MalformedFrame(format!("non-finite 2D keypoint {i}")));
    }
    let kp3d = match &h.kp3d {
        None => None,
        Some(pts) => {
            let arr: Keypoints3<T> = pts.as_slice().try_into().map_err(|_| {
                Error::MalformedFrame(format!(
                    "expected {NUM_KEYPOINTS} 3D keypoints, got {}",
                    pts.len()
                ))
            })?;
            if let Some(i) = arr.iter().position(|p| !p.is_finite()) {
                return Err(Error::MalformedFrame(format!("non-finite 3D keypoint {i}")));
            }
            Some(arr)
        }
    };
    Ok(HandSkeleton {
        kp2d,
        kp3d,
        handedness: h.handedness,
        score: h.score,
    })
}

/// Validate a whole stream, additionally requiring strictly increasing timestamps.
pub fn validate_stream<T: Scalar>(raw: &[RawFrame<T>]) -> Result<Vec<HandFrame<T>>> {
    let mut out: Vec<HandFrame<T>> = Vec::with_capacity(raw.len());
    for r in raw {
        let f = validate_frame(r)?;
        if let Some(prev) = out.last() {
            if f.timestamp_us <= prev.timestamp_us {
                return Err(Error::NonMonotonicTimestamp {
                    prev_us: prev.timestamp_us,
                    t_us: f.timestamp_us,
                });
            }
        }
        out.push(f);
    }
    Ok(out)
}

/// Wrist followed by the four joints of `finger`, base to tip.
pub fn finger_chain<T: Scalar>(skel: &HandSkeleton<T>, finger: Finger) -> Result<[Vec3<T>; 5]> {
    let kp3d = skel.kp3d.as_ref().ok_or(Error::Missing3D)?;
    Ok(chain_points(kp3d, finger))
}

/// Index form of [`finger_chain`].
pub fn finger_chain_indices(finger: Finger) -> [usize; 5] {
    let b = 4 * finger.ordinal();
    [0, b + 1, b + 2, b + 3, b + 4]
}

pub(crate) fn chain_points<T: Scalar>(kp3d: &Keypoints3<T>, finger: Finger) -> [Vec3<T>; 5] {
    finger_chain_indices(finger).map(|i| kp3d[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(n2d: usize, score: f64) -> RawFrame<f64> {
        RawFrame {
            t_us: 10,
            w: 640,
            h: 480,
            hand: Some(RawHand {
                handedness: Handedness::Right,
                score,
                kp2d: (0..n2d)
                    .map(|i| Vec2::new(i as f64, 2.0 * i as f64))
                    .collect(),
                kp3d: None,
            }),
        }
    }

    #[test]
    fn accepts_valid_frame() {
        let f = validate_frame(&raw(21, 0.9)).unwrap();
        assert_eq!(f.hand.unwrap().kp2d[20], Vec2::new(20.0, 40.0));
    }

    #[test]
    fn rejects_wrong_count() {
        assert!(matches!(
            validate_frame(&raw(20, 0.9)),
            Err(Error::MalformedFrame(_))
        ));
    }

    #[test]
    fn accepts_empty_hand() {
        let mut r = raw(21, 0.9);
        r.hand = None;
        assert!(validate_frame(&r).unwrap().hand.is_none());
    }

    #[test]
    fn rejects_bad_score_dims_and_nan() {
        assert!(validate_frame(&raw(21, 1.5)).is_err());
        assert!(validate_frame(&raw(21, f64::NAN)).is_err());
        let mut r = raw(21, 0.5);
        r.w = 0;
        assert!(validate_frame(&r).is_err());
        let mut r = raw(21, 0.5);
        r.hand.as_mut().unwrap().kp2d[3].y = f64::INFINITY;
        assert!(validate_frame(&r).is_err());
        let mut r = raw(21, 0.5);
        r.hand.as_mut().unwrap().kp3d = Some(vec![Vec3::zero(); 19]);
        assert!(validate_frame(&r).is_err());
    }

    #[test]
    fn validation_is_idempotent() {
        let once = validate_frame(&raw(21, 0.3)).unwrap();
        let twice = validate_frame(&RawFrame::from(&once)).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn stream_requires_increasing_timestamps() {
        let a = raw(21, 0.9);
        let mut b = raw(21, 0.9);
        b.t_us = 10;
        assert!(matches!(
            validate_stream(&[a.clone(), b]),
            Err(Error::NonMonotonicTimestamp { .. })
        ));
        let mut c = a.clone();
        c.t_us = 11;
        assert_eq!(validate_stream(&[a, c]).unwrap().len(), 2);
    }

    #[test]
    fn chain_indices_follow_topology() {
        assert_eq!(finger_chain_indices(Finger::Index), [0, 5, 6, 7, 8]);
        assert_eq!(finger_chain_indices(Finger::Thumb), [0, 1, 2, 3, 4]);
        let mut seen = [0usize; NUM_KEYPOINTS];
        for f in Finger::ALL {
            for i in &finger_chain_indices(f)[1..] {
                seen[*i] += 1;
            }
        }
        assert_eq!(seen[0], 0);
        assert!(seen[1..].iter().all(|&c| c == 1));
    }

    #[test]
    fn chain_requires_3d() {
        let f = validate_frame(&raw(21, 0.9)).unwrap();
        assert!(matches!(
            finger_chain(&f.hand.unwrap(), Finger::Ring),
            Err(Error::Missing3D)
        ));
    }

    #[test]
    fn chain_returns_points() {
        let mut f = validate_frame(&raw(21, 0.9)).unwrap().hand.unwrap();
        let mut k = [Vec3::zero(); NUM_KEYPOINTS];
        for (i, p) in k.iter_mut().enumerate() {
            *p = Vec3::new(i as f64, 0.0, 0.0);
        }
        f.kp3d = Some(k);
        let c = finger_chain(&f, Finger::Index).unwrap();
        assert_eq!(c.map(|p| p.x as usize), [0, 5, 6, 7, 8]);
    }

    #[test]
    fn parents() {
        assert_eq!(KeypointIndex::WRIST.parent(), None);
        assert_eq!(
            KeypointIndex::new(5).unwrap().parent(),
            Some(KeypointIndex::WRIST)
        );
        assert_eq!(
            KeypointIndex::new(8).unwrap().parent(),
            KeypointIndex::new(7)
        );
        assert_eq!(KeypointIndex::of(Finger::Ring, 0), KeypointIndex::RING_MCP);
        assert_eq!(
            KeypointIndex::new(20).unwrap().finger(),
            Some(Finger::Pinky)
        );
        assert!(KeypointIndex::new(21).is_none());
    }

    #[test]
    fn frame_json_schema() {
        let line = r#"{"t_us":5,"w":4,"h":3,"hand":null,"label":"OpenPalm"}"#;
        let r: RawFrame<f64> = serde_json::from_str(line).unwrap();
        assert_eq!(r.t_us, 5);
        let out = serde_json::to_string(&r).unwrap();
        assert_eq!(out, r#"{"t_us":5,"w":4,"h":3,"hand":null}"#);
    }
}
