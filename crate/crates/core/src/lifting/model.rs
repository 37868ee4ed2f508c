//! Fixed-shape kinematic hand model and its forward kinematics.
//!
//! Local hand frame (right hand): x toward the thumb side, y along the
//! fingers, z out of the palm. A finger with all joint angles zero continues
//! its wrist-to-base direction. Positive flexion bends toward +z, positive
//! abduction turns toward the thumb. The hand is placed in the camera frame
//! (x right, y down, z forward) by `p_cam = R_g * C * p_local + t` with
//! `C = diag(1, -1, -1)`, so an identity global rotation shows the palm to the
//! camera with the fingers pointing up in the image.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Mat3, Vec3};
use crate::scalar::Scalar;
use crate::skeleton::{Finger, Handedness, Keypoints3, NUM_KEYPOINTS};

pub const NUM_BONES: usize = NUM_KEYPOINTS - 1;
pub const NUM_JOINT_ANGLES: usize = 21;
/// Rotation (3) + translation (3) + joint angles.
pub const NUM_POSE_PARAMS: usize = 6 + NUM_JOINT_ANGLES;

pub const FLEX_BOX: (f64, f64) = (-0.3, 2.0);
pub const ABD_BOX: (f64, f64) = (-0.6, 0.6);
pub const ROLL_BOX: (f64, f64) = (-0.6, 0.6);
/// Open interval for the depth of the wrist.
pub const TZ_BOX: (f64, f64) = (0.05, 3.0);
pub const BONE_LENGTH_RANGE: (f64, f64) = (0.005, 0.12);

/// Joint angle slots: the thumb first, then four per finger.
pub const THUMB_CMC_FLEX: usize = 0;
pub const THUMB_CMC_ABD: usize = 1;
pub const THUMB_MCP_FLEX: usize = 2;
pub const THUMB_IP_FLEX: usize = 3;
pub const THUMB_ROLL: usize = 4;

/// Offset of `[mcp_flex, mcp_abd, pip_flex, dip_flex]` for a non-thumb finger.
pub fn finger_joint_offset(finger: Finger) -> usize {
    debug_assert!(finger != Finger::Thumb);
    5 + 4 * (finger.ordinal() - 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JointKind {
    Flexion,
    Abduction,
    Roll,
}

impl JointKind {
    pub fn of(slot: usize) -> Self {
        match slot {
            THUMB_CMC_ABD => JointKind::Abduction,
            THUMB_ROLL => JointKind::Roll,
            s if s >= 5 && (s - 5) % 4 == 1 => JointKind::Abduction,
            _ => JointKind::Flexion,
        }
    }

    pub fn range(self) -> (f64, f64) {
        match self {
            JointKind::Flexion => FLEX_BOX,
            JointKind::Abduction => ABD_BOX,
            JointKind::Roll => ROLL_BOX,
        }
    }
}

pub fn joint_name(slot: usize) -> String {
    const THUMB: [&str; 5] = ["cmc_flex", "cmc_abd", "mcp_flex", "ip_flex", "roll"];
    const FINGER: [&str; 4] = ["mcp_flex", "mcp_abd", "pip_flex", "dip_flex"];
    if slot < 5 {
        format!("thumb.{}", THUMB[slot])
    } else {
        let f = Finger::ALL[1 + (slot - 5) / 4];
        format!("{}.{}", f.name(), FINGER[(slot - 5) % 4])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HandModel<T> {
    /// Length of the bone ending at keypoint `i + 1`, in meters.
    pub bone_lengths: [T; NUM_BONES],
    /// Unit wrist-to-base-joint direction per finger in the local frame of a right hand.
    pub base_dirs: [Vec3<T>; 5],
    pub handedness: Handedness,
}

#[derive(Serialize, Deserialize)]
struct HandModelFile {
    schema: String,
    handedness: Handedness,
    bone_order: Vec<String>,
    bone_lengths_m: Vec<f64>,
    base_dirs: Vec<[f64; 3]>,
}

pub const DEFAULT_HAND_MODEL_JSON: &str = include_str!("../../data/hand_model.json");

impl<T: Scalar> Default for HandModel<T> {
    fn default() -> Self {
        Self::from_json(DEFAULT_HAND_MODEL_JSON).expect("shipped hand model is valid")
    }
}

impl<T: Scalar> HandModel<T> {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: HandModelFile = serde_json::from_str(text)?;
        if file.bone_lengths_m.len() != NUM_BONES {
            return Err(Error::InvalidConfig(format!(
                "expected {NUM_BONES} bone lengths, got {}",
                file.bone_lengths_m.len()
            )));
        }
        if file.base_dirs.len() != 5 {
            return Err(Error::InvalidConfig(format!(
                "expected 5 base directions, got {}",
                file.base_dirs.len()
            )));
        }
        let mut base_dirs = [Vec3::zero(); 5];
        for (d, raw) in base_dirs.iter_mut().zip(&file.base_dirs) {
            *d = Vec3::new(T::lit(raw[0]), T::lit(raw[1]), T::lit(raw[2]))
                .try_normalize(T::lit(1e-12))
                .ok_or_else(|| Error::InvalidConfig("zero base direction".into()))?;
        }
        let model = Self {
            bone_lengths: std::array::from_fn(|i| T::lit(file.bone_lengths_m[i])),
            base_dirs,
            handedness: file.handedness,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        let file = HandModelFile {
            schema: "handgest.hand_model.v1".into(),
            handedness: self.handedness,
            bone_order: bone_names(),
            bone_lengths_m: self.bone_lengths.iter().map(|l| l.as_f64()).collect(),
            base_dirs: self
                .base_dirs
                .iter()
                .map(|d| [d.x.as_f64(), d.y.as_f64(), d.z.as_f64()])
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("hand model serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = (T::lit(BONE_LENGTH_RANGE.0), T::lit(BONE_LENGTH_RANGE.1));
        for (i, &l) in self.bone_lengths.iter().enumerate() {
            if !(l > lo && l < hi) {
                return Err(Error::InvalidConfig(format!(
                    "bone {} length {l} m outside ({lo}, {hi})",
                    bone_names()[i]
                )));
            }
        }
        Ok(())
    }

    pub fn with_handedness(&self, handedness: Handedness) -> Self {
        Self {
            handedness,
            ..self.clone()
        }
    }

    /// Every bone length multiplied by `s`. Not re-validated.
    pub fn scaled(&self, s: T) -> Self {
        Self {
            bone_lengths: self.bone_lengths.map(|l| l * s),
            ..self.clone()
        }
    }

    fn base_joint(&self, finger: Finger) -> Vec3<T> {
        let i = finger.ordinal();
        self.base_dirs[i] * self.bone_lengths[4 * i]
    }

    /// Keypoints in the local hand frame for the given joint angles.
    pub fn local_keypoints(&self, joints: &[T; NUM_JOINT_ANGLES]) -> Keypoints3<T> {
        let mut out = [Vec3::zero(); NUM_KEYPOINTS];
        let up = Vec3::unit_y();
        let z = Vec3::unit_z();
        for finger in Finger::ALL {
            let i = finger.ordinal();
            let base = self.base_joint(finger);
            let fwd = self.base_dirs[i];
            let rots: [Mat3<T>; 3] = if finger == Finger::Thumb {
                let p = Vec3::new(T::lit(-0.5), T::zero(), T::lit(0.75).sqrt());
                let p = (p - fwd * p.dot(fwd))
                    .try_normalize(T::lit(1e-9))
                    .unwrap_or(z);
                let frame = Mat3::from_cols(fwd.cross(p), fwd, p);
                let r1 = frame
                    * Mat3::rot_z(-joints[THUMB_CMC_ABD])
                    * Mat3::rot_x(joints[THUMB_CMC_FLEX])
                    * Mat3::rot_y(joints[THUMB_ROLL]);
                let r2 = r1 * Mat3::rot_x(joints[THUMB_MCP_FLEX]);
                let r3 = r2 * Mat3::rot_x(joints[THUMB_IP_FLEX]);
                [r1, r2, r3]
            } else {
                let o = finger_joint_offset(finger);
                let frame = Mat3::from_cols(fwd.cross(z), fwd, z);
                let r1 = frame * Mat3::rot_z(-joints[o + 1]) * Mat3::rot_x(joints[o]);
                let r2 = r1 * Mat3::rot_x(joints[o + 2]);
                let r3 = r2 * Mat3::rot_x(joints[o + 3]);
                [r1, r2, r3]
            };
            let k = 4 * i + 1;
            out[k] = base;
            for (j, r) in rots.iter().enumerate() {
                out[k + j + 1] = out[k + j] + (*r * up) * self.bone_lengths[k + j];
            }
        }
        if self.handedness == Handedness::Left {
            for p in &mut out {
                p.x = -p.x;
            }
        }
        out
    }
}

pub fn bone_names() -> Vec<String> {
    let joint = |f: Finger, j: usize| {
        let names = if f == Finger::Thumb {
            ["cmc", "mcp", "ip", "tip"]
        } else {
            ["mcp", "pip", "dip", "tip"]
        };
        format!("{}_{}", f.name(), names[j])
    };
    Finger::ALL
        .into_iter()
        .flat_map(|f| {
            (0..4).map(move |j| {
                let from = if j == 0 {
                    "wrist".to_string()
                } else {
                    joint(f, j - 1)
                };
                format!("{from}-{}", joint(f, j))
            })
        })
        .collect()
}

/// Global rigid pose plus joint angles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseParams<T> {
    /// Axis-angle rotation of the camera-frame hand.
    pub global_rot: Vec3<T>,
    /// Wrist position in the camera frame (m).
    pub global_t: Vec3<T>,
    pub joint_angles: [T; NUM_JOINT_ANGLES],
}

impl<T: Scalar> PoseParams<T> {
    pub fn rest(global_t: Vec3<T>) -> Self {
        Self {
            global_rot: Vec3::zero(),
            global_t,
            joint_angles: [T::zero(); NUM_JOINT_ANGLES],
        }
    }

    pub fn to_vec(&self) -> [T; NUM_POSE_PARAMS] {
        let mut v = [T::zero(); NUM_POSE_PARAMS];
        v[..3].copy_from_slice(&<[T; 3]>::from(self.global_rot));
        v[3..6].copy_from_slice(&<[T; 3]>::from(self.global_t));
        v[6..].copy_from_slice(&self.joint_angles);
        v
    }

    pub fn from_vec(v: &[T; NUM_POSE_PARAMS]) -> Self {
        Self {
            global_rot: Vec3::new(v[0], v[1], v[2]),
            global_t: Vec3::new(v[3], v[4], v[5]),
            joint_angles: std::array::from_fn(|i| v[6 + i]),
        }
    }

    /// First box violation, if any.
    pub fn check_boxes(&self) -> Result<()> {
        let tz = self.global_t.z;
        if !(tz > T::lit(TZ_BOX.0) && tz < T::lit(TZ_BOX.1)) {
            return Err(Error::OutOfBox {
                name: "t_z".into(),
                value: tz.as_f64(),
            });
        }
        for (i, &a) in self.joint_angles.iter().enumerate() {
            let (lo, hi) = JointKind::of(i).range();
            let v = a.as_f64();
            if !(v >= lo && v <= hi) {
                return Err(Error::OutOfBox {
                    name: joint_name(i),
                    value: v,
                });
            }
        }
        if !self.global_rot.is_finite() || !self.global_t.is_finite() {
            return Err(Error::OutOfBox {
                name: "global pose".into(),
                value: f64::NAN,
            });
        }
        Ok(())
    }

    /// Joint angles clamped into their boxes.
    pub fn clamped(&self) -> Self {
        let mut out = *self;
        for (i, a) in out.joint_angles.iter_mut().enumerate() {
            let (lo, hi) = JointKind::of(i).range();
            *a = a.max(T::lit(lo)).min(T::lit(hi));
        }
        out
    }
}

/// Camera-frame rotation of the hand for a given world-frame (y up, z toward the viewer) rotation.
pub fn camera_rotation_from_world<T: Scalar>(r_world: &Mat3<T>) -> Mat3<T> {
    let c = flip();
    c * *r_world * c
}

fn flip<T: Scalar>() -> Mat3<T> {
    Mat3::diag(T::one(), -T::one(), -T::one())
}

/// Camera-frame keypoints without box checks.
pub fn forward_kinematics_unchecked<T: Scalar>(
    model: &HandModel<T>,
    params: &PoseParams<T>,
) -> Keypoints3<T> {
    let r = Mat3::from_axis_angle(params.global_rot) * flip();
    model
        .local_keypoints(&params.joint_angles)
        .map(|p| r * p + params.global_t)
}

/// Camera-frame keypoints (m). Fails with [`Error::OutOfBox`] on parameters outside their boxes.
pub fn forward_kinematics<T: Scalar>(
    model: &HandModel<T>,
    params: &PoseParams<T>,
) -> Result<Keypoints3<T>> {
    params.check_boxes()?;
    Ok(forward_kinematics_unchecked(model, params))
}
