//! Extrinsic/intrinsic feature decomposition of metric 3D keypoints.
//!
//! The palm pose (rotation, translation, scale) is estimated from the wrist and
//! the index and pinky base knuckles. Only its rotation is kept as a feature, as
//! three Z-Y-X Euler angles. Intrinsic features are angles measured on keypoints
//! with the palm pose divided out, so they depend on hand shape only.

use crate::error::{Error, Result};
use crate::geom::{Mat3, Vec3};
use crate::scalar::{wrap_angle, Scalar};
use crate::skeleton::{chain_points, Finger, FingerPair, Handedness, KeypointIndex, Keypoints3};

pub const FEATURE_DIM: usize = 12;

const PALM_CROSS_EPS: f64 = 1e-9;
const PALM_SCALE_EPS: f64 = 1e-6;
const SEGMENT_EPS: f64 = 1e-9;
const GIMBAL_EPS: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PalmPose<T> {
    /// Columns are the lateral, forward and palm-normal axes in world coordinates.
    pub rotation: Mat3<T>,
    /// Wrist position.
    pub translation: Vec3<T>,
    /// Wrist to middle knuckle distance.
    pub scale: T,
}

/// Intrinsic Z-Y-X Tait-Bryan angles: `R = Rz(yaw) * Ry(pitch) * Rx(roll)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EulerAngles<T> {
    pub yaw: T,
    pub pitch: T,
    pub roll: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EulerExtraction<T> {
    pub angles: EulerAngles<T>,
    /// Set when |cos(pitch)| fell below 1e-7; yaw was then fixed to 0.
    pub gimbal_lock: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FeatureVector<T> {
    pub euler: EulerAngles<T>,
    /// Thumb through pinky.
    pub finger_angles: [T; 5],
    /// Thumb-index, index-middle, middle-ring, ring-pinky.
    pub pair_angles: [T; 4],
}

impl<T: Scalar> EulerAngles<T> {
    pub fn new(yaw: T, pitch: T, roll: T) -> Self {
        Self { yaw, pitch, roll }
    }

    pub fn to_array(self) -> [T; 3] {
        [self.yaw, self.pitch, self.roll]
    }
}

impl<T: Scalar> FeatureVector<T> {
    /// Flat layout `[yaw, pitch, roll, 5 finger angles, 4 pair angles]`.
    pub fn to_array(&self) -> [T; FEATURE_DIM] {
        let mut out = [T::zero(); FEATURE_DIM];
        out[..3].copy_from_slice(&self.euler.to_array());
        out[3..8].copy_from_slice(&self.finger_angles);
        out[8..].copy_from_slice(&self.pair_angles);
        out
    }

    pub fn from_array(a: &[T; FEATURE_DIM]) -> Self {
        Self {
            euler: EulerAngles::new(a[0], a[1], a[2]),
            finger_angles: [a[3], a[4], a[5], a[6], a[7]],
            pair_angles: [a[8], a[9], a[10], a[11]],
        }
    }

    pub fn finger(&self, f: Finger) -> T {
        self.finger_angles[f.ordinal()]
    }

    pub fn pair(&self, p: FingerPair) -> T {
        self.pair_angles[p.ordinal()]
    }

    /// All values finite and the Euler/intrinsic ranges respected.
    pub fn in_range(&self) -> bool {
        let pi = T::PI();
        let half = T::FRAC_PI_2();
        let e = self.euler;
        self.to_array().iter().all(|v| v.is_finite())
            && e.yaw > -pi
            && e.yaw <= pi
            && e.roll > -pi
            && e.roll <= pi
            && e.pitch >= -half
            && e.pitch <= half
            && self
                .finger_angles
                .iter()
                .chain(&self.pair_angles)
                .all(|&a| a >= T::zero() && a <= pi)
    }
}

pub fn palm_pose<T: Scalar>(kp3d: &Keypoints3<T>, handedness: Handedness) -> Result<PalmPose<T>> {
    let wrist = kp3d[0];
    let v1 = kp3d[KeypointIndex::INDEX_MCP.get()] - wrist;
    let v2 = kp3d[KeypointIndex::PINKY_MCP.get()] - wrist;
    let cross = match handedness {
        Handedness::Right => v1.cross(v2),
        Handedness::Left => v2.cross(v1),
    };
    let cross_norm = cross.norm();
    if !(cross_norm >= T::lit(PALM_CROSS_EPS)) {
        return Err(Error::DegeneratePalm(format!(
            "wrist and index/pinky knuckles collinear (|v1 x v2| = {cross_norm})"
        )));
    }
    let scale = (kp3d[KeypointIndex::MIDDLE_MCP.get()] - wrist).norm();
    if !(scale >= T::lit(PALM_SCALE_EPS)) {
        return Err(Error::DegeneratePalm(format!(
            "palm scale {scale} too small"
        )));
    }
    let normal = cross / cross_norm;
    let sum = v1 + v2;
    let forward = (sum - normal * sum.dot(normal))
        .try_normalize(T::lit(PALM_CROSS_EPS))
        .ok_or_else(|| Error::DegeneratePalm("no forward direction in palm plane".into()))?;
    let lateral = forward.cross(normal);
    Ok(PalmPose {
        rotation: Mat3::from_cols(lateral, forward, normal),
        translation: wrist,
        scale,
    })
}

pub fn rotation_from_euler<T: Scalar>(e: EulerAngles<T>) -> Mat3<T> {
    Mat3::rot_z(e.yaw) * Mat3::rot_y(e.pitch) * Mat3::rot_x(e.roll)
}

pub fn euler_from_rotation<T: Scalar>(r: &Mat3<T>) -> EulerExtraction<T> {
    let m = &r.m;
    let cos_pitch = m[0][0].hypot(m[1][0]);
    let pitch = (-m[2][0]).atan2(cos_pitch);
    if cos_pitch < T::lit(GIMBAL_EPS) {
        // yaw and roll share one axis; put all of it in roll
        let roll = (-m[1][2]).atan2(m[1][1]);
        return EulerExtraction {
            angles: EulerAngles::new(T::zero(), pitch, wrap_angle(roll)),
            gimbal_lock: true,
        };
    }
    let yaw = m[1][0].atan2(m[0][0]);
    let roll = m[2][1].atan2(m[2][2]);
    EulerExtraction {
        angles: EulerAngles::new(wrap_angle(yaw), pitch, wrap_angle(roll)),
        gimbal_lock: false,
    }
}

/// `R^T (p - t) / scale`: wrist at the origin, unit wrist-to-middle-knuckle length.
pub fn intrinsic_keypoints<T: Scalar>(kp3d: &Keypoints3<T>, pose: &PalmPose<T>) -> Keypoints3<T> {
    let rt = pose.rotation.transpose();
    kp3d.map(|p| (rt * (p - pose.translation)) / pose.scale)
}

/// Largest angle between the wrist-to-base segment and each later segment of the finger chain.
pub fn finger_feature_angle<T: Scalar>(kp3d: &Keypoints3<T>, finger: Finger) -> Result<T> {
    let c = chain_points(kp3d, finger);
    let segs: [Vec3<T>; 4] = std::array::from_fn(|k| c[k + 1] - c[k]);
    if segs.iter().any(|s| !(s.norm() >= T::lit(SEGMENT_EPS))) {
        return Err(Error::ZeroSegment);
    }
    Ok(segs[1..]
        .iter()
        .map(|s| segs[0].angle_to(*s))
        .fold(T::zero(), T::max))
}

/// Unsigned angle between the proximal segments (base joint to first intermediate joint).
pub fn pair_feature_angle<T: Scalar>(kp3d: &Keypoints3<T>, pair: FingerPair) -> Result<T> {
    let (a, b) = pair.fingers();
    let seg = |f: Finger| kp3d[KeypointIndex::of(f, 1).get()] - kp3d[KeypointIndex::of(f, 0).get()];
    let (sa, sb) = (seg(a), seg(b));
    if !(sa.norm() >= T::lit(SEGMENT_EPS) && sb.norm() >= T::lit(SEGMENT_EPS)) {
        return Err(Error::ZeroSegment);
    }
    Ok(sa.angle_to(sb))
}

/// The 12-value classifier input.
///
/// Euler angles are reported in a handedness-canonical form: a left hand gets
/// the angles of its mirror image (`yaw` and `pitch` negated), so the same
/// physical gesture orientation yields the same angles for either hand.
pub fn feature_vector<T: Scalar>(
    kp3d: &Keypoints3<T>,
    handedness: Handedness,
) -> Result<FeatureVector<T>> {
    let pose = palm_pose(kp3d, handedness)?;
    let mut euler = euler_from_rotation(&pose.rotation).angles;
    if handedness == Handedness::Left {
        euler = EulerAngles::new(wrap_angle(-euler.yaw), -euler.pitch, euler.roll);
    }
    let local = intrinsic_keypoints(kp3d, &pose);
    let mut finger_angles = [T::zero(); 5];
    for f in Finger::ALL {
        finger_angles[f.ordinal()] = finger_feature_angle(&local, f)?;
    }
    let mut pair_angles = [T::zero(); 4];
    for p in FingerPair::ALL {
        pair_angles[p.ordinal()] = pair_feature_angle(&local, p)?;
    }
    Ok(FeatureVector {
        euler,
        finger_angles,
        pair_angles,
    })
}
