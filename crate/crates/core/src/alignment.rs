//! Hand center, rotation and scale from two virtual keypoints.
//!
//! The center is the mean of the index, middle and pinky base knuckles. The
//! rotation comes from the sum of the middle-knuckle-to-wrist vector and the
//! index-to-pinky knuckle vector; the two are close to orthogonal on a real
//! hand, so the sum stays long even when one of them collapses in projection
//! (a hand viewed along its own forward axis). The scale is the distance from
//! the center to the farthest knuckle.

use crate::error::{Error, Result};
use crate::geom::{Mat3, Vec2};
use crate::scalar::{wrap_angle, Scalar};
use crate::skeleton::{KeypointIndex, Keypoints2, Keypoints3};

/// Joints that count as knuckles for the scale: every non-wrist, non-tip joint.
pub const KNUCKLES: [usize; 15] = [1, 2, 3, 5, 6, 7, 9, 10, 11, 13, 14, 15, 17, 18, 19];

pub const ROTATION_EPS_PX: f64 = 1e-6;
pub const SCALE_EPS_PX: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlignmentFrame<T> {
    pub center: Vec2<T>,
    /// Angle in (-pi, pi]; 0 when the rotation vector already points to the image top.
    pub rotation_rad: T,
    pub scale_px: T,
}

pub fn center_keypoint<T: Scalar>(kp: &Keypoints2<T>) -> Vec2<T> {
    let sum = kp[KeypointIndex::INDEX_MCP.get()]
        + kp[KeypointIndex::MIDDLE_MCP.get()]
        + kp[KeypointIndex::PINKY_MCP.get()];
    sum / T::lit(3.0)
}

/// `(wrist - middle MCP) + (pinky MCP - index MCP)`.
pub fn rotation_vector<T: Scalar>(kp: &Keypoints2<T>) -> Result<Vec2<T>> {
    let v = (kp[0] - kp[KeypointIndex::MIDDLE_MCP.get()])
        + (kp[KeypointIndex::PINKY_MCP.get()] - kp[KeypointIndex::INDEX_MCP.get()]);
    let norm = v.norm();
    if !(norm >= T::lit(ROTATION_EPS_PX)) {
        return Err(Error::DegenerateRotation {
            norm: norm.as_f64(),
        });
    }
    Ok(v)
}

/// Angle of the rotation vector measured clockwise from image-up (y-down pixels).
pub fn rotation_angle<T: Scalar>(kp: &Keypoints2<T>) -> Result<T> {
    let v = rotation_vector(kp)?;
    Ok(vector_angle(v))
}

pub(crate) fn vector_angle<T: Scalar>(v: Vec2<T>) -> T {
    wrap_angle(v.x.atan2(-v.y))
}

pub fn alignment_scale<T: Scalar>(kp: &Keypoints2<T>) -> Result<T> {
    let c = center_keypoint(kp);
    let scale = KNUCKLES
        .iter()
        .map(|&i| (kp[i] - c).norm())
        .fold(T::zero(), T::max);
    if !(scale >= T::lit(SCALE_EPS_PX)) {
        return Err(Error::DegenerateScale {
            scale: scale.as_f64(),
        });
    }
    Ok(scale)
}

pub fn alignment_frame<T: Scalar>(kp: &Keypoints2<T>) -> Result<AlignmentFrame<T>> {
    Ok(AlignmentFrame {
        center: center_keypoint(kp),
        rotation_rad: rotation_angle(kp)?,
        scale_px: alignment_scale(kp)?,
    })
}

/// Roll 3D keypoints about the viewing axis so they match an image rotated to
/// put the rotation vector at the top.
///
/// In the y-down camera frame this is a rotation by `-rotation_rad` about the
/// optical axis; in the y-up metric frame used for `kp3d` the same rotation reads
/// as `+rotation_rad` about z. Distances are preserved.
pub fn roll_normalize_3d<T: Scalar>(
    kp3d: &Keypoints3<T>,
    kp2d: &Keypoints2<T>,
) -> Result<Keypoints3<T>> {
    let theta = rotation_angle(kp2d)?;
    let r = Mat3::rot_z(theta);
    Ok(kp3d.map(|p| r * p))
}

/// The matching image-space rotation: rotate 2D keypoints about the center by `-rotation_rad`.
pub fn roll_normalize_2d<T: Scalar>(kp2d: &Keypoints2<T>) -> Result<Keypoints2<T>> {
    let frame = alignment_frame(kp2d)?;
    Ok(kp2d.map(|p| frame.center + (p - frame.center).rotated(-frame.rotation_rad)))
}
