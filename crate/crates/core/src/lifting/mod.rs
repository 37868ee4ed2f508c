//! Recover metric 3D keypoints from 2D pixel keypoints by fitting a
//! fixed-shape kinematic hand model under a pinhole camera.
//!
//! The camera follows the usual computer-vision convention (x right, y down,
//! z forward). Stored 3D keypoints use a y-up frame with z toward the viewer
//! and the middle knuckle at the origin; [`camera_to_world`] and
//! [`normalize_world`] convert between the two.

mod fit;
mod model;

pub use fit::{
    fit_pose, fit_pose_from_2d, fit_pose_with, init_params_from_2d, lift_skeleton, FitOptions,
    FitResult,
};
pub use model::{
    bone_names, camera_rotation_from_world, finger_joint_offset, forward_kinematics,
    forward_kinematics_unchecked, joint_name, HandModel, JointKind, PoseParams, ABD_BOX,
    BONE_LENGTH_RANGE, DEFAULT_HAND_MODEL_JSON, FLEX_BOX, NUM_BONES, NUM_JOINT_ANGLES,
    NUM_POSE_PARAMS, ROLL_BOX, THUMB_CMC_ABD, THUMB_CMC_FLEX, THUMB_IP_FLEX, THUMB_MCP_FLEX,
    THUMB_ROLL, TZ_BOX,
};

use crate::error::{Error, Result};
use crate::geom::{Vec2, Vec3};
use crate::scalar::Scalar;
use crate::skeleton::{KeypointIndex, Keypoints2, Keypoints3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraIntrinsics<T> {
    pub f: T,
    pub cx: T,
    pub cy: T,
}

/// Focal length is the larger image dimension; the principal point is the image center.
pub fn default_intrinsics<T: Scalar>(w: u32, h: u32) -> CameraIntrinsics<T> {
    CameraIntrinsics {
        f: T::lit(w.max(h) as f64),
        cx: T::lit(w as f64) / T::lit(2.0),
        cy: T::lit(h as f64) / T::lit(2.0),
    }
}

pub fn project_point<T: Scalar>(p: Vec3<T>, k: &CameraIntrinsics<T>) -> Result<Vec2<T>> {
    if !(p.z > T::zero()) {
        return Err(Error::BehindCamera { z: p.z.as_f64() });
    }
    Ok(Vec2::new(k.f * p.x / p.z + k.cx, k.f * p.y / p.z + k.cy))
}

pub fn project<T: Scalar>(
    points: &Keypoints3<T>,
    k: &CameraIntrinsics<T>,
) -> Result<Keypoints2<T>> {
    let mut out = [Vec2::zero(); 21];
    for (o, p) in out.iter_mut().zip(points) {
        *o = project_point(*p, k)?;
    }
    Ok(out)
}

/// Camera frame (y down, z forward) to the y-up, z-toward-viewer frame.
pub fn camera_to_world<T: Scalar>(points: &Keypoints3<T>) -> Keypoints3<T> {
    points.map(|p| Vec3::new(p.x, -p.y, -p.z))
}

/// Inverse of [`camera_to_world`] (the map is an involution).
pub fn world_to_camera<T: Scalar>(points: &Keypoints3<T>) -> Keypoints3<T> {
    camera_to_world(points)
}

/// Translate so the middle knuckle sits at the origin; scale is untouched.
pub fn normalize_world<T: Scalar>(points: &Keypoints3<T>) -> Keypoints3<T> {
    let o = points[KeypointIndex::MIDDLE_MCP.get()];
    points.map(|p| p - o)
}
