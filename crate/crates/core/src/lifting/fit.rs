//! Levenberg-Marquardt fit of the kinematic model to 2D keypoints.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alignment::{alignment_scale, rotation_angle};
use crate::error::{Error, Result};
use crate::geom::{Mat3, Vec2, Vec3};
use crate::scalar::Scalar;
use crate::skeleton::{HandSkeleton, Keypoints2, Keypoints3, NUM_KEYPOINTS};

use super::model::{
    forward_kinematics_unchecked, HandModel, JointKind, PoseParams, NUM_POSE_PARAMS, TZ_BOX,
};
use super::{camera_to_world, default_intrinsics, normalize_world, project, CameraIntrinsics};

const LAMBDA_MIN: f64 = 1e-12;
const LAMBDA_MAX: f64 = 1e8;
const DIAG_FLOOR: f64 = 1e-9;
const COST_FLOOR: f64 = 1e-24;

#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub rel_tol: f64,
    /// Central-difference step for the numeric Jacobian.
    pub jacobian_step: f64,
    pub lambda_init: f64,
    /// Final reprojection RMS above which the fit is reported as diverged.
    pub rms_ceiling_px: f64,
    /// Penalty residual per unit of box violation (px per rad, px per m for depth).
    pub box_weight: f64,
    /// Extra solves started from the best pose with perturbed joint angles,
    /// tried while the reprojection RMS stays above `restart_above_px`.
    /// Near-straight fingers admit nearly mirror-symmetric local minima that a
    /// single descent can fall into.
    pub restarts: usize,
    pub restart_above_px: f64,
    /// Half-width of the uniform joint-angle perturbation for restarts (rad).
    /// Joints within four half-widths of straight also flip sign at random.
    pub restart_spread: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            rel_tol: 1e-10,
            jacobian_step: 1e-6,
            lambda_init: 1e-3,
            rms_ceiling_px: 20.0,
            box_weight: 100.0,
            restarts: 8,
            restart_above_px: 1e-4,
            restart_spread: 0.15,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitResult<T> {
    pub params: PoseParams<T>,
    /// Camera-frame keypoints of the fitted pose (m).
    pub keypoints: Keypoints3<T>,
    /// Root mean square reprojection distance over the 21 keypoints.
    pub rms_px: T,
    /// Number of Jacobian evaluations, over all solves.
    pub iterations: usize,
    /// Restarts that were run.
    pub restarts: usize,
    /// Objective after initialization and after every accepted step, for the
    /// solve that produced the result.
    pub cost_history: Vec<T>,
    /// Damping after every accepted or rejected step of that solve.
    pub lambda_history: Vec<f64>,
}

struct Solve<T> {
    x: [T; NUM_POSE_PARAMS],
    cost: T,
    iterations: usize,
    cost_history: Vec<T>,
    lambda_history: Vec<f64>,
}

struct Problem<'a, T> {
    obs: &'a Keypoints2<T>,
    model: &'a HandModel<T>,
    k: &'a CameraIntrinsics<T>,
    box_weight: T,
}

impl<T: Scalar> Problem<'_, T> {
    /// Reprojection residuals (x, y per keypoint) followed by box penalties;
    /// `None` when a keypoint falls behind the camera.
    fn residuals(&self, x: &[T; NUM_POSE_PARAMS]) -> Option<Vec<T>> {
        let p = PoseParams::from_vec(x);
        let pts = forward_kinematics_unchecked(self.model, &p);
        let proj = project(&pts, self.k).ok()?;
        let mut r = Vec::with_capacity(2 * NUM_KEYPOINTS + p.joint_angles.len() + 1);
        for (q, o) in proj.iter().zip(self.obs) {
            r.push(q.x - o.x);
            r.push(q.y - o.y);
        }
        let excess = |v: T, lo: f64, hi: f64| {
            (T::lit(lo) - v).max(T::zero()) + (v - T::lit(hi)).max(T::zero())
        };
        for (i, &a) in p.joint_angles.iter().enumerate() {
            let (lo, hi) = JointKind::of(i).range();
            r.push(self.box_weight * excess(a, lo, hi));
        }
        r.push(self.box_weight * excess(p.global_t.z, TZ_BOX.0, TZ_BOX.1));
        Some(r)
    }

    fn jacobian(&self, x: &[T; NUM_POSE_PARAMS], m: usize, h: T) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(m, NUM_POSE_PARAMS);
        for c in 0..NUM_POSE_PARAMS {
            let mut xp = *x;
            let mut xm = *x;
            xp[c] += h;
            xm[c] -= h;
            if let (Some(rp), Some(rm)) = (self.residuals(&xp), self.residuals(&xm)) {
                for (row, (a, b)) in rp.iter().zip(&rm).enumerate() {
                    j[(row, c)] = ((*a - *b) / (h + h)).as_f64();
                }
            }
        }
        j
    }
}

fn sum_sq<T: Scalar>(r: &[T]) -> T {
    r.iter().map(|&v| v * v).sum()
}

/// [`fit_pose_with`] using default options.
pub fn fit_pose<T: Scalar>(
    kp2d: &Keypoints2<T>,
    model: &HandModel<T>,
    k: &CameraIntrinsics<T>,
    init: &PoseParams<T>,
) -> Result<FitResult<T>> {
    fit_pose_with(kp2d, model, k, init, &FitOptions::default())
}

/// Minimize the squared reprojection error plus box penalties over the pose parameters.
///
/// Damped Gauss-Newton with Marquardt scaling: the normal matrix diagonal is
/// augmented by `lambda * max(diag, 1e-9)`. A step is accepted only if it
/// lowers the objective, so the cost history is non-increasing. Steps that put
/// a keypoint behind the camera, or whose system is not positive definite, are
/// rejected. The returned parameters are clamped into their boxes.
pub fn fit_pose_with<T: Scalar>(
    kp2d: &Keypoints2<T>,
    model: &HandModel<T>,
    k: &CameraIntrinsics<T>,
    init: &PoseParams<T>,
    opts: &FitOptions,
) -> Result<FitResult<T>> {
    if let Some(i) = kp2d.iter().position(|p| !p.is_finite()) {
        return Err(Error::MalformedFrame(format!("non-finite 2D keypoint {i}")));
    }
    let problem = Problem {
        obs: kp2d,
        model,
        k,
        box_weight: T::lit(opts.box_weight),
    };
    let x = init.to_vec();
    let r = match problem.residuals(&x) {
        Some(r) => r,
        None => {
            let z = forward_kinematics_unchecked(model, init)
                .iter()
                .map(|p| p.z)
                .fold(T::infinity(), T::min);
            return Err(Error::BehindCamera { z: z.as_f64() });
        }
    };
    let mut best = solve(&problem, x, r, opts);
    let mut iterations = best.iterations;
    let mut restarts = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    while restarts < opts.restarts && reprojection_rms(&problem, &best.x) > opts.restart_above_px {
        restarts += 1;
        let mut x0 = best.x;
        for (i, a) in x0[6..].iter_mut().enumerate() {
            let (lo, hi) = JointKind::of(i).range();
            let mut v = a.as_f64();
            // Mirror partners of a near-straight joint sit on the other side of zero.
            if v.abs() < 4.0 * opts.restart_spread && rng.random_bool(0.5) {
                v = -v;
            }
            *a = T::lit(
                (v + rng.random_range(-opts.restart_spread..=opts.restart_spread)).clamp(lo, hi),
            );
        }
        let Some(r0) = problem.residuals(&x0) else {
            continue;
        };
        let run = solve(&problem, x0, r0, opts);
        iterations += run.iterations;
        if run.cost < best.cost {
            best = run;
        }
    }
    let x = best.x;
    let params = PoseParams::from_vec(&x).clamped();
    let keypoints = forward_kinematics_unchecked(model, &params);
    let proj = project(&keypoints, k)?;
    let sq: T = proj
        .iter()
        .zip(kp2d)
        .map(|(a, b)| (*a - *b).dot(*a - *b))
        .sum();
    let rms_px = (sq / T::lit(NUM_KEYPOINTS as f64)).sqrt();
    if !(rms_px.as_f64() <= opts.rms_ceiling_px) {
        return Err(Error::DivergedFit {
            rms_px: rms_px.as_f64(),
            ceiling_px: opts.rms_ceiling_px,
        });
    }
    Ok(FitResult {
        params,
        keypoints,
        rms_px,
        iterations,
        restarts,
        cost_history: best.cost_history,
        lambda_history: best.lambda_history,
    })
}

fn reprojection_rms<T: Scalar>(problem: &Problem<'_, T>, x: &[T; NUM_POSE_PARAMS]) -> f64 {
    problem.residuals(x).map_or(f64::INFINITY, |r| {
        (sum_sq(&r[..2 * NUM_KEYPOINTS]).as_f64() / NUM_KEYPOINTS as f64).sqrt()
    })
}

/// One damped Gauss-Newton descent from `x` with residuals `r`.
fn solve<T: Scalar>(
    problem: &Problem<'_, T>,
    mut x: [T; NUM_POSE_PARAMS],
    mut r: Vec<T>,
    opts: &FitOptions,
) -> Solve<T> {
    let mut cost = sum_sq(&r);
    let mut lambda = opts.lambda_init.clamp(LAMBDA_MIN, LAMBDA_MAX);
    let mut cost_history = vec![cost];
    let mut lambda_history = Vec::new();
    let h = T::lit(opts.jacobian_step);
    let mut iterations = 0;

    'outer: while iterations < opts.max_iterations && cost.as_f64() > COST_FLOOR {
        iterations += 1;
        let j = problem.jacobian(&x, r.len(), h);
        let rv = DVector::from_iterator(r.len(), r.iter().map(|v| v.as_f64()));
        let jtj = j.transpose() * &j;
        let g = j.transpose() * rv;
        if g.amax() == 0.0 {
            break;
        }
        loop {
            let mut a = jtj.clone();
            for d in 0..NUM_POSE_PARAMS {
                a[(d, d)] += lambda * jtj[(d, d)].max(DIAG_FLOOR);
            }
            let trial = a.cholesky().map(|c| c.solve(&(-&g))).and_then(|delta| {
                let mut xn = x;
                for (xi, di) in xn.iter_mut().zip(delta.iter()) {
                    *xi += T::lit(*di);
                }
                problem.residuals(&xn).map(|rn| (xn, rn))
            });
            match trial {
                Some((xn, rn)) if sum_sq(&rn) < cost => {
                    let new_cost = sum_sq(&rn);
                    let rel = ((cost - new_cost) / cost).as_f64();
                    x = xn;
                    r = rn;
                    cost = new_cost;
                    cost_history.push(cost);
                    lambda = (lambda * 0.5).max(LAMBDA_MIN);
                    lambda_history.push(lambda);
                    if rel < opts.rel_tol {
                        break 'outer;
                    }
                    break;
                }
                _ => {
                    if lambda >= LAMBDA_MAX {
                        lambda_history.push(lambda);
                        break 'outer;
                    }
                    lambda = (lambda * 10.0).min(LAMBDA_MAX);
                    lambda_history.push(lambda);
                }
            }
        }
    }

    Solve {
        x,
        cost,
        iterations,
        cost_history,
        lambda_history,
    }
}

/// Starting pose from 2D keypoints alone.
///
/// Joint angles are zero. The in-plane rotation about the optical axis matches
/// the observed alignment angle to that of the projected rest pose, the depth
/// follows from `f * (model palm size) / alignment_scale`, and the wrist is
/// back-projected to that depth.
pub fn init_params_from_2d<T: Scalar>(
    kp2d: &Keypoints2<T>,
    model: &HandModel<T>,
    k: &CameraIntrinsics<T>,
) -> Result<PoseParams<T>> {
    let theta_obs = rotation_angle(kp2d)?;
    let scale_px = alignment_scale(kp2d)?;
    let unit = CameraIntrinsics {
        f: T::one(),
        cx: T::zero(),
        cy: T::zero(),
    };
    let rest = forward_kinematics_unchecked(
        model,
        &PoseParams::rest(Vec3::new(T::zero(), T::zero(), T::one())),
    );
    let rest2d = project(&rest, &unit)?;
    let theta_ref = rotation_angle(&rest2d)?;
    let palm = alignment_scale(&rest2d)?;
    let tz = (k.f * palm / scale_px)
        .max(T::lit(TZ_BOX.0 * 1.2))
        .min(T::lit(TZ_BOX.1 * 0.95));
    let wrist: Vec2<T> = kp2d[0];
    let mut p = PoseParams::rest(Vec3::new(
        (wrist.x - k.cx) * tz / k.f,
        (wrist.y - k.cy) * tz / k.f,
        tz,
    ));
    p.global_rot = Vec3::new(
        T::zero(),
        T::zero(),
        crate::scalar::wrap_angle(theta_obs - theta_ref),
    );
    Ok(p)
}

/// Fit from 2D keypoints alone, trying several starting poses.
///
/// The single start of [`init_params_from_2d`] often sits in the wrong basin:
/// a palm-facing start rarely reaches a hand seen from the back, an open hand
/// struggles to curl into a fist, and a hand seen along its fingers needs a
/// large tilt. Each start is refined once without restarts; the best is then
/// polished by [`fit_pose_with`] with `opts`.
pub fn fit_pose_from_2d<T: Scalar>(
    kp2d: &Keypoints2<T>,
    model: &HandModel<T>,
    k: &CameraIntrinsics<T>,
    opts: &FitOptions,
) -> Result<FitResult<T>> {
    let base = init_params_from_2d(kp2d, model, k)?;
    let quick = FitOptions {
        restarts: 0,
        rms_ceiling_px: f64::INFINITY,
        ..opts.clone()
    };
    // Pre-rotations act in the hand's local frame; `flip` is the fixed
    // local-to-camera axis change.
    let flip = Mat3::diag(T::one(), -T::one(), -T::one());
    let rg = Mat3::from_axis_angle(base.global_rot);
    let tilt = T::lit(1.2);
    let turn = Mat3::rot_y(T::PI());
    let pres = [
        Mat3::identity(),
        turn,
        Mat3::rot_x(tilt),
        Mat3::rot_x(-tilt),
        turn * Mat3::rot_x(tilt),
        turn * Mat3::rot_x(-tilt),
    ];
    let mut curled = [T::zero(); super::model::NUM_JOINT_ANGLES];
    for (slot, a) in curled.iter_mut().enumerate() {
        if JointKind::of(slot) == JointKind::Flexion {
            *a = T::lit(0.9);
        }
    }
    let mut best: Option<FitResult<T>> = None;
    let mut first_err = None;
    'starts: for pre in pres {
        for joints in [[T::zero(); super::model::NUM_JOINT_ANGLES], curled] {
            let mut init = base;
            init.global_rot = (rg * flip * pre * flip).to_axis_angle();
            init.joint_angles = joints;
            match fit_pose_with(kp2d, model, k, &init, &quick) {
                Ok(f) => {
                    if best.as_ref().is_none_or(|b| f.rms_px < b.rms_px) {
                        best = Some(f);
                    }
                }
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
            if best
                .as_ref()
                .is_some_and(|b| b.rms_px.as_f64() <= opts.restart_above_px)
            {
                break 'starts;
            }
        }
    }
    match best {
        Some(b) => fit_pose_with(kp2d, model, k, &b.params, opts),
        None => Err(first_err.expect("at least one start was tried")),
    }
}

/// Fill in 3D keypoints for a skeleton that only has 2D ones, in the stored
/// y-up frame with the middle knuckle at the origin.
pub fn lift_skeleton<T: Scalar>(
    skel: &HandSkeleton<T>,
    image_w: u32,
    image_h: u32,
    model: &HandModel<T>,
) -> Result<Keypoints3<T>> {
    let k = default_intrinsics(image_w, image_h);
    let model = model.with_handedness(skel.handedness);
    let fit = fit_pose_from_2d(&skel.kp2d, &model, &k, &FitOptions::default())?;
    Ok(normalize_world(&camera_to_world(&fit.keypoints)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifting::finger_joint_offset;
    use crate::skeleton::Finger;

    fn truth() -> PoseParams<f64> {
        let mut p = PoseParams::rest(Vec3::new(0.03, -0.02, 0.45));
        p.global_rot = Vec3::new(0.2, -0.3, 0.4);
        p.joint_angles[finger_joint_offset(Finger::Index)] = 0.5;
        p.joint_angles[finger_joint_offset(Finger::Ring) + 2] = 0.9;
        p.joint_angles[0] = 0.3;
        p
    }

    #[test]
    fn starting_at_the_optimum() {
        let m = HandModel::default();
        let k = default_intrinsics(640, 480);
        let p = truth();
        let obs = project(&forward_kinematics_unchecked(&m, &p), &k).unwrap();
        let fit = fit_pose(&obs, &m, &k, &p).unwrap();
        assert!(fit.iterations <= 2, "{}", fit.iterations);
        assert!(fit.rms_px <= 1e-6);
    }

    #[test]
    fn recovers_from_nearby_start() {
        let m = HandModel::default();
        let k = default_intrinsics(640, 480);
        let p = truth();
        let gt = forward_kinematics_unchecked(&m, &p);
        let obs = project(&gt, &k).unwrap();
        let mut init = p;
        init.global_rot += Vec3::new(0.05, -0.05, 0.05);
        init.global_t += Vec3::new(0.005, 0.005, 0.02);
        for a in init.joint_angles.iter_mut() {
            *a += 0.05;
        }
        let fit = fit_pose(&obs, &m, &k, &init).unwrap();
        assert!(fit.rms_px < 1e-3, "{}", fit.rms_px);
        let err: f64 = fit
            .keypoints
            .iter()
            .zip(&gt)
            .map(|(a, b)| (*a - *b).norm())
            .sum::<f64>()
            / 21.0;
        assert!(err < 0.005, "{err}");
        assert!(fit.cost_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(fit
            .lambda_history
            .iter()
            .all(|&l| (LAMBDA_MIN..=LAMBDA_MAX).contains(&l)));
    }

    #[test]
    fn init_from_2d_places_wrist_and_depth() {
        let m = HandModel::default();
        let k = default_intrinsics(640, 480);
        let mut p = PoseParams::rest(Vec3::new(0.02, 0.01, 0.6));
        p.global_rot = Vec3::new(0.0, 0.0, 0.7);
        let obs = project(&forward_kinematics_unchecked(&m, &p), &k).unwrap();
        let init: PoseParams<f64> = init_params_from_2d(&obs, &m, &k).unwrap();
        assert!((init.global_rot.z - 0.7).abs() < 1e-9);
        assert!(
            (init.global_t - p.global_t).norm() < 0.01,
            "{:?}",
            init.global_t
        );
    }

    #[test]
    fn diverged_fit_reported() {
        let m = HandModel::default();
        let k = default_intrinsics(640, 480);
        let mut obs = project(&forward_kinematics_unchecked(&m, &truth()), &k).unwrap();
        obs[8] += Vec2::new(400.0, 300.0);
        obs[20] += Vec2::new(-400.0, 250.0);
        let opts = FitOptions {
            rms_ceiling_px: 1.0,
            ..Default::default()
        };
        assert!(matches!(
            fit_pose_with(&obs, &m, &k, &truth(), &opts),
            Err(Error::DivergedFit { .. })
        ));
    }

    #[test]
    fn behind_camera_init_rejected() {
        let m = HandModel::default();
        let k = default_intrinsics(640, 480);
        let obs = project(&forward_kinematics_unchecked(&m, &truth()), &k).unwrap();
        let init = PoseParams::rest(Vec3::new(0.0, 0.0, -0.5));
        assert!(matches!(
            fit_pose(&obs, &m, &k, &init),
            Err(Error::BehindCamera { .. })
        ));
    }
}
