//! Template-driven synthetic hand poses.
//!
//! Each sample draws a joint-angle template for its label, adds independent
//! Gaussian jitter to every joint angle (clamped to the joint boxes), draws a
//! global orientation around the template's base orientation and a depth,
//! then runs forward kinematics and projection. Sample `i` of a corpus uses
//! its own ChaCha8 stream, so serial and parallel generation agree exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{rotation_from_euler, EulerAngles};
use crate::geom::{Vec2, Vec3};
use crate::lifting::{
    camera_rotation_from_world, camera_to_world, default_intrinsics, forward_kinematics,
    normalize_world, project, HandModel, JointKind, PoseParams, NUM_JOINT_ANGLES, TZ_BOX,
};
use crate::scalar::Scalar;
use crate::skeleton::{HandFrame, HandSkeleton, Handedness, Keypoints3};

use super::GestureLabel;

/// Spacing of corpus timestamps (30 fps).
pub const FRAME_INTERVAL_US: i64 = 33_333;

#[derive(Clone, Debug, PartialEq)]
pub struct GestureTemplate<T> {
    pub label: GestureLabel,
    /// Joint angles in the [`PoseParams::joint_angles`] layout (rad).
    pub joint_angles: [T; NUM_JOINT_ANGLES],
    /// World-frame orientation of a right hand before perturbation.
    pub base: EulerAngles<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig<T> {
    pub seed: u64,
    /// Several templates may share a label; one is picked uniformly per sample.
    pub templates: Vec<GestureTemplate<T>>,
    /// Standard deviation of the per-joint Gaussian jitter (rad).
    pub jitter_std: T,
    /// Half-widths of the uniform orientation perturbation (rad).
    pub yaw_range: T,
    pub pitch_range: T,
    pub roll_range: T,
    /// Added to every template's base roll; a quarter turn looks along the fingers.
    pub roll_offset: T,
    /// Wrist depth range (m).
    pub tz_range: (T, T),
    pub image_w: u32,
    pub image_h: u32,
    /// Gaussian noise on the 2D keypoints (px) and on the stored 3D keypoints (m).
    pub noise_px: T,
    pub noise_m: T,
    /// Probability that a sample is a left hand.
    pub left_fraction: T,
    pub hand_model: HandModel<T>,
}

impl<T: Scalar> Default for SynthConfig<T> {
    fn default() -> Self {
        let deg = |d: f64| T::lit(d.to_radians());
        Self {
            seed: 0,
            templates: default_templates(),
            jitter_std: deg(5.0),
            yaw_range: deg(25.0),
            pitch_range: deg(30.0),
            roll_range: deg(30.0),
            roll_offset: T::zero(),
            tz_range: (T::lit(0.35), T::lit(0.8)),
            image_w: 640,
            image_h: 480,
            noise_px: T::zero(),
            noise_m: T::zero(),
            left_fraction: T::lit(0.5),
            hand_model: HandModel::default(),
        }
    }
}

impl<T: Scalar> SynthConfig<T> {
    /// Hands seen along their own finger direction: base roll turned a quarter
    /// turn, fingers within about 18 degrees of the line of sight (roll spread
    /// 10 degrees, pitch spread 15 degrees), yaw over the full circle.
    pub fn frontal() -> Self {
        let deg = |d: f64| T::lit(d.to_radians());
        Self {
            roll_offset: deg(90.0),
            roll_range: deg(10.0),
            pitch_range: deg(15.0),
            yaw_range: deg(180.0),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            self.jitter_std,
            self.yaw_range,
            self.pitch_range,
            self.roll_range,
            self.noise_px,
            self.noise_m,
        ];
        if !nonneg.iter().all(|&v| v >= T::zero() && v.is_finite()) {
            return Err(Error::InvalidConfig(
                "jitter, ranges and noise must be finite and >= 0".into(),
            ));
        }
        let (lo, hi) = self.tz_range;
        if !(lo > T::lit(TZ_BOX.0) && lo <= hi && hi < T::lit(TZ_BOX.1)) {
            return Err(Error::InvalidConfig(
                "tz_range must lie inside the depth box".into(),
            ));
        }
        if !(self.left_fraction >= T::zero() && self.left_fraction <= T::one()) {
            return Err(Error::InvalidConfig(
                "left_fraction must be in [0, 1]".into(),
            ));
        }
        if self.image_w == 0 || self.image_h == 0 {
            return Err(Error::InvalidConfig("image size must be positive".into()));
        }
        for label in GestureLabel::ALL
            .into_iter()
            .filter(|&l| l != GestureLabel::Negative)
        {
            if !self.templates.iter().any(|t| t.label == label) {
                return Err(Error::InvalidConfig(format!("no template for {label}")));
            }
        }
        Ok(())
    }
}

/// One generated pose with everything needed to check it.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthSample<T> {
    /// kp2d in pixels; kp3d in the stored y-up frame, middle knuckle at the origin.
    pub frame: HandFrame<T>,
    pub label: GestureLabel,
    pub params: PoseParams<T>,
    /// Noise-free camera-frame keypoints (m).
    pub camera_kp3d: Keypoints3<T>,
}

/// Independent generator for sample `index` of a corpus.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn gauss<R: Rng + ?Sized>(rng: &mut R, std: f64) -> f64 {
    if std == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, std).expect("finite std").sample(rng)
}

/// Draw one pose of `label`. Fails with [`Error::UnknownLabel`] when the
/// configuration has no template for it.
pub fn synth_pose<T: Scalar, R: Rng + ?Sized>(
    label: GestureLabel,
    cfg: &SynthConfig<T>,
    rng: &mut R,
) -> Result<SynthSample<T>> {
    let candidates: Vec<&GestureTemplate<T>> =
        cfg.templates.iter().filter(|t| t.label == label).collect();
    if candidates.is_empty() {
        return Err(Error::UnknownLabel(label.name().to_string()));
    }
    let tpl = candidates[rng.random_range(0..candidates.len())];
    let handedness = if rng.random::<f64>() < cfg.left_fraction.as_f64() {
        Handedness::Left
    } else {
        Handedness::Right
    };

    let jitter = cfg.jitter_std.as_f64();
    let joint_angles: [T; NUM_JOINT_ANGLES] = std::array::from_fn(|i| {
        let (lo, hi) = JointKind::of(i).range();
        T::lit((tpl.joint_angles[i].as_f64() + gauss(rng, jitter)).clamp(lo, hi))
    });

    let mut spread = |range: T| T::lit(rng.random_range(-1.0..=1.0)) * range;
    let mut euler = EulerAngles::new(
        tpl.base.yaw + spread(cfg.yaw_range),
        tpl.base.pitch + spread(cfg.pitch_range),
        tpl.base.roll + cfg.roll_offset + spread(cfg.roll_range),
    );
    if handedness == Handedness::Left {
        euler = EulerAngles::new(-euler.yaw, -euler.pitch, euler.roll);
    }
    let r_cam = camera_rotation_from_world(&rotation_from_euler(euler));

    let (tz_lo, tz_hi) = (cfg.tz_range.0.as_f64(), cfg.tz_range.1.as_f64());
    let tz = if tz_hi > tz_lo {
        rng.random_range(tz_lo..tz_hi)
    } else {
        tz_lo
    };
    let tx = rng.random_range(-0.15..0.15) * tz;
    let ty = rng.random_range(-0.1..0.1) * tz;
    let params = PoseParams {
        global_rot: r_cam.to_axis_angle(),
        global_t: Vec3::new(T::lit(tx), T::lit(ty), T::lit(tz)),
        joint_angles,
    };
    let model = cfg.hand_model.with_handedness(handedness);
    let camera_kp3d = forward_kinematics(&model, &params)?;
    let k = default_intrinsics(cfg.image_w, cfg.image_h);
    let (npx, nm) = (cfg.noise_px.as_f64(), cfg.noise_m.as_f64());
    let kp2d = project(&camera_kp3d, &k)?
        .map(|p| p + Vec2::new(T::lit(gauss(rng, npx)), T::lit(gauss(rng, npx))));
    let kp3d = normalize_world(&camera_to_world(&camera_kp3d)).map(|p| {
        p + Vec3::new(
            T::lit(gauss(rng, nm)),
            T::lit(gauss(rng, nm)),
            T::lit(gauss(rng, nm)),
        )
    });
    let frame = HandFrame {
        timestamp_us: 0,
        image_w: cfg.image_w,
        image_h: cfg.image_h,
        hand: Some(HandSkeleton {
            kp2d,
            kp3d: Some(kp3d),
            handedness,
            score: T::one(),
        }),
    };
    Ok(SynthSample {
        frame,
        label,
        params,
        camera_kp3d,
    })
}

/// Generate one sample per entry of `labels`, in parallel; sample `i` gets
/// timestamp `i * 33333` us and generator [`sample_rng`]`(cfg.seed, i)`.
pub fn synth_corpus<T: Scalar>(
    cfg: &SynthConfig<T>,
    labels: &[GestureLabel],
) -> Result<Vec<SynthSample<T>>> {
    cfg.validate()?;
    labels
        .par_iter()
        .enumerate()
        .map(|(i, &label)| {
            let mut s = synth_pose(label, cfg, &mut sample_rng(cfg.seed, i as u64))?;
            s.frame.timestamp_us = i as i64 * FRAME_INTERVAL_US;
            Ok(s)
        })
        .collect()
}

type FingerDeg = [f64; 4];
type ThumbDeg = [f64; 5];

const THUMB_STRAIGHT: ThumbDeg = [0.0, 0.0, 0.0, 0.0, 0.0];
const THUMB_FOLDED: ThumbDeg = [35.0, 0.0, 50.0, 50.0, 0.0];
const THUMB_HALF: ThumbDeg = [15.0, 0.0, 20.0, 15.0, 0.0];
const FIST: FingerDeg = [80.0, 0.0, 95.0, 50.0];
const CURVED: FingerDeg = [25.0, 0.0, 30.0, 15.0];

const fn straight(abd: f64) -> FingerDeg {
    [0.0, abd, 0.0, 0.0]
}

fn template<T: Scalar>(
    label: GestureLabel,
    thumb: ThumbDeg,
    fingers: [FingerDeg; 4],
    yaw_deg: f64,
) -> GestureTemplate<T> {
    let mut deg = [0.0; NUM_JOINT_ANGLES];
    deg[..5].copy_from_slice(&thumb);
    for (i, f) in fingers.iter().enumerate() {
        deg[5 + 4 * i..9 + 4 * i].copy_from_slice(f);
    }
    GestureTemplate {
        label,
        joint_angles: deg.map(|d| T::lit(d.to_radians())),
        base: EulerAngles::new(T::lit(yaw_deg.to_radians()), T::zero(), T::zero()),
    }
}

/// Built-in templates for all 21 named gestures plus two hard negatives
/// (Victory with crossed fingers, ThumbUp with the index half extended).
pub fn default_templates<T: Scalar>() -> Vec<GestureTemplate<T>> {
    use GestureLabel as G;
    let open = [straight(9.5), straight(-9.5), straight(0.0), straight(-8.0)];
    let together = [straight(-8.0), straight(8.0), FIST, FIST];
    vec![
        template(G::OpenPalm, THUMB_STRAIGHT, open, 0.0),
        template(
            G::Victory,
            THUMB_FOLDED,
            [straight(12.0), straight(-12.0), FIST, FIST],
            0.0,
        ),
        template(G::ClosedFist, THUMB_FOLDED, [FIST; 4], 0.0),
        template(
            G::PointingUp,
            THUMB_FOLDED,
            [straight(0.0), FIST, FIST, FIST],
            0.0,
        ),
        template(G::ThumbUp, THUMB_STRAIGHT, [FIST; 4], 90.0),
        template(G::ThumbDown, THUMB_STRAIGHT, [FIST; 4], -90.0),
        template(
            G::OK,
            [20.0, 0.0, 25.0, 20.0, 0.0],
            [
                [30.0, 0.0, 40.0, 30.0],
                straight(-5.0),
                straight(0.0),
                straight(-5.0),
            ],
            0.0,
        ),
        template(
            G::CallMe,
            THUMB_STRAIGHT,
            [FIST, FIST, FIST, straight(0.0)],
            0.0,
        ),
        template(G::IndexMiddlePointingUp, THUMB_HALF, together, 0.0),
        template(
            G::Three,
            THUMB_FOLDED,
            [straight(9.5), straight(-2.0), straight(-2.0), FIST],
            0.0,
        ),
        template(G::Four, THUMB_FOLDED, open, 0.0),
        template(
            G::ILoveYou,
            THUMB_STRAIGHT,
            [straight(0.0), FIST, FIST, straight(0.0)],
            0.0,
        ),
        template(
            G::FingerHeart,
            [15.0, 0.0, 15.0, 15.0, 0.0],
            [[45.0, 0.0, 30.0, 10.0], FIST, FIST, FIST],
            0.0,
        ),
        template(G::HandHeart, THUMB_HALF, [CURVED; 4], 0.0),
        template(
            G::IndexMiddlePointingUpWithClosedThumb,
            THUMB_FOLDED,
            together,
            0.0,
        ),
        template(
            G::IndexMiddlePointingUpWithOpenThumb,
            THUMB_STRAIGHT,
            together,
            0.0,
        ),
        template(
            G::IndexPointingToCamera,
            THUMB_HALF,
            [[65.0, 0.0, 0.0, 0.0], FIST, FIST, FIST],
            0.0,
        ),
        template(
            G::Loser,
            THUMB_STRAIGHT,
            [straight(0.0), FIST, FIST, FIST],
            0.0,
        ),
        template(
            G::PinchedFingers,
            THUMB_HALF,
            [[30.0, 0.0, 25.0, 10.0]; 4],
            0.0,
        ),
        template(
            G::VulcanSalute,
            THUMB_STRAIGHT,
            [straight(-8.0), straight(8.0), straight(-6.0), straight(6.0)],
            0.0,
        ),
        template(
            G::SignOfTheHorns,
            THUMB_FOLDED,
            [straight(0.0), FIST, FIST, straight(0.0)],
            0.0,
        ),
        template(
            G::Negative,
            THUMB_FOLDED,
            [straight(-10.0), straight(10.0), FIST, FIST],
            0.0,
        ),
        template(
            G::Negative,
            THUMB_STRAIGHT,
            [CURVED, FIST, FIST, FIST],
            90.0,
        ),
    ]
}
