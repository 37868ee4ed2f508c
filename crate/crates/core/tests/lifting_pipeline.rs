//! Integration tests across the generator, lifting and the streaming pipeline.

use handgest::alignment::{alignment_scale, rotation_vector};
use handgest::features::feature_vector;
use handgest::geom::Vec3;
use handgest::harness::{
    keypoint_error, sample_rng, synth_corpus, synth_pose, GestureLabel, SynthConfig, SynthSample,
};
use handgest::heuristic::{classify_heuristic, GestureConfig};
use handgest::lifting::{
    camera_to_world, default_intrinsics, fit_pose, forward_kinematics, lift_skeleton,
    normalize_world, project, HandModel, PoseParams,
};
use handgest::pipeline::{run_stream, step, Classifier, Mode, PipelineConfig, PipelineState};
use handgest::skeleton::{HandFrame, Keypoints3};
use handgest::{Handedness, KeypointIndex};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn labels(n: usize) -> Vec<GestureLabel> {
    GestureLabel::ALL.iter().copied().cycle().take(n).collect()
}

fn bone(kp: &Keypoints3<f64>, i: usize) -> f64 {
    let p = KeypointIndex::new(i).unwrap().parent().unwrap().get();
    (kp[i] - kp[p]).norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn forward_kinematics_keeps_bone_lengths(
        rot in (-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0),
        tz in 0.2f64..1.5,
        joints in proptest::array::uniform21(0.0f64..1.0),
        left in any::<bool>(),
    ) {
        let hand = if left { Handedness::Left } else { Handedness::Right };
        let model = HandModel::<f64>::default().with_handedness(hand);
        let mut p = PoseParams::rest(Vec3::new(0.0, 0.0, tz));
        p.global_rot = Vec3::new(rot.0, rot.1, rot.2);
        // Map unit samples into each joint's box.
        for (slot, u) in joints.iter().enumerate() {
            let (lo, hi) = handgest::lifting::JointKind::of(slot).range();
            p.joint_angles[slot] = lo + u * (hi - lo);
        }
        let kp = forward_kinematics(&model, &p).unwrap();
        for i in 1..21 {
            prop_assert!((bone(&kp, i) - model.bone_lengths[i - 1]).abs() < 1e-12);
        }
        prop_assert!((kp[0] - p.global_t).norm() < 1e-12);
    }

    #[test]
    fn normalize_world_keeps_features(label in (0..GestureLabel::ALL.len()), seed in 0u64..500) {
        let s = synth_pose(GestureLabel::ALL[label], &SynthConfig::<f64>::default(), &mut sample_rng(seed, 3)).unwrap();
        let hand = s.frame.hand.unwrap().handedness;
        let world = camera_to_world(&s.camera_kp3d);
        let a = feature_vector(&world, hand).unwrap();
        let b = feature_vector(&normalize_world(&world), hand).unwrap();
        for (x, y) in a.to_array().iter().zip(b.to_array().iter()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn noisy_samples_stay_consistent_with_their_pose() {
    let cfg = SynthConfig::<f64> {
        seed: 9,
        noise_px: 1.5,
        noise_m: 0.002,
        ..Default::default()
    };
    let corpus = synth_corpus(&cfg, &labels(400)).unwrap();
    let k = default_intrinsics(cfg.image_w, cfg.image_h);
    for s in &corpus {
        let h = s.frame.hand.as_ref().unwrap();
        let proj = project(&s.camera_kp3d, &k).unwrap();
        // Gaussian noise: 6 sigma per coordinate is never reached in practice.
        for (a, b) in proj.iter().zip(&h.kp2d) {
            assert!(
                (a.x - b.x).abs() < 6.0 * cfg.noise_px && (a.y - b.y).abs() < 6.0 * cfg.noise_px
            );
        }
        let clean = normalize_world(&camera_to_world(&s.camera_kp3d));
        for (a, b) in clean.iter().zip(h.kp3d.as_ref().unwrap()) {
            assert!((*a - *b).norm() < 6.0 * 3f64.sqrt() * cfg.noise_m);
        }
    }
}

#[test]
fn heuristic_recognizes_generated_gestures() {
    let cfg = SynthConfig::<f64> {
        seed: 31,
        ..Default::default()
    };
    let targets: Vec<GestureLabel> = GestureLabel::ALL
        .iter()
        .copied()
        .filter(|l| l.is_target())
        .collect();
    let gestures = GestureConfig::default();
    for label in targets {
        let corpus = synth_corpus(&cfg, &[label; 200]).unwrap();
        let hits = corpus
            .iter()
            .filter(|s| {
                let h = s.frame.hand.as_ref().unwrap();
                classify_heuristic(
                    &feature_vector(h.kp3d.as_ref().unwrap(), h.handedness).unwrap(),
                    &gestures,
                ) == label.name()
            })
            .count();
        assert!(hits >= 190, "{label}: {hits}/200");
    }
}

fn non_degenerate_fraction(corpus: &[SynthSample<f64>]) -> f64 {
    let ok = corpus
        .iter()
        .filter(|s| {
            let kp = &s.frame.hand.as_ref().unwrap().kp2d;
            rotation_vector(kp).is_ok_and(|v| v.norm() >= 0.05 * alignment_scale(kp).unwrap())
        })
        .count();
    ok as f64 / corpus.len() as f64
}

#[test]
fn alignment_vector_is_non_degenerate() {
    let frontal = synth_corpus(
        &SynthConfig::<f64> {
            seed: 5,
            ..SynthConfig::frontal()
        },
        &labels(3000),
    )
    .unwrap();
    assert_eq!(non_degenerate_fraction(&frontal), 1.0);
    let general = synth_corpus(
        &SynthConfig::<f64> {
            seed: 6,
            ..Default::default()
        },
        &labels(3000),
    )
    .unwrap();
    assert!(non_degenerate_fraction(&general) >= 0.999);
}

#[test]
fn depth_absorbs_a_uniform_bone_scale() {
    let cfg = SynthConfig::<f64> {
        seed: 12,
        ..Default::default()
    };
    let k = default_intrinsics(cfg.image_w, cfg.image_h);
    for s in synth_corpus(&cfg, &labels(20)).unwrap() {
        let h = s.frame.hand.unwrap();
        let base = HandModel::<f64>::default().with_handedness(h.handedness);
        let big = base.scaled(1.2);
        // Both fits start from the generating pose; the larger hand has to
        // move away from the camera to explain the same image. Thumb roll is
        // barely observable when the thumb is nearly straight, so the descent
        // can stall a few hundredths of a pixel short of the exact optimum.
        let fit = |m: &HandModel<f64>| fit_pose(&h.kp2d, m, &k, &s.params).unwrap();
        let (a, b) = (fit(&base), fit(&big));
        assert!(
            (a.rms_px - b.rms_px).abs() < 0.05,
            "rms {} {}",
            a.rms_px,
            b.rms_px
        );
        let ratio = b.params.global_t.z / a.params.global_t.z;
        assert!((ratio - 1.2).abs() < 2e-3, "depth ratio {ratio}");
    }
}

#[test]
fn lifting_from_2d_alone_recovers_the_pose() {
    for cfg in [
        SynthConfig::<f64> {
            seed: 41,
            ..Default::default()
        },
        SynthConfig::<f64> {
            seed: 42,
            ..SynthConfig::frontal()
        },
    ] {
        let corpus = synth_corpus(&cfg, &labels(44)).unwrap();
        let model = HandModel::default();
        let mut total = 0.0;
        for s in &corpus {
            let h = s.frame.hand.as_ref().unwrap();
            let lifted = lift_skeleton(h, cfg.image_w, cfg.image_h, &model).unwrap();
            total += keypoint_error(&lifted, h.kp3d.as_ref().unwrap());
        }
        let mean_cm = total / corpus.len() as f64;
        assert!(mean_cm < 0.5, "mean keypoint error {mean_cm} cm");
    }
}

fn stream(seed: u64, n: usize) -> Vec<HandFrame<f64>> {
    let cfg = SynthConfig::<f64> {
        seed,
        ..Default::default()
    };
    let corpus = synth_corpus(&cfg, &labels(n)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0i64;
    corpus
        .into_iter()
        .map(|s| {
            let mut f = s.frame;
            t += rng.random_range(1..80_000);
            f.timestamp_us = t;
            match rng.random_range(0..10) {
                0..=2 => f.hand = None,
                3 => f.hand.as_mut().unwrap().score = rng.random_range(0.0..0.5),
                _ => {}
            }
            f
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn stream_obeys_the_state_machine(seed in 0u64..10_000, hz in 1.0f64..30.0, loss in 1u32..6) {
        let frames = stream(seed, 120);
        let mut cfg = PipelineConfig::new(Classifier::Heuristic(GestureConfig::<f64>::default()));
        cfg.max_detect_hz = hz;
        cfg.track_loss_frames = loss;
        let (outs, stats) = run_stream(&frames, &cfg).unwrap();

        let mut state = PipelineState::default();
        let mut last_detect: Option<i64> = None;
        for (f, o) in frames.iter().zip(&outs) {
            let prev = state.mode;
            let (next, again) = step(&state, f, &cfg).unwrap();
            prop_assert_eq!(&again, o);
            state = next;
            if o.classify {
                prop_assert!(o.detect || prev == Mode::Tracked);
                prop_assert!(o.label.is_some());
            }
            if o.detect {
                prop_assert_eq!(prev, Mode::Untracked);
                if let Some(l) = last_detect {
                    prop_assert!((o.t_us - l) as f64 >= cfg.detect_period_us());
                }
                last_detect = Some(o.t_us);
            }
        }
        prop_assert_eq!(state.stats, stats);
        prop_assert_eq!(stats.frames, frames.len() as u64);
        prop_assert_eq!(stats.tracked_frames + stats.untracked_frames, stats.frames);
        prop_assert_eq!(stats.classify_invocations, outs.iter().filter(|o| o.classify).count() as u64);
    }
}
