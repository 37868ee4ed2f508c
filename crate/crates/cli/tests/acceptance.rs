//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use handgest::alignment::{alignment_scale, rotation_vector};
use handgest::features::{euler_from_rotation, feature_vector, rotation_from_euler, EulerAngles};
use handgest::geom::{Mat3, Vec3};
use handgest::harness::{
    eval_classifier, keypoint_error, synth_corpus, GestureLabel, SynthConfig, SynthSample,
};
use handgest::heuristic::{classify_heuristic, GestureConfig};
use handgest::lifting::{
    camera_to_world, default_intrinsics, fit_pose, project, HandModel, JointKind, PoseParams,
};
use handgest::nn::{
    calibrate_threshold, classify_nn, focal_loss, gradient_check, train, LabeledExample, MlpModel,
    NnClass, TrainConfig, HIDDEN_WIDTHS, NUM_CLASSES,
};
use handgest::pipeline::{run_stream, Classifier, PipelineConfig};
use handgest::skeleton::{HandFrame, HandSkeleton, Keypoints3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn labels_cycle(labels: &[GestureLabel], n_each: usize) -> Vec<GestureLabel> {
    (0..n_each).flat_map(|_| labels.iter().copied()).collect()
}

fn hand(s: &SynthSample<f64>) -> &HandSkeleton<f64> {
    s.frame
        .hand
        .as_ref()
        .expect("synthetic frames carry a hand")
}

fn random_rotation(rng: &mut impl Rng) -> Mat3<f64> {
    // Uniform unit quaternion from four normals, converted to axis-angle.
    let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (w, v) = (q[0] / n, Vec3::new(q[1] / n, q[2] / n, q[3] / n));
    let s = v.norm();
    if s < 1e-12 {
        return Mat3::identity();
    }
    let angle = 2.0 * s.atan2(w);
    Mat3::from_axis_angle(v * (angle / s))
}

fn c1_alignment() -> Outcome {
    let start = Instant::now();
    let cfg = SynthConfig::<f64> {
        seed: 101,
        ..SynthConfig::frontal()
    };
    let labels =
        labels_cycle(&GestureLabel::ALL, 10_000 / GestureLabel::ALL.len() + 1)[..10_000].to_vec();
    let corpus = synth_corpus(&cfg, &labels).map_err(|e| e.to_string())?;
    let (mut ok, mut naive_bad) = (0usize, 0usize);
    for s in &corpus {
        let kp = &hand(s).kp2d;
        let Ok(scale) = alignment_scale(kp) else {
            continue;
        };
        if rotation_vector(kp).is_ok_and(|v| v.norm() >= 0.05 * scale) {
            ok += 1;
        }
        if (kp[0] - kp[9]).norm() < 0.05 * scale {
            naive_bad += 1;
        }
    }
    let frac = ok as f64 / corpus.len() as f64;
    let el = start.elapsed();
    check(
        frac >= 0.999 && naive_bad > 0 && within(el, 10.0),
        format!(
            "non-degenerate {:.4}%, naive vector degenerate on {naive_bad} samples, {:.2}s",
            100.0 * frac,
            el.as_secs_f64()
        ),
    )
}

fn c2_invariance() -> Outcome {
    let start = Instant::now();
    let cfg = SynthConfig::<f64> {
        seed: 202,
        ..Default::default()
    };
    let labels =
        labels_cycle(&GestureLabel::ALL, 1000 / GestureLabel::ALL.len() + 1)[..1000].to_vec();
    let corpus = synth_corpus(&cfg, &labels).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst, mut min_euler_change) = (0.0f64, f64::INFINITY);
    for s in &corpus {
        let h = hand(s);
        let kp = h.kp3d.unwrap();
        let r = random_rotation(&mut rng);
        let t = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let sc: f64 = rng.random_range(0.2..5.0);
        let moved: Keypoints3<f64> = kp.map(|p| r * p * sc + t);
        let a = feature_vector(&kp, h.handedness).map_err(|e| e.to_string())?;
        let b = feature_vector(&moved, h.handedness).map_err(|e| e.to_string())?;
        for (x, y) in a
            .finger_angles
            .iter()
            .chain(&a.pair_angles)
            .zip(b.finger_angles.iter().chain(&b.pair_angles))
        {
            worst = worst.max((x - y).abs());
        }
        let ra = rotation_from_euler(a.euler);
        let rb = rotation_from_euler(b.euler);
        min_euler_change = min_euler_change.min(ra.frobenius_distance(&rb));
    }
    let el = start.elapsed();
    check(
        worst <= 1e-9 && min_euler_change > 1e-6 && within(el, 5.0),
        format!("max intrinsic change {worst:.2e} rad, min orientation change {min_euler_change:.2e}, {:.2}s", el.as_secs_f64()),
    )
}

fn c3_euler_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut locked = 0;
    let round =
        |r: &Mat3<f64>| rotation_from_euler(euler_from_rotation(r).angles).frobenius_distance(r);
    for i in 0..10_000 {
        let r = if i % 10 == 0 {
            // Forced gimbal lock: pitch at (or within 1e-9 of) +-90 degrees.
            let sign = if i % 20 == 0 { 1.0 } else { -1.0 };
            let pitch = sign * (std::f64::consts::FRAC_PI_2 - if i % 40 < 20 { 0.0 } else { 1e-9 });
            let e = EulerAngles::new(
                rng.random_range(-3.0..3.0),
                pitch,
                rng.random_range(-3.0..3.0),
            );
            rotation_from_euler(e)
        } else {
            random_rotation(&mut rng)
        };
        if euler_from_rotation(&r).gimbal_lock {
            locked += 1;
        }
        worst = worst.max(round(&r));
    }
    check(
        worst <= 1e-8 && locked > 0,
        format!("max Frobenius error {worst:.2e}, {locked} gimbal-locked cases"),
    )
}

fn heuristic_label(cfg: &GestureConfig<f64>, s: &SynthSample<f64>) -> NnClass {
    let h = hand(s);
    let fv = feature_vector(h.kp3d.as_ref().unwrap(), h.handedness);
    fv.map_or(NnClass::Negative, |fv| {
        NnClass::from_name(classify_heuristic(&fv, cfg)).unwrap_or(NnClass::Negative)
    })
}

fn c4_heuristic() -> Outcome {
    let start = Instant::now();
    let cfg = SynthConfig::<f64> {
        seed: 404,
        ..Default::default()
    };
    let mut labels = labels_cycle(&GestureLabel::TARGETS, 500);
    labels.extend(labels_cycle(
        &GestureLabel::named_negatives().collect::<Vec<_>>(),
        500,
    ));
    let corpus = synth_corpus(&cfg, &labels).map_err(|e| e.to_string())?;
    let gc = GestureConfig::default();
    let preds: Vec<NnClass> = corpus.iter().map(|s| heuristic_label(&gc, s)).collect();
    let truths: Vec<NnClass> = corpus.iter().map(|s| s.label.nn_class()).collect();
    let r = eval_classifier(&preds, &truths).map_err(|e| e.to_string())?;
    let recalls: Vec<f64> = r.recall.iter().map(|x| x.unwrap_or(0.0)).collect();
    let min_recall = recalls.iter().copied().fold(1.0, f64::min);
    let fpr = r.false_positive_rate.unwrap_or(1.0);
    let el = start.elapsed();
    let detail = NnClass::GESTURES
        .iter()
        .zip(&recalls)
        .map(|(c, x)| format!("{c} {:.1}%", 100.0 * x))
        .collect::<Vec<_>>()
        .join(", ");
    check(
        min_recall >= 0.95 && fpr <= 0.02 && within(el, 30.0),
        format!(
            "recall [{detail}], FPR {:.2}%, {:.2}s",
            100.0 * fpr,
            el.as_secs_f64()
        ),
    )
}

fn examples(corpus: &[SynthSample<f64>]) -> Vec<LabeledExample<f64>> {
    corpus
        .iter()
        .filter_map(|s| {
            let h = hand(s);
            let fv = feature_vector(h.kp3d.as_ref().unwrap(), h.handedness).ok()?;
            Some(LabeledExample {
                features: fv,
                label: s.label.nn_class(),
            })
        })
        .collect()
}

fn all_negative_labels() -> Vec<GestureLabel> {
    let mut v: Vec<GestureLabel> = GestureLabel::named_negatives().collect();
    v.push(GestureLabel::Negative);
    v
}

fn c5_nn() -> Outcome {
    // (a) gradient check on random standard-architecture models and examples.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_grad = 0.0f64;
    for _ in 0..100 {
        let mut model = MlpModel::<f64>::he_uniform(&HIDDEN_WIDTHS, &mut rng);
        model.feat_mean = std::array::from_fn(|_| rng.random_range(-0.5..0.5));
        model.feat_std = std::array::from_fn(|_| rng.random_range(0.5..2.0));
        let feats: [f64; 12] = std::array::from_fn(|_| rng.random_range(-1.5..1.5));
        let ex = LabeledExample {
            features: handgest::features::FeatureVector::from_array(&feats),
            label: NnClass::ALL[rng.random_range(0..NUM_CLASSES)],
        };
        let gamma = rng.random_range(0.0..3.0);
        let alpha: [f64; NUM_CLASSES] = std::array::from_fn(|_| rng.random_range(0.25..2.0));
        worst_grad = worst_grad.max(gradient_check(&model, &ex, gamma, &alpha));
    }
    // (b) gamma = 0 reduces to cross-entropy.
    let mut worst_ce = 0.0f64;
    for _ in 0..1000 {
        let raw: [f64; NUM_CLASSES] = std::array::from_fn(|_| rng.random_range(1e-3..1.0));
        let sum: f64 = raw.iter().sum();
        let p = raw.map(|v| v / sum);
        let y = rng.random_range(0..NUM_CLASSES);
        worst_ce = worst_ce.max((focal_loss(&p, y, 0.0, &[1.0; NUM_CLASSES]) + p[y].ln()).abs());
    }
    // (c) train, calibrate on held-out negatives, evaluate on a third split.
    let train_cfg = SynthConfig::<f64> {
        seed: 5001,
        ..Default::default()
    };
    let mut labels = labels_cycle(&GestureLabel::TARGETS, 834);
    labels.extend(labels_cycle(&all_negative_labels(), 5000 / 16 + 1));
    labels.truncate(10_000);
    let train_set = examples(&synth_corpus(&train_cfg, &labels).map_err(|e| e.to_string())?);
    let start = Instant::now();
    let out = train(
        &train_set,
        &TrainConfig {
            seed: 5,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let train_time = start.elapsed();
    let mut model = out.model;

    let cal_cfg = SynthConfig::<f64> {
        seed: 5002,
        ..Default::default()
    };
    let cal = examples(
        &synth_corpus(&cal_cfg, &labels_cycle(&all_negative_labels(), 200))
            .map_err(|e| e.to_string())?,
    );
    let cal: Vec<_> = cal
        .into_iter()
        .map(|e| LabeledExample {
            label: NnClass::Negative,
            ..e
        })
        .collect();
    model.tau = calibrate_threshold(&model, &cal, 0.01).map_err(|e| e.to_string())?;
    let cal_fp = cal
        .iter()
        .filter(|e| classify_nn(&model, &e.features).is_ok_and(|c| c.is_gesture()))
        .count();
    let cal_fpr = cal_fp as f64 / cal.len() as f64;

    let test_cfg = SynthConfig::<f64> {
        seed: 5003,
        ..Default::default()
    };
    let mut test_labels = labels_cycle(&GestureLabel::TARGETS, 500);
    test_labels.extend(labels_cycle(&all_negative_labels(), 200));
    let test = examples(&synth_corpus(&test_cfg, &test_labels).map_err(|e| e.to_string())?);
    let preds: Vec<NnClass> = test
        .iter()
        .map(|e| classify_nn(&model, &e.features).unwrap_or(NnClass::Negative))
        .collect();
    let truths: Vec<NnClass> = test.iter().map(|e| e.label).collect();
    let r = eval_classifier(&preds, &truths).map_err(|e| e.to_string())?;
    let avg = r.average_recall.unwrap_or(0.0);
    check(
        worst_grad <= 1e-4 && worst_ce <= 1e-12 && avg >= 0.90 && cal_fpr <= 0.01 && within(train_time, 300.0),
        format!(
            "grad check {worst_grad:.2e}, CE gap {worst_ce:.1e}, held-out average recall {:.1}% (held-out FPR {:.2}%), calibration FPR {:.2}%, training {:.1}s",
            100.0 * avg,
            100.0 * r.false_positive_rate.unwrap_or(0.0),
            100.0 * cal_fpr,
            train_time.as_secs_f64()
        ),
    )
}

fn perturbed(truth: &PoseParams<f64>, rng: &mut impl Rng) -> PoseParams<f64> {
    let mut p = *truth;
    for a in [
        &mut p.global_rot.x,
        &mut p.global_rot.y,
        &mut p.global_rot.z,
    ] {
        *a += rng.random_range(-0.05..0.05);
    }
    for a in [&mut p.global_t.x, &mut p.global_t.y, &mut p.global_t.z] {
        *a += rng.random_range(-0.01..0.01);
    }
    for (i, a) in p.joint_angles.iter_mut().enumerate() {
        let (lo, hi) = JointKind::of(i).range();
        *a = (*a + rng.random_range(-0.05..0.05)).clamp(lo, hi);
    }
    p
}

fn c6_lifting() -> Outcome {
    let start = Instant::now();
    let cfg = SynthConfig::<f64> {
        seed: 606,
        ..Default::default()
    };
    let labels = labels_cycle(&GestureLabel::ALL, 10)[..200].to_vec();
    let corpus = synth_corpus(&cfg, &labels).map_err(|e| e.to_string())?;
    let k = default_intrinsics(cfg.image_w, cfg.image_h);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut err_cm, mut worst_rms, mut worst_noisy, mut monotone) = (0.0, 0.0f64, 0.0f64, 0usize);
    let mut runs = 0usize;
    for s in &corpus {
        let model: HandModel<f64> = cfg.hand_model.with_handedness(hand(s).handedness);
        let init = perturbed(&s.params, &mut rng);
        let clean = project(&s.camera_kp3d, &k).map_err(|e| e.to_string())?;
        let noisy = clean.map(|p| {
            p + handgest::geom::Vec2::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        for (obs, is_clean) in [(clean, true), (noisy, false)] {
            let fit = fit_pose(&obs, &model, &k, &init).map_err(|e| e.to_string())?;
            runs += 1;
            if fit.cost_history.windows(2).all(|w| w[1] <= w[0]) {
                monotone += 1;
            }
            if is_clean {
                err_cm += keypoint_error(
                    &camera_to_world(&fit.keypoints),
                    &camera_to_world(&s.camera_kp3d),
                );
                worst_rms = worst_rms.max(fit.rms_px);
            } else {
                worst_noisy = worst_noisy.max(fit.rms_px);
            }
        }
    }
    let mean_mm = 10.0 * err_cm / corpus.len() as f64;
    let el = start.elapsed();
    check(
        mean_mm <= 5.0 && worst_rms <= 1e-3 && worst_noisy <= 2.0 && monotone == runs && within(el, 120.0),
        format!(
            "mean 3D error {mean_mm:.3} mm, max clean RMS {worst_rms:.2e} px, max 1px-noise RMS {worst_noisy:.3} px, monotone {monotone}/{runs}, {:.2}s",
            el.as_secs_f64()
        ),
    )
}

fn c7_intrinsics() -> Outcome {
    let table: [(u32, u32); 20] = [
        (640, 480),
        (480, 640),
        (1280, 720),
        (720, 1280),
        (1920, 1080),
        (1080, 1920),
        (256, 256),
        (1, 1),
        (3, 5),
        (4000, 3000),
        (3840, 2160),
        (320, 240),
        (800, 600),
        (1024, 768),
        (1366, 768),
        (2560, 1440),
        (1080, 1080),
        (641, 479),
        (7, 2),
        (192, 256),
    ];
    let mut bad = Vec::new();
    for (w, h) in table {
        let k = default_intrinsics::<f64>(w, h);
        let (f, cx, cy) = (w.max(h) as f64, w as f64 / 2.0, h as f64 / 2.0);
        if k.f != f || k.cx != cx || k.cy != cy {
            bad.push(format!("{w}x{h}"));
        }
    }
    check(
        bad.is_empty(),
        format!("{} resolutions, mismatches: {:?}", table.len(), bad),
    )
}

fn c8_pipeline() -> Outcome {
    let start = Instant::now();
    let sample = &synth_corpus(&SynthConfig::<f64>::default(), &[GestureLabel::Victory])
        .map_err(|e| e.to_string())?[0];
    let skel = hand(sample).clone();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut violations = 0;
    let mut unstable = 0;
    for _ in 0..1000 {
        let mut cfg = PipelineConfig::new(Classifier::Heuristic(GestureConfig::<f64>::default()));
        cfg.max_detect_hz = rng.random_range(0.5..40.0);
        cfg.track_loss_frames = rng.random_range(1..6);
        cfg.min_track_score = rng.random_range(0.0..1.0);
        let fps: f64 = rng.random_range(10.0..120.0);
        let p_hand: f64 = rng.random();
        let mut frames = Vec::new();
        let mut t = rng.random_range(0..1_000_000i64);
        let t0 = t;
        while t - t0 <= 10_000_000 {
            let hand = (rng.random::<f64>() < p_hand).then(|| HandSkeleton {
                score: rng.random(),
                ..skel.clone()
            });
            frames.push(HandFrame {
                timestamp_us: t,
                image_w: 640,
                image_h: 480,
                hand,
            });
            t += ((1e6 / fps) * rng.random_range(0.5..1.5)).max(1.0) as i64;
        }
        let (out, stats) = run_stream(&frames, &cfg).map_err(|e| e.to_string())?;
        let d = (frames.last().unwrap().timestamp_us - t0) as f64 / 1e6;
        if stats.detect_invocations as f64 > (d * cfg.max_detect_hz).ceil() + 1.0 {
            violations += 1;
        }
        let (out2, stats2) = run_stream(&frames, &cfg).map_err(|e| e.to_string())?;
        if out != out2 || stats != stats2 {
            unstable += 1;
        }
    }
    let el = start.elapsed();
    check(
        violations == 0 && unstable == 0,
        format!(
            "1000 streams: {violations} bound violations, {unstable} replay mismatches, {:.2}s",
            el.as_secs_f64()
        ),
    )
}

fn run_cli(args: &[&str], dir: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_handgest"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "handgest {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn c9_determinism() -> Outcome {
    let start = Instant::now();
    let mut outputs: Vec<Vec<Vec<u8>>> = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let d = dir.path();
        run_cli(
            &[
                "--seed",
                "9",
                "synth",
                "--per-class",
                "20",
                "--out",
                "corpus.jsonl",
            ],
            d,
        )?;
        run_cli(
            &[
                "features",
                "--frames",
                "corpus.jsonl",
                "--out",
                "features.jsonl",
            ],
            d,
        )?;
        std::fs::write(d.join("train.json"), "{\"epochs\": 3}").map_err(|e| e.to_string())?;
        run_cli(
            &[
                "--seed",
                "9",
                "train",
                "--data",
                "features.jsonl",
                "--config",
                "train.json",
                "--out",
                "model.json",
            ],
            d,
        )?;
        run_cli(
            &[
                "--seed",
                "9",
                "synth",
                "--per-class",
                "2",
                "--out",
                "stream_in.jsonl",
            ],
            d,
        )?;
        run_cli(
            &[
                "stream",
                "--frames",
                "stream_in.jsonl",
                "--model",
                "model.json",
                "--out",
                "results.jsonl",
                "--stats",
                "stats.json",
            ],
            d,
        )?;
        let files = ["corpus.jsonl", "model.json", "results.jsonl", "stats.json"];
        outputs.push(
            files
                .iter()
                .map(|f| std::fs::read(d.join(f)).unwrap_or_default())
                .collect(),
        );
    }
    let nonempty = outputs[0].iter().all(|b| !b.is_empty());
    let el = start.elapsed();
    check(
        nonempty && outputs[0] == outputs[1],
        format!(
            "synth/train/stream outputs identical across runs: {}, {:.2}s",
            outputs[0] == outputs[1],
            el.as_secs_f64()
        ),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("1 alignment non-degeneracy", c1_alignment),
        ("2 intrinsic-feature invariance", c2_invariance),
        ("3 Euler round trip", c3_euler_round_trip),
        ("4 heuristic classifier", c4_heuristic),
        ("5 neural classifier", c5_nn),
        ("6 lifting round trip", c6_lifting),
        ("7 intrinsics rule", c7_intrinsics),
        ("8 pipeline throttle and replay", c8_pipeline),
        ("9 CLI determinism", c9_determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
