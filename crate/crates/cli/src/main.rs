//! `handgest` command-line tool.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input or configuration,
//! 3 numerical failure (degenerate geometry, diverged fit).

mod config;

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use handgest::features::feature_vector;
use handgest::harness::{eval_classifier, keypoint_error, synth_corpus, GestureLabel};
use handgest::heuristic::{classify_heuristic, GestureConfig};
use handgest::io::{read_jsonl, write_jsonl, FeatureRecord, LabeledFrameRecord};
use handgest::lifting::{lift_skeleton, HandModel};
use handgest::nn::{
    calibrate_threshold, classify_nn, train, LabeledExample, MlpModel, NnClass, TrainConfig,
};
use handgest::pipeline::run_stream;
use handgest::skeleton::{HandFrame, RawFrame};
use log::{info, warn};
use serde::Serialize;

use config::{
    load_gestures, load_hand_model, load_model, read_text, PipelineFile, SynthSettings,
    SYNTH_SCHEMA,
};

#[derive(Parser)]
#[command(
    name = "handgest",
    version,
    about = "Static hand gesture recognition from hand skeletons"
)]
struct Cli {
    /// Seed for every random choice (generation, initialization, shuffling).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Configuration file for the subcommand: generator settings (synth),
    /// training settings (train), pipeline (stream), gesture rules (classify, eval).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate labeled synthetic frames.
    Synth(SynthArgs),
    /// Compute the 12 classifier features for each frame with a hand.
    Features(FeaturesArgs),
    /// Classify feature rows.
    Classify(ClassifyArgs),
    /// Train the neural classifier on labeled feature rows.
    Train(TrainArgs),
    /// Set the model's rejection threshold from negative feature rows.
    Calibrate(CalibrateArgs),
    /// Fill in 3D keypoints by fitting the hand model to the 2D keypoints.
    Lift(LiftArgs),
    /// Run the flow-controlled pipeline over a frame stream.
    Stream(StreamArgs),
    /// Evaluate a classifier on labeled frames or feature rows.
    Eval(EvalArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Samples per label.
    #[arg(long, default_value_t = 100)]
    per_class: usize,
    /// Comma-separated labels; defaults to all 21 gestures plus the hard negatives.
    #[arg(long, value_delimiter = ',')]
    labels: Vec<String>,
    /// Views along the finger direction instead of the palm-facing default.
    #[arg(long)]
    frontal: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    frames: PathBuf,
    /// Hand model used to lift frames that lack 3D keypoints.
    #[arg(long)]
    hand_model: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    features: PathBuf,
    /// Neural model; without it the rule-based classifier is used.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Optional JSON file receiving the per-epoch loss curves.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Feature rows of background samples; any label other than the six gestures counts as negative.
    #[arg(long)]
    negatives: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    fpr: f64,
    /// Defaults to overwriting the input model.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LiftArgs {
    #[arg(long)]
    frames: PathBuf,
    /// Hand model JSON; the built-in model when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StreamArgs {
    #[arg(long)]
    frames: PathBuf,
    /// Pipeline JSON; takes precedence over --config.
    #[arg(long)]
    pipeline: Option<PathBuf>,
    /// Use this neural model regardless of the pipeline's classifier setting.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Labeled frames (3D keypoints are used directly, or lifted when absent).
    #[arg(
        long,
        conflicts_with = "features",
        required_unless_present = "features"
    )]
    frames: Option<PathBuf>,
    /// Labeled feature rows.
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Also lift every frame from its 2D keypoints and report the 3D error against its stored 3D keypoints.
    #[arg(long, requires = "frames")]
    lift: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn reader(path: &Path) -> Result<Box<dyn BufRead>> {
    if path == Path::new("-") {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(Box::new(BufReader::new(f)))
}

fn writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        None => Ok(Box::new(BufWriter::new(io::stdout()))),
        Some(p) if p == Path::new("-") => Ok(Box::new(BufWriter::new(io::stdout()))),
        Some(p) => {
            let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            Ok(Box::new(BufWriter::new(f)))
        }
    }
}

fn write_json<V: Serialize>(path: Option<&Path>, value: &V) -> Result<()> {
    let mut w = writer(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_frames(path: &Path) -> Result<Vec<(HandFrame<f64>, Option<GestureLabel>)>> {
    let records: Vec<LabeledFrameRecord<f64>> = read_jsonl(reader(path)?)?;
    records
        .iter()
        .map(|r| r.validate().map_err(Into::into))
        .collect()
}

fn read_features(path: &Path) -> Result<Vec<FeatureRecord<f64>>> {
    read_jsonl(reader(path)?).map_err(Into::into)
}

fn synth(seed: u64, config: Option<&Path>, args: &SynthArgs) -> Result<()> {
    let settings: SynthSettings = match config {
        Some(p) => serde_json::from_str(&read_text(p)?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => SynthSettings::default(),
    };
    if settings.schema != SYNTH_SCHEMA {
        bail!(handgest::Error::InvalidConfig(format!(
            "unsupported generator schema {:?}",
            settings.schema
        )));
    }
    let mut cfg = settings.to_config(seed);
    if args.frontal {
        let f = handgest::SynthConfig::frontal();
        cfg.roll_offset = f.roll_offset;
        cfg.roll_range = f.roll_range;
        cfg.yaw_range = f.yaw_range;
        cfg.pitch_range = f.pitch_range;
    }
    let labels: Vec<GestureLabel> = if args.labels.is_empty() {
        GestureLabel::ALL.to_vec()
    } else {
        args.labels
            .iter()
            .map(|l| GestureLabel::from_name(l.trim()))
            .collect::<handgest::Result<_>>()?
    };
    let order: Vec<GestureLabel> = (0..args.per_class)
        .flat_map(|_| labels.iter().copied())
        .collect();
    let corpus = synth_corpus(&cfg, &order)?;
    info!("generated {} samples", corpus.len());
    write_jsonl(
        writer(args.out.as_deref())?,
        corpus.iter().map(LabeledFrameRecord::from_sample),
    )?;
    Ok(())
}

/// 3D keypoints of a frame's hand, lifting from 2D when they are absent.
fn kp3d_of(
    frame: &HandFrame<f64>,
    model: &HandModel<f64>,
) -> Option<handgest::Result<handgest::skeleton::Keypoints3<f64>>> {
    let h = frame.hand.as_ref()?;
    Some(match h.kp3d {
        Some(k) => Ok(k),
        None => lift_skeleton(h, frame.image_w, frame.image_h, model),
    })
}

fn features(args: &FeaturesArgs) -> Result<()> {
    let model = load_hand_model(args.hand_model.as_deref())?;
    let frames = read_frames(&args.frames)?;
    let mut rows = Vec::with_capacity(frames.len());
    let mut skipped = 0usize;
    for (frame, label) in &frames {
        let Some(kp) = kp3d_of(frame, &model) else {
            continue;
        };
        let handedness = frame
            .hand
            .as_ref()
            .map(|h| h.handedness)
            .unwrap_or_default();
        match kp.and_then(|k| feature_vector(&k, handedness)) {
            Ok(fv) => rows.push(FeatureRecord::new(
                frame.timestamp_us,
                &fv,
                label.map(|l| l.name().to_string()),
            )),
            Err(e) => {
                skipped += 1;
                warn!("frame t_us={}: {e}", frame.timestamp_us);
            }
        }
    }
    if skipped > 0 {
        warn!("{skipped} frames without usable features were skipped");
    }
    write_jsonl(writer(args.out.as_deref())?, &rows)?;
    Ok(())
}

enum AnyClassifier {
    Rules(GestureConfig<f64>),
    Net(MlpModel<f64>),
}

impl AnyClassifier {
    fn load(model: Option<&Path>, gestures: Option<&Path>) -> Result<Self> {
        Ok(match model {
            Some(m) => AnyClassifier::Net(load_model(m)?),
            None => AnyClassifier::Rules(load_gestures(gestures)?),
        })
    }

    fn classify(&self, fv: &handgest::features::FeatureVector<f64>) -> Result<String> {
        Ok(match self {
            AnyClassifier::Rules(c) => classify_heuristic(fv, c).to_string(),
            AnyClassifier::Net(m) => classify_nn(m, fv)?.name().to_string(),
        })
    }
}

#[derive(Serialize)]
struct Prediction<'a> {
    t_us: i64,
    label: &'a str,
}

fn classify(config: Option<&Path>, args: &ClassifyArgs) -> Result<()> {
    let clf = AnyClassifier::load(args.model.as_deref(), config)?;
    let rows = read_features(&args.features)?;
    let labels: Vec<String> = rows
        .iter()
        .map(|r| clf.classify(&r.features()))
        .collect::<Result<_>>()?;
    let preds = rows.iter().zip(&labels).map(|(r, l)| Prediction {
        t_us: r.t_us,
        label: l,
    });
    write_jsonl(writer(args.out.as_deref())?, preds)?;
    Ok(())
}

fn train_cmd(seed: Option<u64>, config: Option<&Path>, args: &TrainArgs) -> Result<()> {
    let mut cfg: TrainConfig<f64> = match config {
        Some(p) => serde_json::from_str(&read_text(p)?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => TrainConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let data: Vec<LabeledExample<f64>> = read_features(&args.data)?
        .iter()
        .map(FeatureRecord::to_example)
        .collect::<handgest::Result<_>>()?;
    let outcome = train(&data, &cfg)?;
    if let (Some(tl), Some(vl)) = (
        outcome.history.train_loss.last(),
        outcome.history.val_loss.last(),
    ) {
        info!("final train loss {tl:.5}, validation loss {vl:.5}");
    }
    write_text(&args.out, &outcome.model.to_json())?;
    if let Some(h) = &args.history {
        write_json(
            Some(h),
            &serde_json::json!({
                "schema": "handgest.train_history.v1",
                "train_loss": outcome.history.train_loss,
                "val_loss": outcome.history.val_loss,
            }),
        )?;
    }
    Ok(())
}

fn calibrate(args: &CalibrateArgs) -> Result<()> {
    let mut model = load_model(&args.model)?;
    let mut negatives = Vec::new();
    for row in read_features(&args.negatives)? {
        let label = match &row.label {
            Some(_) => row.to_example()?.label,
            None => NnClass::Negative,
        };
        if label.is_gesture() {
            bail!(handgest::Error::InvalidInput(format!(
                "row t_us={} is labeled {label}, not a negative",
                row.t_us
            )));
        }
        negatives.push(LabeledExample {
            features: row.features(),
            label,
        });
    }
    model.tau = calibrate_threshold(&model, &negatives, args.fpr)?;
    info!("tau = {}", model.tau);
    write_text(args.out.as_deref().unwrap_or(&args.model), &model.to_json())
}

fn lift(args: &LiftArgs) -> Result<()> {
    let model = load_hand_model(args.model.as_deref())?;
    let records: Vec<LabeledFrameRecord<f64>> = read_jsonl(reader(&args.frames)?)?;
    let mut out = Vec::with_capacity(records.len());
    let mut failures = 0usize;
    let mut first_err = None;
    for rec in records {
        let (frame, _) = rec.validate()?;
        let mut rec = rec;
        if let Some(h) = frame.hand.as_ref().filter(|h| h.kp3d.is_none()) {
            match lift_skeleton(h, frame.image_w, frame.image_h, &model) {
                Ok(k) => rec.frame.hand.as_mut().expect("validated hand").kp3d = Some(k.to_vec()),
                Err(e) => {
                    warn!("frame t_us={}: {e}", frame.timestamp_us);
                    failures += 1;
                    first_err.get_or_insert(e);
                }
            }
        }
        out.push(rec);
    }
    write_jsonl(writer(args.out.as_deref())?, &out)?;
    match first_err {
        // Output is complete; the failed frames keep a null kp3d.
        Some(e) => {
            Err(anyhow::Error::new(e).context(format!("{failures} frames could not be lifted")))
        }
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct StreamLine<'a> {
    schema: &'static str,
    #[serde(flatten)]
    output: &'a handgest::pipeline::FrameOutput,
}

fn stream(config: Option<&Path>, args: &StreamArgs) -> Result<()> {
    let (file, base) = PipelineFile::load(args.pipeline.as_deref().or(config))?;
    let cfg = file.build(&base, args.model.as_deref())?;
    let raw: Vec<RawFrame<f64>> = read_jsonl(reader(&args.frames)?)?;
    let frames = handgest::skeleton::validate_stream(&raw)?;
    let (outputs, stats) = run_stream(&frames, &cfg)?;
    write_jsonl(
        writer(args.out.as_deref())?,
        outputs.iter().map(|o| StreamLine {
            schema: "handgest.stream_output.v1",
            output: o,
        }),
    )?;
    if let Some(p) = &args.stats {
        write_json(
            Some(p),
            &serde_json::json!({ "schema": "handgest.stream_stats.v1", "stats": stats }),
        )?;
    }
    Ok(())
}

fn eval(config: Option<&Path>, args: &EvalArgs) -> Result<()> {
    let clf = AnyClassifier::load(args.model.as_deref(), config)?;
    let mut preds = Vec::new();
    let mut truths = Vec::new();
    let mut kp_errors = Vec::new();
    let mut lift_failures = 0;
    if let Some(path) = &args.features {
        for row in read_features(path)? {
            let ex = row.to_example()?;
            preds.push(
                NnClass::from_name(&clf.classify(&ex.features)?).unwrap_or(NnClass::Negative),
            );
            truths.push(ex.label);
        }
    } else if let Some(path) = &args.frames {
        let model = HandModel::default();
        for (frame, label) in read_frames(path)? {
            let label = label.ok_or_else(|| {
                handgest::Error::InvalidInput(format!(
                    "frame t_us={} has no label",
                    frame.timestamp_us
                ))
            })?;
            let Some(h) = frame.hand.as_ref() else {
                continue;
            };
            if args.lift {
                if let Some(gt) = h.kp3d {
                    match lift_skeleton(h, frame.image_w, frame.image_h, &model) {
                        Ok(lifted) => kp_errors.push(keypoint_error(&lifted, &gt)),
                        Err(e) => {
                            warn!("frame t_us={}: {e}", frame.timestamp_us);
                            lift_failures += 1;
                        }
                    }
                }
            }
            let pred = match kp3d_of(&frame, &model)
                .expect("hand present")
                .and_then(|k| feature_vector(&k, h.handedness))
            {
                Ok(fv) => NnClass::from_name(&clf.classify(&fv)?).unwrap_or(NnClass::Negative),
                Err(_) => NnClass::Negative,
            };
            preds.push(pred);
            truths.push(label.nn_class());
        }
    }
    let mut report = eval_classifier(&preds, &truths)?;
    report.lift_failures = lift_failures;
    if !kp_errors.is_empty() {
        report.keypoint_error_cm = Some(kp_errors.iter().sum::<f64>() / kp_errors.len() as f64);
    }
    write_json(args.out.as_deref(), &report)
}

fn run(cli: Cli) -> Result<()> {
    let config = cli.config.as_deref();
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Synth(a) => synth(seed, config, a),
        Command::Features(a) => features(a),
        Command::Classify(a) => classify(config, a),
        Command::Train(a) => train_cmd(cli.seed, config, a),
        Command::Calibrate(a) => calibrate(a),
        Command::Lift(a) => lift(a),
        Command::Stream(a) => stream(config, a),
        Command::Eval(a) => eval(config, a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<handgest::Error>() {
            return match e {
                handgest::Error::Io(_) => 1,
                e if e.is_numerical() => 3,
                _ => 2,
            };
        }
        if cause.is::<serde_json::Error>() {
            return 2;
        }
        if cause.is::<io::Error>() {
            return 1;
        }
    }
    2
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        let numerical = anyhow::Error::new(handgest::Error::DivergedFit {
            rms_px: 30.0,
            ceiling_px: 20.0,
        });
        assert_eq!(exit_code(&numerical), 3);
        let invalid = anyhow::Error::new(handgest::Error::UnknownLabel("Rock".into()))
            .context("reading labels");
        assert_eq!(exit_code(&invalid), 2);
        let missing = anyhow::Error::new(io::Error::new(io::ErrorKind::NotFound, "gone"))
            .context("opening x");
        assert_eq!(exit_code(&missing), 1);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
