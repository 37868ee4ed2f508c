//! JSON configuration files read by the CLI.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use handgest::heuristic::GestureConfig;
use handgest::lifting::HandModel;
use handgest::nn::MlpModel;
use handgest::pipeline::{Classifier, PipelineConfig};
use serde::{Deserialize, Serialize};

pub const PIPELINE_SCHEMA: &str = "handgest.pipeline.v1";
pub const SYNTH_SCHEMA: &str = "handgest.synth.v1";

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn load_gestures(path: Option<&Path>) -> Result<GestureConfig<f64>> {
    match path {
        Some(p) => Ok(GestureConfig::from_json(&read_text(p)?)?),
        None => Ok(GestureConfig::default()),
    }
}

pub fn load_model(path: &Path) -> Result<MlpModel<f64>> {
    Ok(MlpModel::from_json(&read_text(path)?)?)
}

pub fn load_hand_model(path: Option<&Path>) -> Result<HandModel<f64>> {
    match path {
        Some(p) => Ok(HandModel::from_json(&read_text(p)?)?),
        None => Ok(HandModel::default()),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    #[default]
    Heuristic,
    Nn,
}

/// Classifier selection. `path` is a gesture config (heuristic) or a model
/// file (nn); relative paths resolve against the pipeline file's directory.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierSpec {
    #[serde(default)]
    pub kind: ClassifierKind,
    #[serde(default)]
    pub path: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineFile {
    pub schema: String,
    pub max_detect_hz: f64,
    pub track_loss_frames: u32,
    pub min_track_score: f64,
    pub classifier: ClassifierSpec,
    /// Hand model used to lift frames without 3D keypoints.
    pub hand_model: Option<PathBuf>,
}

impl Default for PipelineFile {
    fn default() -> Self {
        let d = PipelineConfig::new(Classifier::Heuristic(GestureConfig::<f64>::default()));
        Self {
            schema: PIPELINE_SCHEMA.into(),
            max_detect_hz: d.max_detect_hz,
            track_loss_frames: d.track_loss_frames,
            min_track_score: d.min_track_score,
            classifier: ClassifierSpec::default(),
            hand_model: None,
        }
    }
}

impl PipelineFile {
    pub fn load(path: Option<&Path>) -> Result<(Self, PathBuf)> {
        match path {
            Some(p) => {
                let file: Self = serde_json::from_str(&read_text(p)?)
                    .with_context(|| format!("parsing {}", p.display()))?;
                if file.schema != PIPELINE_SCHEMA {
                    anyhow::bail!(handgest::Error::InvalidConfig(format!(
                        "unsupported pipeline schema {:?}",
                        file.schema
                    )));
                }
                Ok((file, p.parent().map(Path::to_path_buf).unwrap_or_default()))
            }
            None => Ok((Self::default(), PathBuf::new())),
        }
    }

    pub fn build(&self, base: &Path, model_override: Option<&Path>) -> Result<PipelineConfig<f64>> {
        let resolve = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let classifier = match (model_override, self.classifier.kind) {
            (Some(m), _) => Classifier::Nn(load_model(m)?),
            (None, ClassifierKind::Nn) => {
                let p = self.classifier.path.as_deref().ok_or_else(|| {
                    handgest::Error::InvalidConfig("nn classifier needs a model path".into())
                })?;
                Classifier::Nn(load_model(&resolve(p))?)
            }
            (None, ClassifierKind::Heuristic) => Classifier::Heuristic(load_gestures(
                self.classifier.path.as_deref().map(resolve).as_deref(),
            )?),
        };
        let mut cfg = PipelineConfig::new(classifier);
        cfg.max_detect_hz = self.max_detect_hz;
        cfg.track_loss_frames = self.track_loss_frames;
        cfg.min_track_score = self.min_track_score;
        cfg.hand_model = load_hand_model(self.hand_model.as_deref().map(resolve).as_deref())?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Generator settings; angles in degrees. Omitted fields keep their defaults.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSettings {
    pub schema: String,
    pub jitter_deg: f64,
    pub yaw_range_deg: f64,
    pub pitch_range_deg: f64,
    pub roll_range_deg: f64,
    pub roll_offset_deg: f64,
    pub tz_range_m: (f64, f64),
    pub image_w: u32,
    pub image_h: u32,
    pub noise_px: f64,
    pub noise_m: f64,
    pub left_fraction: f64,
}

impl Default for SynthSettings {
    fn default() -> Self {
        let d = handgest::SynthConfig::default();
        Self {
            schema: SYNTH_SCHEMA.into(),
            jitter_deg: d.jitter_std.to_degrees(),
            yaw_range_deg: d.yaw_range.to_degrees(),
            pitch_range_deg: d.pitch_range.to_degrees(),
            roll_range_deg: d.roll_range.to_degrees(),
            roll_offset_deg: d.roll_offset.to_degrees(),
            tz_range_m: d.tz_range,
            image_w: d.image_w,
            image_h: d.image_h,
            noise_px: d.noise_px,
            noise_m: d.noise_m,
            left_fraction: d.left_fraction,
        }
    }
}

impl SynthSettings {
    pub fn to_config(&self, seed: u64) -> handgest::SynthConfig {
        handgest::SynthConfig {
            seed,
            jitter_std: self.jitter_deg.to_radians(),
            yaw_range: self.yaw_range_deg.to_radians(),
            pitch_range: self.pitch_range_deg.to_radians(),
            roll_range: self.roll_range_deg.to_radians(),
            roll_offset: self.roll_offset_deg.to_radians(),
            tz_range: self.tz_range_m,
            image_w: self.image_w,
            image_h: self.image_h,
            noise_px: self.noise_px,
            noise_m: self.noise_m,
            left_fraction: self.left_fraction,
            ..Default::default()
        }
    }
}
