//! JSON Lines records: frames, labeled frames, feature rows.
//!
//! Frames use the wire layout of [`RawFrame`]. Labeled frames add `label` and
//! a `schema` tag; feature rows carry the 12 features in radians and, when
//! known, a label, which makes them directly usable as training examples.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{EulerAngles, FeatureVector};
use crate::harness::{GestureLabel, SynthSample};
use crate::nn::{LabeledExample, NnClass};
use crate::scalar::Scalar;
use crate::skeleton::{validate_frame, HandFrame, RawFrame};

pub const SAMPLE_SCHEMA: &str = "handgest.sample.v1";
pub const FEATURES_SCHEMA: &str = "handgest.features.v1";

/// Parse one JSON value per non-blank line. Errors name the 1-based line.
pub fn read_jsonl<R: BufRead, V: DeserializeOwned>(reader: R) -> Result<Vec<V>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line)
            .map_err(|e| Error::MalformedFrame(format!("line {}: {e}", i + 1)))?;
        out.push(v);
    }
    Ok(out)
}

pub fn write_jsonl<W: Write, V: Serialize>(
    mut writer: W,
    items: impl IntoIterator<Item = V>,
) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut writer, &item)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// A frame, optionally with its ground-truth gesture label. Plain frame lines
/// parse as records without a label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Clone + Serialize",
    deserialize = "T: Deserialize<'de>"
))]
pub struct LabeledFrameRecord<T> {
    #[serde(default)]
    pub schema: Option<String>,
    #[serde(flatten)]
    pub frame: RawFrame<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl<T: Scalar> LabeledFrameRecord<T> {
    pub fn from_sample(s: &SynthSample<T>) -> Self {
        Self {
            schema: Some(SAMPLE_SCHEMA.into()),
            frame: RawFrame::from(&s.frame),
            label: Some(s.label.name().into()),
        }
    }

    pub fn validate(&self) -> Result<(HandFrame<T>, Option<GestureLabel>)> {
        let label = self
            .label
            .as_deref()
            .map(GestureLabel::from_name)
            .transpose()?;
        Ok((validate_frame(&self.frame)?, label))
    }
}

/// Feature row: `euler` is `[yaw, pitch, roll]`, all angles in radians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Clone + Serialize",
    deserialize = "T: Deserialize<'de>"
))]
pub struct FeatureRecord<T> {
    #[serde(default)]
    pub schema: Option<String>,
    pub t_us: i64,
    pub euler: [T; 3],
    pub fingers: [T; 5],
    pub pairs: [T; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl<T: Scalar> FeatureRecord<T> {
    pub fn new(t_us: i64, fv: &FeatureVector<T>, label: Option<String>) -> Self {
        Self {
            schema: Some(FEATURES_SCHEMA.into()),
            t_us,
            euler: fv.euler.to_array(),
            fingers: fv.finger_angles,
            pairs: fv.pair_angles,
            label,
        }
    }

    pub fn features(&self) -> FeatureVector<T> {
        let [y, p, r] = self.euler;
        FeatureVector {
            euler: EulerAngles::new(y, p, r),
            finger_angles: self.fingers,
            pair_angles: self.pairs,
        }
    }

    /// Training example; named non-target gestures become `Negative`.
    pub fn to_example(&self) -> Result<LabeledExample<T>> {
        let name = self
            .label
            .as_deref()
            .ok_or_else(|| Error::InvalidInput(format!("row t_us={} has no label", self.t_us)))?;
        let label = match NnClass::from_name(name) {
            Some(c) => c,
            None => GestureLabel::from_name(name)?.nn_class(),
        };
        Ok(LabeledExample {
            features: self.features(),
            label,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{sample_rng, synth_pose, SynthConfig};

    #[test]
    fn labeled_frame_round_trip() {
        let s = synth_pose(
            GestureLabel::Four,
            &SynthConfig::<f64>::default(),
            &mut sample_rng(9, 0),
        )
        .unwrap();
        let rec = LabeledFrameRecord::from_sample(&s);
        let mut buf = Vec::new();
        write_jsonl(&mut buf, [&rec, &rec]).unwrap();
        let back: Vec<LabeledFrameRecord<f64>> = read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, vec![rec.clone(), rec]);
        let (frame, label) = back[0].validate().unwrap();
        assert_eq!(frame, s.frame);
        assert_eq!(label, Some(GestureLabel::Four));
    }

    #[test]
    fn plain_frames_parse_as_raw_frames() {
        let text = "{\"t_us\":5,\"w\":640,\"h\":480,\"hand\":null}\n\n{\"t_us\":6,\"w\":640,\"h\":480,\"hand\":null,\"extra\":1}\n";
        let frames: Vec<RawFrame<f64>> = read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(frames.len(), 2);
        let recs: Vec<LabeledFrameRecord<f64>> = read_jsonl(text.as_bytes()).unwrap();
        assert!(recs.iter().all(|r| r.label.is_none() && r.schema.is_none()));
        let bad = read_jsonl::<_, RawFrame<f64>>("{\"t_us\":1}\n".as_bytes());
        assert!(matches!(bad, Err(Error::MalformedFrame(m)) if m.starts_with("line 1")));
    }

    #[test]
    fn feature_rows_become_examples() {
        let fv = FeatureVector::<f64>::from_array(&[
            0.1, 0.2, 0.3, 1.0, 1.1, 1.2, 1.3, 1.4, 0.5, 0.6, 0.7, 0.8,
        ]);
        let rec = FeatureRecord::new(7, &fv, Some("Loser".into()));
        let json = serde_json::to_string(&rec).unwrap();
        let back: FeatureRecord<f64> = serde_json::from_str(&json).unwrap();
        let ex = back.to_example().unwrap();
        assert_eq!(ex.features, fv);
        assert_eq!(ex.label, NnClass::Negative);
        assert!(FeatureRecord::new(7, &fv, None).to_example().is_err());
        assert!(FeatureRecord::new(7, &fv, Some("Rock".into()))
            .to_example()
            .is_err());
    }
}
