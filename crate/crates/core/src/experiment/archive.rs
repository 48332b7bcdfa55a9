use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::clinical::{LabelPolicy, PreprocessModel};
use crate::data::{FeatureMatrix, ProbabilityMatrix};
use crate::error::{Error, Result};
use crate::gbdt::GbdtModel;
use crate::image::ImagePreprocConfig;
use crate::softmax::SoftmaxModel;

use super::files::{read_text, write_text};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum ArchivedModel {
    Gbdt(GbdtModel),
    Softmax(SoftmaxModel),
}

impl ArchivedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            ArchivedModel::Gbdt(_) => "gbdt",
            ArchivedModel::Softmax(_) => "softmax",
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            ArchivedModel::Gbdt(m) => m.n_features(),
            ArchivedModel::Softmax(m) => m.n_features(),
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            ArchivedModel::Gbdt(m) => m.n_classes(),
            ArchivedModel::Softmax(m) => m.n_classes(),
        }
    }

    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<ProbabilityMatrix> {
        match self {
            ArchivedModel::Gbdt(m) => m.predict_proba(x),
            ArchivedModel::Softmax(m) => m.predict_proba(x),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ArchivedModel::Gbdt(m) => m.validate(),
            ArchivedModel::Softmax(m) => m.validate(),
        }
    }
}

/// How raw inputs become the feature vector the model expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "input", rename_all = "lowercase")]
pub enum InputPipeline {
    /// Clinical CSV records encoded with a fitted preprocessing model.
    Clinical {
        preprocess: PreprocessModel,
        label_policy: LabelPolicy,
    },
    /// Precomputed feature vectors with these column names.
    Features { names: Vec<String> },
    /// PGM images turned into texture features.
    Images { preproc: ImagePreprocConfig },
}

impl InputPipeline {
    fn n_features(&self) -> usize {
        match self {
            InputPipeline::Clinical { preprocess, .. } => preprocess.feature_names().len(),
            InputPipeline::Features { names } => names.len(),
            InputPipeline::Images { preproc } => preproc.feature_len(),
        }
    }
}

/// A trained model with everything needed to score new inputs.
///
/// On disk this is a JSON document carrying `format_version`, `kind` and a
/// `checksum`: the SHA-256 of the compact JSON of every other field.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelArchive {
    pub model: ArchivedModel,
    pub pipeline: InputPipeline,
    pub validation_accuracy: f64,
    /// The configuration that produced the model.
    pub config: Value,
}

fn checksum(doc: &Value) -> Result<String> {
    let text = serde_json::to_string(doc)?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

impl ModelArchive {
    pub fn new(model: ArchivedModel, pipeline: InputPipeline, validation_accuracy: f64, config: Value) -> Result<Self> {
        let archive = Self { model, pipeline, validation_accuracy, config };
        archive.validate()?;
        Ok(archive)
    }

    fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(0.0..=1.0).contains(&self.validation_accuracy) {
            return Err(Error::Archive("validation accuracy outside [0, 1]".into()));
        }
        if self.pipeline.n_features() != self.model.n_features() {
            return Err(Error::Archive(format!(
                "input pipeline yields {} features, model expects {}",
                self.pipeline.n_features(),
                self.model.n_features()
            )));
        }
        if let InputPipeline::Clinical { label_policy, .. } = &self.pipeline {
            if label_policy.n_classes != self.model.n_classes() {
                return Err(Error::Archive("label policy class count differs from model".into()));
            }
        }
        Ok(())
    }

    fn body(&self) -> Result<Value> {
        let model = match &self.model {
            ArchivedModel::Gbdt(m) => serde_json::to_value(m)?,
            ArchivedModel::Softmax(m) => serde_json::to_value(m)?,
        };
        Ok(json!({
            "format_version": FORMAT_VERSION,
            "kind": self.model.kind(),
            "model": model,
            "pipeline": serde_json::to_value(&self.pipeline)?,
            "validation_accuracy": self.validation_accuracy,
            "config": self.config,
        }))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut doc = self.body()?;
        let sum = checksum(&doc)?;
        doc.as_object_mut().expect("archive body is an object").insert("checksum".into(), Value::String(sum));
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut doc: Value = serde_json::from_str(text)?;
        let obj = doc.as_object_mut().ok_or_else(|| Error::Archive("document is not an object".into()))?;
        let stored = match obj.remove("checksum") {
            Some(Value::String(s)) => s,
            _ => return Err(Error::Archive("missing checksum".into())),
        };
        if checksum(&doc)? != stored {
            return Err(Error::Archive("checksum mismatch".into()));
        }
        let field = |name: &str| doc.get(name).cloned().ok_or_else(|| Error::Archive(format!("missing field {name}")));
        if field("format_version")?.as_u64() != Some(FORMAT_VERSION) {
            return Err(Error::Archive(format!("unsupported format version, expected {FORMAT_VERSION}")));
        }
        let model = match field("kind")?.as_str() {
            Some("gbdt") => ArchivedModel::Gbdt(serde_json::from_value(field("model")?)?),
            Some("softmax") => ArchivedModel::Softmax(serde_json::from_value(field("model")?)?),
            _ => return Err(Error::Archive("unknown model kind".into())),
        };
        let pipeline = serde_json::from_value(field("pipeline")?)?;
        let validation_accuracy = field("validation_accuracy")?
            .as_f64()
            .ok_or_else(|| Error::Archive("validation_accuracy is not a number".into()))?;
        Self::new(model, pipeline, validation_accuracy, field("config")?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_text(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabelVector;
    use crate::softmax::{train_softmax, SoftmaxConfig};

    fn archive() -> ModelArchive {
        let x = FeatureMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![0.5, 0.25]]).unwrap();
        let y = LabelVector::new(vec![0, 1, 0], 2).unwrap();
        let cfg = SoftmaxConfig { epochs: 5, n_classes: 2, ..Default::default() };
        let model = train_softmax(&x, &y, &cfg).unwrap();
        ModelArchive::new(
            ArchivedModel::Softmax(model),
            InputPipeline::Features { names: vec!["f_0".into(), "f_1".into()] },
            2.0 / 3.0,
            json!({"seed": 3}),
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let a = archive();
        let text = a.to_json().unwrap();
        let back = ModelArchive::from_json(&text).unwrap();
        assert_eq!(back, a);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn tampering_is_detected() {
        let text = archive().to_json().unwrap();
        let tampered = text.replacen("\"validation_accuracy\": 0.6666666666666666", "\"validation_accuracy\": 0.9", 1);
        assert_ne!(tampered, text);
        assert!(matches!(ModelArchive::from_json(&tampered), Err(Error::Archive(_))));
        let unsigned: Value = {
            let mut v: Value = serde_json::from_str(&text).unwrap();
            v.as_object_mut().unwrap().remove("checksum");
            v
        };
        assert!(ModelArchive::from_json(&unsigned.to_string()).is_err());
    }

    #[test]
    fn feature_count_mismatch_rejected() {
        let a = archive();
        let bad = ModelArchive::new(a.model, InputPipeline::Features { names: vec!["only".into()] }, 0.5, Value::Null);
        assert!(bad.is_err());
    }
}
