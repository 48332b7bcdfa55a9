use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clinical::{LabelPolicy, Schema};
use crate::error::{Error, Result};
use crate::fusion::AlignMode;
use crate::gbdt::GbdtConfig;
use crate::image::ImagePreprocConfig;
use crate::softmax::SoftmaxConfig;

fn default_split() -> [f64; 3] {
    [0.6, 0.2, 0.2]
}

fn default_classes() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicalSource {
    pub path: PathBuf,
    pub schema: Schema,
    #[serde(default)]
    pub label_policy: LabelPolicy,
    /// Rows missing any of these columns are removed before anything else.
    #[serde(default)]
    pub drop_missing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSource {
    /// Precomputed feature CSV (`id,f_0,...`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features_path: Option<PathBuf>,
    /// Directory of binary PGM files; the file stem is the sample id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_dir: Option<PathBuf>,
    /// `id,label` CSV.
    pub labels_path: PathBuf,
}

/// JSON experiment description. Relative paths resolve against the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default = "default_split")]
    pub split: [f64; 3],
    #[serde(default = "default_classes")]
    pub n_classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clinical: Option<ClinicalSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<ImageSource>,
    #[serde(default)]
    pub gbdt: GbdtConfig,
    #[serde(default)]
    pub softmax: SoftmaxConfig,
    #[serde(default)]
    pub image_preproc: ImagePreprocConfig,
    #[serde(default)]
    pub fusion_mode: AlignMode,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: Self = serde_json::from_str(text)?;
        cfg.resolve_paths(base_dir);
        cfg.sync_components();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        if let Some(c) = &mut self.clinical {
            fix(&mut c.path);
        }
        if let Some(i) = &mut self.image {
            fix(&mut i.labels_path);
            if let Some(p) = &mut i.features_path {
                fix(p);
            }
            if let Some(p) = &mut i.image_dir {
                fix(p);
            }
        }
    }

    /// Pushes the experiment seed and class count into every component.
    pub fn sync_components(&mut self) {
        self.gbdt.seed = self.seed;
        self.gbdt.n_classes = self.n_classes;
        self.softmax.seed = self.seed;
        self.softmax.n_classes = self.n_classes;
        self.image_preproc.seed = self.seed;
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.sync_components();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.out_dir.as_os_str().is_empty() {
            return Err(Error::invalid("config: out_dir must be non-empty"));
        }
        if self.n_classes < 2 {
            return Err(Error::invalid("config: n_classes must be at least 2"));
        }
        crate::clinical::validate_fractions(self.split)?;
        if let Some(c) = &self.clinical {
            if c.path.as_os_str().is_empty() {
                return Err(Error::invalid("config: clinical.path must be non-empty"));
            }
            c.label_policy.validate()?;
            if c.label_policy.n_classes != self.n_classes {
                return Err(Error::invalid("config: label policy class count differs from n_classes"));
            }
        }
        if let Some(i) = &self.image {
            match (&i.features_path, &i.image_dir) {
                (Some(_), None) | (None, Some(_)) => {}
                _ => {
                    return Err(Error::invalid(
                        "config: image needs exactly one of features_path or image_dir",
                    ))
                }
            }
        }
        self.gbdt.validate()?;
        self.softmax.validate()?;
        self.image_preproc.validate()?;
        Ok(())
    }
}
