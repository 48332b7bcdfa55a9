use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};

use crate::clinical::{ColumnKind, ColumnSpec, LabelPolicy, Schema};
use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::fusion::AlignMode;

use super::config::{ClinicalSource, ExperimentConfig, ImageSource};
use super::files::{write_text, FeatureFile, LabelFile};

pub const NUISANCE_FEATURES: usize = 5;

/// A paired three-class dataset in which the tabular branch can only tell
/// class 0 apart and the image branch can only tell class 2 apart.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub ids: Vec<String>,
    pub labels: Vec<usize>,
    /// Columns `t, n_0..n_4`.
    pub tabular: FeatureMatrix,
    /// Columns `u, m_0..m_4`.
    pub image: FeatureMatrix,
}

pub fn generate_synthetic(n: usize, noise: f64, seed: u64) -> Result<SyntheticData> {
    if n < 30 || !n.is_multiple_of(3) {
        return Err(Error::invalid(format!("n must be at least 30 and divisible by 3, got {n}")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::invalid(format!("noise must be finite and >= 0, got {noise}")));
    }
    let eps = Normal::new(0.0, noise).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = n.to_string().len();
    let d = NUISANCE_FEATURES + 1;
    let mut ids = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut tab = Vec::with_capacity(n * d);
    let mut img = Vec::with_capacity(n * d);
    for i in 0..n {
        let y = i % 3;
        ids.push(format!("s{i:0width$}"));
        labels.push(y);
        tab.push(if y == 0 { 1.0 } else { 0.0 } + rng.sample(eps));
        for _ in 0..NUISANCE_FEATURES {
            tab.push(rng.sample::<f64, _>(StandardNormal));
        }
        img.push(if y == 2 { 1.0 } else { 0.0 } + rng.sample(eps));
        for _ in 0..NUISANCE_FEATURES {
            img.push(rng.sample::<f64, _>(StandardNormal));
        }
    }
    let names = |lead: &str, prefix: &str| {
        std::iter::once(lead.to_string())
            .chain((0..NUISANCE_FEATURES).map(|j| format!("{prefix}_{j}")))
            .collect::<Vec<_>>()
    };
    Ok(SyntheticData {
        ids,
        labels,
        tabular: FeatureMatrix::new(tab, d, names("t", "n"))?,
        image: FeatureMatrix::new(img, d, names("u", "m"))?,
    })
}

impl SyntheticData {
    pub fn clinical_schema(&self) -> Schema {
        let mut cols = vec![ColumnSpec::new("id", ColumnKind::Identifier)];
        cols.extend(self.tabular.names().iter().map(|n| ColumnSpec::new(n, ColumnKind::Numeric)));
        cols.push(ColumnSpec::new("label", ColumnKind::Label));
        Schema::new(cols).expect("synthetic schema is valid")
    }

    /// Tabular CSV: `id`, the tabular features, then `label`.
    pub fn tabular_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let mut header = vec!["id".to_string()];
        header.extend(self.tabular.names().iter().cloned());
        header.push("label".into());
        w.write_record(&header)?;
        for (i, id) in self.ids.iter().enumerate() {
            let mut rec = vec![id.clone()];
            rec.extend(self.tabular.row(i).iter().map(f64::to_string));
            rec.push(self.labels[i].to_string());
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
    }

    pub fn image_file(&self) -> Result<FeatureFile> {
        FeatureFile::new(self.ids.clone(), self.image.clone())
    }

    pub fn label_file(&self) -> Result<LabelFile> {
        LabelFile::new(self.ids.clone(), self.labels.clone())
    }

    /// Experiment config pointing at the files written by [`Self::write_to`].
    pub fn experiment_config(&self, seed: u64) -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            seed,
            split: [0.6, 0.2, 0.2],
            n_classes: 3,
            clinical: Some(ClinicalSource {
                path: "tabular.csv".into(),
                schema: self.clinical_schema(),
                label_policy: LabelPolicy::identity(3),
                drop_missing: Vec::new(),
            }),
            image: Some(ImageSource {
                features_path: Some("image_features.csv".into()),
                image_dir: None,
                labels_path: "labels.csv".into(),
            }),
            gbdt: Default::default(),
            softmax: Default::default(),
            image_preproc: Default::default(),
            fusion_mode: AlignMode::Strict,
            out_dir: "out".into(),
        };
        cfg.sync_components();
        cfg
    }

    /// Writes `tabular.csv`, `image_features.csv`, `labels.csv` and
    /// `experiment.json` into `dir`, returning the config path.
    pub fn write_to(&self, dir: &Path, seed: u64) -> Result<PathBuf> {
        write_text(&dir.join("tabular.csv"), &self.tabular_csv()?)?;
        self.image_file()?.write(&dir.join("image_features.csv"))?;
        self.label_file()?.write(&dir.join("labels.csv"))?;
        let config_path = dir.join("experiment.json");
        let mut text = serde_json::to_string_pretty(&self.experiment_config(seed))?;
        text.push('\n');
        write_text(&config_path, &text)?;
        Ok(config_path)
    }
}
