use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::clinical::{apply_preprocess, derive_labels, fit_preprocess, load_clinical_csv, parse_record, split_dataset, DatasetSplit};
use crate::data::{FeatureMatrix, LabelVector, ProbabilityMatrix};
use crate::error::{Error, Result};
use crate::fusion::{align_by_id, compute_weights, fuse, predict_class, AlignMode, ModalityOutput};
use crate::gbdt::train_gbdt;
use crate::image::{augment, extract_features, load_pgm, GrayImage};
use crate::metrics::{evaluate, render_report, MetricsReport, NamedReport, ReportFormat};
use crate::softmax::train_softmax;

use super::archive::{ArchivedModel, InputPipeline, ModelArchive};
use super::config::ExperimentConfig;
use super::files::{class_names, predictions_csv, read_text, write_text, FeatureFile, LabelFile, ProbabilityFile};

/// Everything one training command produces.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub archive: ModelArchive,
    pub validation: ProbabilityFile,
    pub test: ProbabilityFile,
    pub validation_labels: LabelFile,
    pub test_labels: LabelFile,
    pub metrics: MetricsReport,
    /// Extracted feature vectors, present when training from images.
    pub features: Option<FeatureFile>,
}

impl TrainOutcome {
    /// Writes `<prefix>_model.json`, `<prefix>_val_probs.csv`,
    /// `<prefix>_test_probs.csv`, the matching label files,
    /// `<prefix>_val_metrics.json` and, for image input, `<prefix>_features.csv`.
    pub fn write(&self, out_dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
        let path = |name: &str| out_dir.join(format!("{prefix}_{name}"));
        let mut written = Vec::new();
        let mut record = |p: PathBuf| {
            written.push(p.clone());
            p
        };
        self.archive.save(&record(path("model.json")))?;
        self.validation.write(&record(path("val_probs.csv")))?;
        self.test.write(&record(path("test_probs.csv")))?;
        self.validation_labels.write(&record(path("val_labels.csv")))?;
        self.test_labels.write(&record(path("test_labels.csv")))?;
        write_text(&record(path("val_metrics.json")), &metrics_json(&self.metrics)?)?;
        if let Some(f) = &self.features {
            f.write(&record(path("features.csv")))?;
        }
        Ok(written)
    }
}

fn metrics_json(report: &MetricsReport) -> Result<String> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

fn finish_training(
    model: ArchivedModel,
    pipeline: InputPipeline,
    x: &FeatureMatrix,
    labels: &LabelVector,
    ids: &[String],
    split: &DatasetSplit,
    cfg: &ExperimentConfig,
) -> Result<TrainOutcome> {
    let probs = model.predict_proba(x)?;
    let part = |idx: &[usize]| -> (Vec<String>, ProbabilityMatrix, Vec<usize>) {
        (
            idx.iter().map(|&i| ids[i].clone()).collect(),
            probs.select_rows(idx),
            labels.select(idx).labels().to_vec(),
        )
    };
    let (val_ids, val_probs, val_y) = part(&split.validation);
    let (test_ids, test_probs, test_y) = part(&split.test);
    let metrics = evaluate(&val_y, &predict_class(&val_probs), cfg.n_classes)?;
    let accuracy = metrics.accuracy;
    let archive = ModelArchive::new(model, pipeline, accuracy, serde_json::to_value(cfg)?)?;
    Ok(TrainOutcome {
        archive,
        validation: ProbabilityFile::new(val_ids.clone(), val_probs, accuracy)?,
        test: ProbabilityFile::new(test_ids.clone(), test_probs, accuracy)?,
        validation_labels: LabelFile::new(val_ids, val_y)?,
        test_labels: LabelFile::new(test_ids, test_y)?,
        metrics,
        features: None,
    })
}

/// Clinical branch: drop incomplete rows, split, fit preprocessing on the
/// training part, encode every row and train the boosted trees.
pub fn train_tabular(cfg: &ExperimentConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let src = cfg.clinical.as_ref().ok_or_else(|| Error::invalid("config has no clinical section"))?;
    let file = std::fs::File::open(&src.path).map_err(|e| Error::io(&src.path, e))?;
    let mut table = load_clinical_csv(std::io::BufReader::new(file), &src.schema)?;
    for column in &src.drop_missing {
        table = table.drop_rows_missing(column)?;
    }
    let labels = derive_labels(&table, &src.label_policy)?;
    let split = split_dataset(&labels, cfg.split, cfg.seed)?;
    let preprocess = fit_preprocess(&table.select_rows(&split.train))?;
    let x = apply_preprocess(&preprocess, &table)?;
    let model = train_gbdt(&x.select_rows(&split.train), &labels.select(&split.train), &cfg.gbdt)?;
    let pipeline = InputPipeline::Clinical { preprocess, label_policy: src.label_policy.clone() };
    finish_training(ArchivedModel::Gbdt(model), pipeline, &x, &labels, &table.ids(), &split, cfg)
}

/// Reads every `*.pgm` file in `dir`, sorted by file name. The file stem is
/// the sample id.
pub fn load_image_dir(dir: &Path) -> Result<(Vec<String>, Vec<GrayImage>)> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_pgm = path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
        if is_pgm && path.is_file() {
            paths.push(path);
        }
    }
    if paths.is_empty() {
        return Err(Error::invalid(format!("no PGM images in {}", dir.display())));
    }
    paths.sort();
    let mut ids = Vec::with_capacity(paths.len());
    let mut images = Vec::with_capacity(paths.len());
    for path in paths {
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        images.push(load_pgm(&bytes).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?);
        ids.push(path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string());
    }
    Ok((ids, images))
}

/// Image branch: texture features (from a feature CSV or extracted from
/// PGMs, with augmented copies of training images) and a softmax classifier.
pub fn train_image(cfg: &ExperimentConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let src = cfg.image.as_ref().ok_or_else(|| Error::invalid("config has no image section"))?;
    let label_file = LabelFile::read(&src.labels_path)?;

    let (ids, x, images, pipeline) = if let Some(path) = &src.features_path {
        let f = FeatureFile::read(path)?;
        let names = f.features.names().to_vec();
        (f.ids, f.features, None, InputPipeline::Features { names })
    } else {
        let dir = src.image_dir.as_ref().expect("validated config names an image source");
        let (ids, images) = load_image_dir(dir)?;
        let rows = images
            .iter()
            .map(|img| extract_features(img, &cfg.image_preproc))
            .collect::<Result<Vec<_>>>()?;
        let x = FeatureMatrix::from_rows(&rows)?;
        (ids, x, Some(images), InputPipeline::Images { preproc: cfg.image_preproc.clone() })
    };

    let labels = LabelVector::new(label_file.labels_for(&ids)?, cfg.n_classes)?;
    let split = split_dataset(&labels, cfg.split, cfg.seed)?;

    let mut train_rows: Vec<Vec<f64>> = split.train.iter().map(|&i| x.row(i).to_vec()).collect();
    let mut train_y: Vec<usize> = split.train.iter().map(|&i| labels.labels()[i]).collect();
    if let Some(images) = &images {
        for &i in &split.train {
            let seed = cfg.image_preproc.seed.wrapping_add(i as u64);
            for variant in augment(&images[i], &cfg.image_preproc, seed)?.iter().skip(1) {
                train_rows.push(extract_features(variant, &cfg.image_preproc)?);
                train_y.push(labels.labels()[i]);
            }
        }
    }
    let train_x = FeatureMatrix::new(train_rows.concat(), x.n_cols(), x.names().to_vec())?;
    let train_y = LabelVector::new(train_y, cfg.n_classes)?;
    let model = train_softmax(&train_x, &train_y, &cfg.softmax)?;

    let mut outcome = finish_training(ArchivedModel::Softmax(model), pipeline, &x, &labels, &ids, &split, cfg)?;
    if images.is_some() {
        outcome.features = Some(FeatureFile::new(ids, x)?);
    }
    Ok(outcome)
}

/// One probability file entering fusion.
#[derive(Debug, Clone, PartialEq)]
pub struct FuseInput {
    pub name: String,
    pub file: ProbabilityFile,
    /// Replaces the file's accuracy hint when set.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModalitySummary {
    pub name: String,
    pub accuracy: f64,
    pub weight: f64,
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuseOutcome {
    pub modalities: Vec<ModalitySummary>,
    /// Hybrid probabilities; the hint is the hybrid accuracy when labels were
    /// given, otherwise the weighted mean of the modality accuracies.
    pub hybrid: ProbabilityFile,
    pub classes: Vec<usize>,
    pub metrics: Option<MetricsReport>,
}

impl FuseOutcome {
    /// Writes `hybrid_probs.csv`, `predictions.csv`, `fusion.json` and, with
    /// labels, `hybrid_metrics.json`.
    pub fn write(&self, out_dir: &Path) -> Result<Vec<PathBuf>> {
        let mut written = vec![out_dir.join("hybrid_probs.csv"), out_dir.join("predictions.csv"), out_dir.join("fusion.json")];
        self.hybrid.write(&written[0])?;
        let names = class_names(self.hybrid.probs.n_classes());
        write_text(&written[1], &predictions_csv(&self.hybrid.ids, &self.classes, &names)?)?;
        let mut summary = serde_json::to_string_pretty(&serde_json::json!({
            "modalities": self.modalities,
            "fused_samples": self.hybrid.ids.len(),
        }))?;
        summary.push('\n');
        write_text(&written[2], &summary)?;
        if let Some(m) = &self.metrics {
            let p = out_dir.join("hybrid_metrics.json");
            write_text(&p, &metrics_json(m)?)?;
            written.push(p);
        }
        Ok(written)
    }
}

/// Accuracy-weighted soft voting over probability files.
pub fn fuse_files(inputs: &[FuseInput], mode: AlignMode, labels: Option<&LabelFile>) -> Result<FuseOutcome> {
    if inputs.len() < 2 {
        return Err(Error::invalid("fusion needs at least two probability files"));
    }
    let outputs = inputs
        .iter()
        .map(|i| i.file.to_modality(&i.name, i.accuracy))
        .collect::<Result<Vec<_>>>()?;
    let accuracies: Vec<f64> = outputs.iter().map(ModalityOutput::accuracy).collect();
    let weights = compute_weights(&accuracies)?;
    let aligned = align_by_id(&outputs, mode)?;
    let hybrid = fuse(&aligned.outputs, &weights)?;

    let modalities = outputs
        .iter()
        .zip(weights.as_slice())
        .zip(&aligned.dropped)
        .map(|((o, &w), &d)| ModalitySummary { name: o.modality().to_string(), accuracy: o.accuracy(), weight: w, dropped: d })
        .collect();
    let metrics = match labels {
        Some(l) => Some(evaluate(&l.labels_for(&hybrid.ids)?, &hybrid.classes, hybrid.probs.n_classes())?),
        None => None,
    };
    let hint = match &metrics {
        Some(m) => m.accuracy,
        None => weights.as_slice().iter().zip(&accuracies).map(|(w, a)| w * a).sum::<f64>().min(1.0),
    };
    Ok(FuseOutcome {
        modalities,
        hybrid: ProbabilityFile::new(hybrid.ids, hybrid.probs, hint)?,
        classes: hybrid.classes,
        metrics,
    })
}

/// A single raw sample for one branch.
#[derive(Debug, Clone, PartialEq)]
pub enum Sample {
    /// One CSV record with fields in schema order (the label field may be empty).
    ClinicalRow(String),
    Image(GrayImage),
    Features(Vec<f64>),
}

/// A trained branch and, optionally, the sample it should score.
#[derive(Debug, Clone)]
pub struct Branch {
    pub name: String,
    pub archive: ModelArchive,
    pub sample: Option<Sample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinglePrediction {
    pub class: usize,
    pub name: String,
    pub probs: Vec<f64>,
}

fn sample_features(archive: &ModelArchive, sample: &Sample) -> Result<FeatureMatrix> {
    let values = match (&archive.pipeline, sample) {
        (InputPipeline::Clinical { preprocess, .. }, Sample::ClinicalRow(text)) => {
            let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
            let rec = rdr
                .records()
                .next()
                .ok_or_else(|| Error::Parse { record: 1, msg: "empty clinical row".into() })??;
            let fields: Vec<&str> = rec.iter().collect();
            let cells = parse_record(preprocess.schema(), &fields, 1)?;
            return preprocess.apply_row(&cells);
        }
        (InputPipeline::Images { preproc }, Sample::Image(img)) => extract_features(img, preproc)?,
        (InputPipeline::Features { .. } | InputPipeline::Images { .. }, Sample::Features(v)) => v.clone(),
        (pipeline, _) => {
            let expected = match pipeline {
                InputPipeline::Clinical { .. } => "a clinical row",
                InputPipeline::Features { .. } => "a feature vector",
                InputPipeline::Images { .. } => "a PGM image or feature vector",
            };
            return Err(Error::Schema(format!("model expects {expected}")));
        }
    };
    if values.len() != archive.model.n_features() {
        return Err(Error::Schema(format!(
            "sample has {} features, model expects {}",
            values.len(),
            archive.model.n_features()
        )));
    }
    FeatureMatrix::from_rows(&[values])
}

/// Scores one sample through each branch and fuses the results exactly as
/// [`fuse_files`] would for the same rows. Strict mode needs at least two
/// branches, each with a sample; intersect mode fuses whatever is present.
pub fn predict_sample(branches: &[Branch], mode: AlignMode) -> Result<SinglePrediction> {
    if mode == AlignMode::Strict && branches.len() < 2 {
        return Err(Error::Alignment("strict mode needs a sample for every modality of a two-modality set".into()));
    }
    let mut outputs = Vec::new();
    for b in branches {
        let Some(sample) = &b.sample else {
            if mode == AlignMode::Strict {
                return Err(Error::Alignment(format!("no sample supplied for modality {:?}", b.name)));
            }
            continue;
        };
        let probs = b.archive.model.predict_proba(&sample_features(&b.archive, sample)?)?;
        outputs.push(ModalityOutput::new(&b.name, b.archive.validation_accuracy, vec!["sample".into()], probs)?);
    }
    let probs: Vec<f64> = match outputs.len() {
        0 => return Err(Error::Alignment("no modality has a sample".into())),
        1 => outputs[0].probs().row(0).to_vec(),
        _ => {
            let accuracies: Vec<f64> = outputs.iter().map(ModalityOutput::accuracy).collect();
            fuse(&outputs, &compute_weights(&accuracies)?)?.probs.row(0).to_vec()
        }
    };
    let k = probs.len();
    let class = crate::fusion::argmax(&probs);
    Ok(SinglePrediction { class, name: class_names(k)[class].clone(), probs })
}

/// Renders metrics JSON files as comparison tables.
pub fn report_files(paths: &[PathBuf], names: &[String], format: ReportFormat) -> Result<String> {
    if paths.is_empty() {
        return Err(Error::invalid("report needs at least one metrics file"));
    }
    if !names.is_empty() && names.len() != paths.len() {
        return Err(Error::invalid(format!("{} names for {} metrics files", names.len(), paths.len())));
    }
    let reports = paths
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let report: MetricsReport = serde_json::from_str(&read_text(p)?)?;
            let model = names.get(i).cloned().unwrap_or_else(|| stem(p));
            Ok(NamedReport { model, report })
        })
        .collect::<Result<Vec<_>>>()?;
    render_report(&reports, format)
}

pub(crate) fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("model").to_string()
}
