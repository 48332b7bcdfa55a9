//! CSV formats exchanged between commands.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a file
//! read back and written again is byte-identical.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::data::{FeatureMatrix, ProbabilityMatrix};
use crate::error::{Error, Result};
use crate::fusion::ModalityOutput;

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes())
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
}

fn parse_f64(field: &str, record: usize, what: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Parse {
        record,
        msg: format!("{what}: cannot parse {field:?} as a number"),
    })
}

fn check_unique(ids: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::invalid(format!("duplicate id {id:?}")));
        }
    }
    Ok(())
}

/// Per-sample class probabilities of one model plus that model's validation
/// accuracy. Header: `id,p_0,...,p_{K-1},accuracy_hint`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityFile {
    pub ids: Vec<String>,
    pub probs: ProbabilityMatrix,
    pub accuracy_hint: f64,
}

impl ProbabilityFile {
    pub fn new(ids: Vec<String>, probs: ProbabilityMatrix, accuracy_hint: f64) -> Result<Self> {
        if ids.len() != probs.n_rows() {
            return Err(Error::shape(format!("{} ids for {} probability rows", ids.len(), probs.n_rows())));
        }
        if !(0.0..=1.0).contains(&accuracy_hint) {
            return Err(Error::invalid(format!("accuracy hint {accuracy_hint} outside [0, 1]")));
        }
        check_unique(&ids)?;
        Ok(Self { ids, probs, accuracy_hint })
    }

    pub fn to_csv(&self) -> Result<String> {
        let k = self.probs.n_classes();
        let mut w = writer();
        let mut header = vec!["id".to_string()];
        header.extend((0..k).map(|c| format!("p_{c}")));
        header.push("accuracy_hint".into());
        w.write_record(&header)?;
        let hint = self.accuracy_hint.to_string();
        for (id, row) in self.ids.iter().zip(self.probs.rows()) {
            let mut rec = Vec::with_capacity(k + 2);
            rec.push(id.clone());
            rec.extend(row.iter().map(f64::to_string));
            rec.push(hint.clone());
            w.write_record(&rec)?;
        }
        finish(w)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rdr = reader(text);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header.len() < 4 || header[0] != "id" || header[header.len() - 1] != "accuracy_hint" {
            return Err(Error::Schema("probability file header must be id,p_0..p_{K-1},accuracy_hint".into()));
        }
        let k = header.len() - 2;
        for (c, name) in header[1..=k].iter().enumerate() {
            if *name != format!("p_{c}") {
                return Err(Error::Schema(format!("expected column p_{c}, found {name:?}")));
            }
        }
        let mut ids = Vec::new();
        let mut values = Vec::new();
        let mut hint: Option<f64> = None;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let record = i + 1;
            ids.push(rec[0].to_string());
            for c in 0..k {
                values.push(parse_f64(&rec[c + 1], record, "probability")?);
            }
            let h = parse_f64(&rec[k + 1], record, "accuracy_hint")?;
            match hint {
                None => hint = Some(h),
                Some(prev) if prev != h => {
                    return Err(Error::Parse { record, msg: "accuracy_hint differs between rows".into() })
                }
                _ => {}
            }
        }
        let hint = hint.ok_or_else(|| Error::invalid("probability file has no rows"))?;
        Self::new(ids, ProbabilityMatrix::new(values, k)?, hint)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_csv()?)
    }

    /// Fusion input named `modality`; `accuracy` replaces the stored hint.
    pub fn to_modality(&self, modality: &str, accuracy: Option<f64>) -> Result<ModalityOutput> {
        ModalityOutput::new(
            modality,
            accuracy.unwrap_or(self.accuracy_hint),
            self.ids.clone(),
            self.probs.clone(),
        )
    }
}

/// Ground-truth labels keyed by id, in file order. Header: `id,label`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelFile {
    pub ids: Vec<String>,
    pub labels: Vec<usize>,
}

impl LabelFile {
    pub fn new(ids: Vec<String>, labels: Vec<usize>) -> Result<Self> {
        if ids.len() != labels.len() {
            return Err(Error::shape("label file ids and labels differ in length"));
        }
        check_unique(&ids)?;
        Ok(Self { ids, labels })
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = writer();
        w.write_record(["id", "label"])?;
        for (id, l) in self.ids.iter().zip(&self.labels) {
            w.write_record([id.as_str(), &l.to_string()])?;
        }
        finish(w)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rdr = reader(text);
        let header = rdr.headers()?;
        if header.len() != 2 || &header[0] != "id" || &header[1] != "label" {
            return Err(Error::Schema("label file header must be id,label".into()));
        }
        let mut ids = Vec::new();
        let mut labels = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            ids.push(rec[0].to_string());
            labels.push(rec[1].trim().parse::<usize>().map_err(|_| Error::Parse {
                record: i + 1,
                msg: format!("label {:?} is not a non-negative integer", &rec[1]),
            })?);
        }
        Self::new(ids, labels)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_csv()?)
    }

    pub fn lookup(&self) -> HashMap<&str, usize> {
        self.ids.iter().map(String::as_str).zip(self.labels.iter().copied()).collect()
    }

    /// Labels for `ids`, failing on the first id without a label.
    pub fn labels_for(&self, ids: &[String]) -> Result<Vec<usize>> {
        let map = self.lookup();
        ids.iter()
            .map(|id| map.get(id.as_str()).copied().ok_or_else(|| Error::invalid(format!("no label for id {id:?}"))))
            .collect()
    }
}

/// Image feature vectors keyed by id. Header: `id,<feature names>`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub ids: Vec<String>,
    pub features: FeatureMatrix,
}

impl FeatureFile {
    pub fn new(ids: Vec<String>, features: FeatureMatrix) -> Result<Self> {
        if ids.len() != features.n_rows() {
            return Err(Error::shape("feature file ids and rows differ in length"));
        }
        check_unique(&ids)?;
        Ok(Self { ids, features })
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = writer();
        let mut header = vec!["id".to_string()];
        header.extend(self.features.names().iter().cloned());
        w.write_record(&header)?;
        for (id, row) in self.ids.iter().zip(self.features.rows()) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        finish(w)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rdr = reader(text);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header.len() < 2 || header[0] != "id" {
            return Err(Error::Schema("feature file header must start with id and name at least one feature".into()));
        }
        let names = header[1..].to_vec();
        let mut ids = Vec::new();
        let mut values = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            ids.push(rec[0].to_string());
            for field in rec.iter().skip(1) {
                values.push(parse_f64(field, i + 1, "feature")?);
            }
        }
        if ids.is_empty() {
            return Err(Error::invalid("feature file has no rows"));
        }
        Self::new(ids, FeatureMatrix::new(values, names.len(), names)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_csv()?)
    }
}

/// Writes `rows` of `(id, class, name)` predictions.
pub fn predictions_csv(ids: &[String], classes: &[usize], names: &[String]) -> Result<String> {
    let mut w = writer();
    w.write_record(["id", "class", "name"])?;
    for (id, &c) in ids.iter().zip(classes) {
        w.write_record([id.as_str(), &c.to_string(), &names[c]])?;
    }
    finish(w)
}

/// Display names: the three fibrosis grades for K = 3, `class <c>` otherwise.
pub fn class_names(n_classes: usize) -> Vec<String> {
    if n_classes == 3 {
        return ["No Fibrosis", "Fibrosis", "Cirrhosis"].map(String::from).to_vec();
    }
    (0..n_classes).map(|c| format!("class {c}")).collect()
}

/// Joins probabilities onto a space-separated line.
pub fn format_probs(row: &[f64]) -> String {
    let mut s = String::new();
    for (i, p) in row.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{p}");
    }
    s
}
