//! Clinical table ingest: schema-driven CSV loading, row filtering, mean
//! imputation, one-hot encoding, label mapping and stratified splitting.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Read;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureMatrix, LabelVector};
use crate::error::{Error, Result};

/// Cell texts that read as missing. Case-sensitive.
pub const MISSING_TOKENS: [&str; 2] = ["", "NA"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Identifier,
    Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
}

impl ColumnSpec {
    pub fn new(name: &str, kind: ColumnKind) -> Self {
        Self { name: name.to_string(), kind, categories: None }
    }

    pub fn categorical(name: &str, categories: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            kind: ColumnKind::Categorical,
            categories: Some(categories.iter().map(|c| c.to_string()).collect()),
        }
    }
}

/// Validated column roster: unique names, one label column, at most one
/// identifier column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ColumnSpec>", into = "Vec<ColumnSpec>")]
pub struct Schema {
    columns: Vec<ColumnSpec>,
}

impl TryFrom<Vec<ColumnSpec>> for Schema {
    type Error = Error;

    fn try_from(columns: Vec<ColumnSpec>) -> Result<Self> {
        Schema::new(columns)
    }
}

impl From<Schema> for Vec<ColumnSpec> {
    fn from(schema: Schema) -> Self {
        schema.columns
    }
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column {:?}", c.name)));
            }
            match (&c.categories, c.kind) {
                (Some(cats), ColumnKind::Categorical) if cats.is_empty() => {
                    return Err(Error::Schema(format!("column {:?} declares no categories", c.name)))
                }
                (Some(_), kind) if kind != ColumnKind::Categorical => {
                    return Err(Error::Schema(format!(
                        "column {:?} declares categories but is not categorical",
                        c.name
                    )))
                }
                _ => {}
            }
        }
        let count = |kind| columns.iter().filter(|c| c.kind == kind).count();
        if count(ColumnKind::Label) != 1 {
            return Err(Error::Schema("schema needs exactly one label column".into()));
        }
        if count(ColumnKind::Identifier) > 1 {
            return Err(Error::Schema("schema allows at most one identifier column".into()));
        }
        Ok(Self { columns })
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn label_index(&self) -> usize {
        self.columns
            .iter()
            .position(|c| c.kind == ColumnKind::Label)
            .expect("validated schema has a label column")
    }

    pub fn identifier_index(&self) -> Option<usize> {
        self.columns.iter().position(|c| c.kind == ColumnKind::Identifier)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Number(f64),
    Token(String),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    fn parse(spec: &ColumnSpec, text: &str, record: usize) -> Result<Cell> {
        if MISSING_TOKENS.contains(&text) {
            return Ok(Cell::Missing);
        }
        match spec.kind {
            ColumnKind::Numeric => {
                let v: f64 = text.trim().parse().map_err(|_| Error::Parse {
                    record,
                    msg: format!("column {:?}: {:?} is not numeric", spec.name, text),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        record,
                        msg: format!("column {:?}: non-finite value {:?}", spec.name, text),
                    });
                }
                Ok(Cell::Number(v))
            }
            ColumnKind::Categorical => {
                if let Some(cats) = &spec.categories {
                    if !cats.iter().any(|c| c == text) {
                        return Err(Error::Parse {
                            record,
                            msg: format!("column {:?}: undeclared category {:?}", spec.name, text),
                        });
                    }
                }
                Ok(Cell::Token(text.to_string()))
            }
            ColumnKind::Identifier | ColumnKind::Label => Ok(Cell::Token(text.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClinicalTable {
    schema: Schema,
    rows: Vec<Vec<Cell>>,
}

impl ClinicalTable {
    pub fn new(schema: Schema, rows: Vec<Vec<Cell>>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(Error::Parse {
                    record: i + 1,
                    msg: format!("row has {} cells, schema has {}", row.len(), schema.len()),
                });
            }
            for (cell, spec) in row.iter().zip(schema.columns()) {
                let ok = match (cell, spec.kind) {
                    (Cell::Missing, _) => true,
                    (Cell::Number(v), ColumnKind::Numeric) => v.is_finite(),
                    (Cell::Token(t), ColumnKind::Categorical) => spec
                        .categories
                        .as_ref()
                        .is_none_or(|cats| cats.iter().any(|c| c == t)),
                    (Cell::Token(_), ColumnKind::Identifier | ColumnKind::Label) => true,
                    _ => false,
                };
                if !ok {
                    return Err(Error::Parse {
                        record: i + 1,
                        msg: format!("invalid cell {:?} in column {:?}", cell, spec.name),
                    });
                }
            }
        }
        Ok(Self { schema, rows })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Sample identifiers: the identifier column when present, otherwise the
    /// zero-based row position.
    pub fn ids(&self) -> Vec<String> {
        match self.schema.identifier_index() {
            Some(j) => self
                .rows
                .iter()
                .enumerate()
                .map(|(i, row)| match &row[j] {
                    Cell::Token(t) => t.clone(),
                    Cell::Number(v) => v.to_string(),
                    Cell::Missing => i.to_string(),
                })
                .collect(),
            None => (0..self.rows.len()).map(|i| i.to_string()).collect(),
        }
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Keeps exactly the rows whose `column` cell is present, in order.
    pub fn drop_rows_missing(&self, column: &str) -> Result<Self> {
        let j = self
            .schema
            .index_of(column)
            .ok_or_else(|| Error::Schema(format!("unknown column {column:?}")))?;
        let rows = self.rows.iter().filter(|r| !r[j].is_missing()).cloned().collect();
        Ok(Self { schema: self.schema.clone(), rows })
    }
}

/// Parses one data record (already split into fields, in schema order).
pub fn parse_record(schema: &Schema, fields: &[&str], record: usize) -> Result<Vec<Cell>> {
    if fields.len() != schema.len() {
        return Err(Error::Parse {
            record,
            msg: format!("row has {} cells, schema has {}", fields.len(), schema.len()),
        });
    }
    fields
        .iter()
        .zip(schema.columns())
        .map(|(text, spec)| Cell::parse(spec, text, record))
        .collect()
}

/// Reads a headed CSV and reorders its columns into schema order. Columns not
/// named by the schema are ignored.
pub fn load_clinical_csv<R: Read>(reader: R, schema: &Schema) -> Result<ClinicalTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let width = header.len();
    let mut position = HashMap::new();
    for (j, h) in header.iter().enumerate() {
        position.entry(h.trim()).or_insert(j);
    }
    let mapping: Vec<usize> = schema
        .columns()
        .iter()
        .map(|c| {
            position
                .get(c.name.as_str())
                .copied()
                .ok_or_else(|| Error::Schema(format!("header is missing column {:?}", c.name)))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let record = i + 1;
        if rec.len() != width {
            return Err(Error::Parse {
                record,
                msg: format!("row has {} cells, header has {}", rec.len(), width),
            });
        }
        let fields: Vec<&str> = mapping.iter().map(|&j| &rec[j]).collect();
        rows.push(parse_record(schema, &fields, record)?);
    }
    ClinicalTable::new(schema.clone(), rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FittedColumn {
    Numeric { name: String, mean: f64 },
    Categorical { name: String, vocabulary: Vec<String> },
}

/// Imputation means and one-hot vocabularies fitted on a training table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessModel {
    schema: Schema,
    columns: Vec<FittedColumn>,
    fitted_rows: usize,
}

impl PreprocessModel {
    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn columns(&self) -> &[FittedColumn] {
        &self.columns
    }

    pub fn fitted_rows(&self) -> usize {
        self.fitted_rows
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for col in &self.columns {
            match col {
                FittedColumn::Numeric { name, .. } => names.push(name.clone()),
                FittedColumn::Categorical { name, vocabulary } => {
                    names.extend(vocabulary.iter().map(|t| format!("{name}={t}")))
                }
            }
        }
        names
    }

    fn encode_row(&self, row: &[Cell], out: &mut Vec<f64>) {
        let feature_cols = self
            .schema
            .columns()
            .iter()
            .enumerate()
            .filter(|(_, c)| matches!(c.kind, ColumnKind::Numeric | ColumnKind::Categorical));
        for ((j, _), fitted) in feature_cols.zip(&self.columns) {
            match (fitted, &row[j]) {
                (FittedColumn::Numeric { .. }, Cell::Number(v)) => out.push(*v),
                (FittedColumn::Numeric { mean, .. }, _) => out.push(*mean),
                (FittedColumn::Categorical { vocabulary, .. }, cell) => {
                    let token = match cell {
                        Cell::Token(t) => Some(t.as_str()),
                        _ => None,
                    };
                    out.extend(
                        vocabulary
                            .iter()
                            .map(|v| if Some(v.as_str()) == token { 1.0 } else { 0.0 }),
                    );
                }
            }
        }
    }

    /// Encodes a single parsed record.
    pub fn apply_row(&self, row: &[Cell]) -> Result<FeatureMatrix> {
        if row.len() != self.schema.len() {
            return Err(Error::Schema("record width differs from fitting schema".into()));
        }
        let mut values = Vec::new();
        self.encode_row(row, &mut values);
        let names = self.feature_names();
        FeatureMatrix::new(values, names.len(), names)
    }
}

pub fn fit_preprocess(table: &ClinicalTable) -> Result<PreprocessModel> {
    if table.is_empty() {
        return Err(Error::invalid("cannot fit preprocessing on an empty table"));
    }
    let mut columns = Vec::new();
    for (j, spec) in table.schema().columns().iter().enumerate() {
        match spec.kind {
            ColumnKind::Numeric => {
                let (sum, count) = table
                    .rows()
                    .iter()
                    .filter_map(|r| match r[j] {
                        Cell::Number(v) => Some(v),
                        _ => None,
                    })
                    .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
                if count == 0 {
                    return Err(Error::invalid(format!(
                        "numeric column {:?} is entirely missing",
                        spec.name
                    )));
                }
                columns.push(FittedColumn::Numeric {
                    name: spec.name.clone(),
                    mean: sum / count as f64,
                });
            }
            ColumnKind::Categorical => {
                let mut vocabulary: Vec<String> = Vec::new();
                for row in table.rows() {
                    if let Cell::Token(t) = &row[j] {
                        if !vocabulary.contains(t) {
                            vocabulary.push(t.clone());
                        }
                    }
                }
                columns.push(FittedColumn::Categorical { name: spec.name.clone(), vocabulary });
            }
            ColumnKind::Identifier | ColumnKind::Label => {}
        }
    }
    Ok(PreprocessModel {
        schema: table.schema().clone(),
        columns,
        fitted_rows: table.n_rows(),
    })
}

pub fn apply_preprocess(model: &PreprocessModel, table: &ClinicalTable) -> Result<FeatureMatrix> {
    if table.schema() != model.schema() {
        return Err(Error::Schema("table schema differs from fitting schema".into()));
    }
    let names = model.feature_names();
    let mut values = Vec::with_capacity(table.n_rows() * names.len());
    for row in table.rows() {
        model.encode_row(row, &mut values);
    }
    FeatureMatrix::new(values, names.len(), names)
}

/// Maps raw label text onto class indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelPolicy {
    pub n_classes: usize,
    pub mapping: BTreeMap<String, usize>,
}

impl LabelPolicy {
    pub fn new(mapping: BTreeMap<String, usize>, n_classes: usize) -> Result<Self> {
        let policy = Self { n_classes, mapping };
        policy.validate()?;
        Ok(policy)
    }

    /// Histologic stage 1 -> No Fibrosis, 2-3 -> Fibrosis, 4 -> Cirrhosis.
    pub fn default_stage() -> Self {
        let mapping = [("1", 0), ("2", 1), ("3", 1), ("4", 2)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        Self { n_classes: 3, mapping }
    }

    pub fn identity(n_classes: usize) -> Self {
        let mapping = (0..n_classes).map(|k| (k.to_string(), k)).collect();
        Self { n_classes, mapping }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::invalid("label policy needs at least 2 classes"));
        }
        if let Some((raw, k)) = self.mapping.iter().find(|(_, &k)| k >= self.n_classes) {
            return Err(Error::invalid(format!(
                "label policy maps {raw:?} to {k}, outside {} classes",
                self.n_classes
            )));
        }
        Ok(())
    }

    /// Exact text match first, then numeric equality ("4.0" matches "4").
    pub fn map(&self, raw: &str) -> Option<usize> {
        if let Some(&k) = self.mapping.get(raw) {
            return Some(k);
        }
        let value: f64 = raw.trim().parse().ok()?;
        self.mapping
            .iter()
            .find(|(key, _)| key.trim().parse::<f64>().ok() == Some(value))
            .map(|(_, &k)| k)
    }
}

impl Default for LabelPolicy {
    fn default() -> Self {
        Self::default_stage()
    }
}

pub fn derive_labels(table: &ClinicalTable, policy: &LabelPolicy) -> Result<LabelVector> {
    policy.validate()?;
    let j = table.schema().label_index();
    let labels = table
        .rows()
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let raw = match &row[j] {
                Cell::Token(t) => t.clone(),
                Cell::Number(v) => v.to_string(),
                Cell::Missing => String::from("NA"),
            };
            policy.map(&raw).ok_or_else(|| Error::Parse {
                record: i + 1,
                msg: format!("label {raw:?} is not covered by the label policy"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    LabelVector::new(labels, policy.n_classes)
}

/// Train/validation/test partition of row indices (each part ascending).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
    pub fractions: [f64; 3],
}

pub fn validate_fractions(fractions: [f64; 3]) -> Result<()> {
    if fractions.iter().any(|f| !f.is_finite() || *f <= 0.0) {
        return Err(Error::invalid(format!("split fractions must be positive: {fractions:?}")));
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("split fractions sum to {sum}, not 1")));
    }
    Ok(())
}

/// Largest-remainder apportionment of `n` items; ties go to the earlier part.
fn apportion(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts = [0usize; 3];
    for (c, e) in counts.iter_mut().zip(&exact) {
        *c = e.floor() as usize;
    }
    let assigned: usize = counts.iter().sum();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &part in order.iter().take(n.saturating_sub(assigned)) {
        counts[part] += 1;
    }
    counts
}

/// Stratified split: each class is shuffled with a seeded ChaCha8 stream and
/// apportioned by largest remainder so per-part counts stay within one of
/// `fraction x class count`.
pub fn split_dataset(labels: &LabelVector, fractions: [f64; 3], seed: u64) -> Result<DatasetSplit> {
    validate_fractions(fractions)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: [Vec<usize>; 3] = Default::default();
    for class in 0..labels.n_classes() {
        let mut members: Vec<usize> = labels
            .labels()
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        if members.is_empty() {
            continue;
        }
        let counts = apportion(members.len(), fractions);
        if counts.contains(&0) {
            return Err(Error::invalid(format!(
                "class {class} has {} samples, too few to appear in every split part",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        let mut start = 0;
        for (part, &count) in parts.iter_mut().zip(&counts) {
            part.extend_from_slice(&members[start..start + count]);
            start += count;
        }
    }
    for part in parts.iter_mut() {
        part.sort_unstable();
    }
    let [train, validation, test] = parts;
    Ok(DatasetSplit {
        train,
        validation,
        test,
        seed,
        fractions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Schema {
        Schema::new(vec![
            ColumnSpec::new("id", ColumnKind::Identifier),
            ColumnSpec::new("Bilirubin", ColumnKind::Numeric),
            ColumnSpec::new("Drug", ColumnKind::Categorical),
            ColumnSpec::new("Stage", ColumnKind::Label),
        ])
        .unwrap()
    }

    fn load(text: &str) -> Result<ClinicalTable> {
        load_clinical_csv(text.as_bytes(), &schema())
    }

    #[test]
    fn loads_and_reorders_columns() {
        let t = load("Stage,Drug,id,Bilirubin\n1,A,p1,1.5\n4,B,p2,2\n3,A,p3,0.5\n").unwrap();
        assert_eq!(t.n_rows(), 3);
        assert_eq!(
            t.rows()[0],
            vec![
                Cell::Token("p1".into()),
                Cell::Number(1.5),
                Cell::Token("A".into()),
                Cell::Token("1".into())
            ]
        );
    }

    #[test]
    fn empty_and_na_are_missing() {
        let t = load("id,Bilirubin,Drug,Stage\np1,1,A,1\np2,,NA,2\n").unwrap();
        assert!(t.rows()[1][1].is_missing());
        assert!(t.rows()[1][2].is_missing());
        // "na" is not a missing token
        let t = load("id,Bilirubin,Drug,Stage\np1,1,na,1\n").unwrap();
        assert_eq!(t.rows()[0][2], Cell::Token("na".into()));
    }

    #[test]
    fn load_errors() {
        assert!(matches!(load("id,Bilirubin,Stage\np1,1,1\n"), Err(Error::Schema(_))));
        assert!(matches!(load("id,Bilirubin,Drug,Stage\np1,1,A\n"), Err(Error::Parse { .. })));
        assert!(matches!(load("id,Bilirubin,Drug,Stage\np1,abc,A,1\n"), Err(Error::Parse { .. })));
        assert!(matches!(load("id,Bilirubin,Drug,Stage\np1,inf,A,1\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn row_width_error_on_seventeen_column_schema() {
        let mut cols = vec![ColumnSpec::new("Stage", ColumnKind::Label)];
        cols.extend((0..16).map(|j| ColumnSpec::new(&format!("c{j}"), ColumnKind::Numeric)));
        let schema = Schema::new(cols).unwrap();
        let header: Vec<String> = schema.columns().iter().map(|c| c.name.clone()).collect();
        let full = vec!["1"; 17].join(",");
        let short = vec!["1"; 16].join(",");
        let text = format!("{}\n{full}\n{short}\n", header.join(","));
        match load_clinical_csv(text.as_bytes(), &schema) {
            Err(Error::Parse { record, .. }) => assert_eq!(record, 2),
            other => panic!("expected row-width error, got {other:?}"),
        }
    }

    #[test]
    fn quoted_fields() {
        let t = load("id,Bilirubin,Drug,Stage\n\"p,1\",1,\"D-penicillamine\",1\n").unwrap();
        assert_eq!(t.rows()[0][0], Cell::Token("p,1".into()));
    }

    #[test]
    fn declared_categories_enforced() {
        let schema = Schema::new(vec![
            ColumnSpec::categorical("Sex", &["M", "F"]),
            ColumnSpec::new("Stage", ColumnKind::Label),
        ])
        .unwrap();
        assert!(load_clinical_csv("Sex,Stage\nM,1\n".as_bytes(), &schema).is_ok());
        assert!(load_clinical_csv("Sex,Stage\nX,1\n".as_bytes(), &schema).is_err());
    }

    #[test]
    fn schema_invariants() {
        let label = ColumnSpec::new("y", ColumnKind::Label);
        assert!(Schema::new(vec![label.clone(), label.clone()]).is_err());
        assert!(Schema::new(vec![ColumnSpec::new("x", ColumnKind::Numeric)]).is_err());
        assert!(Schema::new(vec![
            label.clone(),
            ColumnSpec::new("a", ColumnKind::Identifier),
            ColumnSpec::new("b", ColumnKind::Identifier)
        ])
        .is_err());
        assert!(Schema::new(vec![label, ColumnSpec::categorical("c", &[])]).is_err());
    }

    #[test]
    fn drop_rows_missing_drug() {
        let mut text = String::from("id,Bilirubin,Drug,Stage\n");
        for i in 0..10 {
            let drug = if i == 3 || i == 7 { "NA" } else { "A" };
            text.push_str(&format!("p{i},{i},{drug},1\n"));
        }
        let t = load(&text).unwrap();
        let kept = t.drop_rows_missing("Drug").unwrap();
        assert_eq!(kept.n_rows(), 8);
        let ids = kept.ids();
        assert_eq!(ids, vec!["p0", "p1", "p2", "p4", "p5", "p6", "p8", "p9"]);
        assert_eq!(kept.drop_rows_missing("Drug").unwrap(), kept);
        assert!(t.drop_rows_missing("Nope").is_err());
    }

    #[test]
    fn drop_all_missing_gives_empty_table() {
        let t = load("id,Bilirubin,Drug,Stage\np1,1,,1\np2,2,,1\n").unwrap();
        assert!(t.drop_rows_missing("Drug").unwrap().is_empty());
    }

    #[test]
    fn fit_and_apply() {
        let t = load("id,Bilirubin,Drug,Stage\np1,1.0,A,1\np2,,B,2\np3,3.0,A,3\n").unwrap();
        let m = fit_preprocess(&t).unwrap();
        assert_eq!(
            m.columns()[0],
            FittedColumn::Numeric { name: "Bilirubin".into(), mean: 2.0 }
        );
        assert_eq!(
            m.columns()[1],
            FittedColumn::Categorical { name: "Drug".into(), vocabulary: vec!["A".into(), "B".into()] }
        );
        let x = apply_preprocess(&m, &t).unwrap();
        assert_eq!(x.names(), ["Bilirubin", "Drug=A", "Drug=B"]);
        assert_eq!(x.values(), [1.0, 1.0, 0.0, 2.0, 0.0, 1.0, 3.0, 1.0, 0.0]);

        let unseen = load("id,Bilirubin,Drug,Stage\np9,5,C,1\n").unwrap();
        let x = apply_preprocess(&m, &unseen).unwrap();
        assert_eq!(x.values(), [5.0, 0.0, 0.0]);
    }

    #[test]
    fn fit_rejects_all_missing_numeric() {
        let t = load("id,Bilirubin,Drug,Stage\np1,,A,1\np2,NA,A,1\n").unwrap();
        assert!(fit_preprocess(&t).is_err());
    }

    #[test]
    fn apply_rejects_other_schema() {
        let t = load("id,Bilirubin,Drug,Stage\np1,1,A,1\n").unwrap();
        let m = fit_preprocess(&t).unwrap();
        let other = Schema::new(vec![
            ColumnSpec::new("Bilirubin", ColumnKind::Numeric),
            ColumnSpec::new("Stage", ColumnKind::Label),
        ])
        .unwrap();
        let t2 = load_clinical_csv("Bilirubin,Stage\n1,1\n".as_bytes(), &other).unwrap();
        assert!(apply_preprocess(&m, &t2).is_err());
    }

    #[test]
    fn stage_policy() {
        let t = load("id,Bilirubin,Drug,Stage\na,1,A,1\nb,1,A,2\nc,1,A,3.0\nd,1,A,4\n").unwrap();
        let y = derive_labels(&t, &LabelPolicy::default_stage()).unwrap();
        assert_eq!(y.labels(), [0, 1, 1, 2]);

        let t = load("id,Bilirubin,Drug,Stage\na,1,A,0\nb,1,A,2\nc,1,A,1\n").unwrap();
        let y = derive_labels(&t, &LabelPolicy::identity(3)).unwrap();
        assert_eq!(y.labels(), [0, 2, 1]);

        let t = load("id,Bilirubin,Drug,Stage\na,1,A,5\n").unwrap();
        assert!(derive_labels(&t, &LabelPolicy::default_stage()).is_err());
    }

    #[test]
    fn stratified_split_counts() {
        let labels = LabelVector::new((0..300).map(|i| i % 3).collect(), 3).unwrap();
        let s = split_dataset(&labels, [0.6, 0.2, 0.2], 11).unwrap();
        for class in 0..3 {
            let count = |part: &[usize]| part.iter().filter(|&&i| labels.labels()[i] == class).count();
            assert_eq!(count(&s.train), 60);
            assert_eq!(count(&s.validation), 20);
            assert_eq!(count(&s.test), 20);
        }
        assert_eq!(s, split_dataset(&labels, [0.6, 0.2, 0.2], 11).unwrap());
        assert_ne!(s.train, split_dataset(&labels, [0.6, 0.2, 0.2], 12).unwrap().train);
    }

    #[test]
    fn split_rejects_bad_fractions_and_tiny_classes() {
        let labels = LabelVector::new((0..30).map(|i| i % 3).collect(), 3).unwrap();
        assert!(split_dataset(&labels, [0.5, 0.5, 0.1], 0).is_err());
        assert!(split_dataset(&labels, [0.8, 0.2, 0.0], 0).is_err());
        let tiny = LabelVector::new(vec![0, 0, 0, 0, 0, 1, 1], 2).unwrap();
        assert!(split_dataset(&tiny, [0.6, 0.2, 0.2], 0).is_err());
    }

    #[test]
    fn apportion_within_one() {
        assert_eq!(apportion(10, [0.45, 0.45, 0.1]), [5, 4, 1]);
        assert_eq!(apportion(7, [0.6, 0.2, 0.2]), [4, 2, 1]);
    }
}
