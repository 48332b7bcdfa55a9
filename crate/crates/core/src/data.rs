//! Dense containers shared by every stage of the pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on row sums accepted from probability producers.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

/// Row-major `n x d` design matrix with one name per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    values: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
    names: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(values: Vec<f64>, n_cols: usize, names: Vec<String>) -> Result<Self> {
        if names.len() != n_cols {
            return Err(Error::shape(format!(
                "{} feature names for {} columns",
                names.len(),
                n_cols
            )));
        }
        if n_cols == 0 {
            if !values.is_empty() {
                return Err(Error::shape("values supplied for zero columns"));
            }
            return Ok(Self { values, n_rows: 0, n_cols, names });
        }
        if !values.len().is_multiple_of(n_cols) {
            return Err(Error::shape(format!(
                "{} values do not fill rows of width {}",
                values.len(),
                n_cols
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite feature value at row {}, column {}",
                pos / n_cols,
                pos % n_cols
            )));
        }
        let n_rows = values.len() / n_cols;
        Ok(Self { values, n_rows, n_cols, names })
    }

    /// Builds a matrix from equal-length rows, naming columns `f_0..f_{d-1}`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::shape("ragged feature rows"));
        }
        let names = (0..n_cols).map(|j| format!("f_{j}")).collect();
        Self::new(rows.concat(), n_cols, names)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.n_cols);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Self {
            values,
            n_rows: indices.len(),
            n_cols: self.n_cols,
            names: self.names.clone(),
        }
    }

    /// Applies `f` to every entry of column `j`. The result must stay finite.
    pub fn map_column(&self, j: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut values = self.values.clone();
        for i in 0..self.n_rows {
            values[i * self.n_cols + j] = f(values[i * self.n_cols + j]);
        }
        Self::new(values, self.n_cols, self.names.clone())
    }
}

/// Class labels in `0..n_classes`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector {
    labels: Vec<usize>,
    n_classes: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::invalid(format!("need at least 2 classes, got {n_classes}")));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        Ok(Self { labels, n_classes })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
        }
    }
}

/// Row-stochastic `n x K` matrix of class probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityMatrix {
    values: Vec<f64>,
    n_rows: usize,
    n_classes: usize,
}

impl ProbabilityMatrix {
    /// Validates entries in `[0, 1]` and row sums within [`ROW_SUM_TOLERANCE`].
    pub fn new(values: Vec<f64>, n_classes: usize) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::invalid(format!("need at least 2 classes, got {n_classes}")));
        }
        if !values.len().is_multiple_of(n_classes) {
            return Err(Error::shape(format!(
                "{} probabilities do not fill rows of width {}",
                values.len(),
                n_classes
            )));
        }
        for (i, row) in values.chunks(n_classes).enumerate() {
            check_stochastic_row(i, row)?;
        }
        let n_rows = values.len() / n_classes;
        Ok(Self { values, n_rows, n_classes })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::shape("ragged probability rows"));
        }
        Self::new(rows.concat(), k)
    }

    /// Wraps softmax output, which is stochastic by construction.
    pub(crate) fn from_softmax(values: Vec<f64>, n_classes: usize) -> Self {
        debug_assert_eq!(values.len() % n_classes, 0);
        let n_rows = values.len() / n_classes;
        Self { values, n_rows, n_classes }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_classes..(i + 1) * self.n_classes]
    }

    pub fn get(&self, i: usize, c: usize) -> f64 {
        self.values[i * self.n_classes + c]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.n_classes);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Self {
            values,
            n_rows: indices.len(),
            n_classes: self.n_classes,
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }
}

pub(crate) fn check_stochastic_row(i: usize, row: &[f64]) -> Result<()> {
    if row.iter().any(|p| !p.is_finite() || !(0.0..=1.0).contains(p)) {
        return Err(Error::invalid(format!(
            "row {i} has a probability outside [0, 1]"
        )));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(Error::invalid(format!(
            "row {i} sums to {sum}, not 1 within {ROW_SUM_TOLERANCE}"
        )));
    }
    Ok(())
}

/// Max-subtracted softmax, in place.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Row-wise softmax of an `n x K` margin buffer.
pub fn softmax_rows(margins: &[f64], n_classes: usize) -> ProbabilityMatrix {
    let mut values = margins.to_vec();
    for row in values.chunks_mut(n_classes) {
        softmax_in_place(row);
    }
    ProbabilityMatrix::from_softmax(values, n_classes)
}
