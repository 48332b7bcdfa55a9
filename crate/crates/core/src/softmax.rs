//! Multinomial logistic regression fitted by seeded mini-batch gradient
//! descent on standardized features.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{softmax_in_place, softmax_rows, FeatureMatrix, LabelVector, ProbabilityMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SoftmaxConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub n_classes: usize,
    pub seed: u64,
}

impl Default for SoftmaxConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch_size: 32,
            learning_rate: 0.1,
            l2: 1e-4,
            n_classes: 3,
            seed: 0,
        }
    }
}

impl SoftmaxConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("softmax config: batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("softmax config: learning_rate must be positive"));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::invalid("softmax config: l2 must be finite and >= 0"));
        }
        if self.n_classes < 2 {
            return Err(Error::invalid("softmax config: n_classes must be at least 2"));
        }
        Ok(())
    }
}

/// Weights are `K x (d + 1)` row-major with the bias in the last column.
/// Inputs are standardized with the stored per-feature mean and std.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxModel {
    config: SoftmaxConfig,
    weights: Vec<f64>,
    n_features: usize,
    feature_mean: Vec<f64>,
    feature_std: Vec<f64>,
    /// Full-batch training loss before the first epoch and after each epoch.
    loss_history: Vec<f64>,
}

impl SoftmaxModel {
    pub fn from_parts(
        config: SoftmaxConfig,
        weights: Vec<f64>,
        feature_mean: Vec<f64>,
        feature_std: Vec<f64>,
    ) -> Result<Self> {
        let n_features = feature_mean.len();
        let model = Self {
            config,
            weights,
            n_features,
            feature_mean,
            feature_std,
            loss_history: Vec::new(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let k = self.config.n_classes;
        if self.weights.len() != k * (self.n_features + 1) {
            return Err(Error::shape(format!(
                "{} weights for {k} classes and {} features",
                self.weights.len(),
                self.n_features
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("softmax weights must be finite"));
        }
        if self.feature_std.len() != self.n_features
            || self.feature_std.iter().any(|s| !(*s > 0.0 && s.is_finite()))
            || self.feature_mean.iter().any(|m| !m.is_finite())
        {
            return Err(Error::invalid("standardization parameters must be finite with std > 0"));
        }
        Ok(())
    }

    pub fn config(&self) -> &SoftmaxConfig {
        &self.config
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.config.n_classes
    }

    pub fn loss_history(&self) -> &[f64] {
        &self.loss_history
    }

    /// Same model with replaced weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        let model = Self { weights, loss_history: Vec::new(), ..self.clone() };
        model.validate()?;
        Ok(model)
    }

    fn check_width(&self, x: &FeatureMatrix) -> Result<()> {
        if x.n_cols() != self.n_features {
            return Err(Error::shape(format!(
                "model expects {} features, got {}",
                self.n_features,
                x.n_cols()
            )));
        }
        Ok(())
    }

    fn standardize(&self, x: &FeatureMatrix) -> Vec<f64> {
        standardize(x, &self.feature_mean, &self.feature_std)
    }

    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<ProbabilityMatrix> {
        self.check_width(x)?;
        let xs = self.standardize(x);
        let margins = margins(&self.weights, &xs, self.n_features, self.config.n_classes);
        Ok(softmax_rows(&margins, self.config.n_classes))
    }
}

fn fit_standardizer(x: &FeatureMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = x.n_rows() as f64;
    let d = x.n_cols();
    let mut mean = vec![0.0; d];
    for row in x.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for row in x.rows() {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var
        .into_iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > 0.0 && sd.is_finite() {
                sd
            } else {
                1.0
            }
        })
        .collect();
    (mean, std)
}

fn standardize(x: &FeatureMatrix, mean: &[f64], std: &[f64]) -> Vec<f64> {
    x.rows()
        .flat_map(|row| row.iter().zip(mean).zip(std).map(|((v, m), s)| (v - m) / s))
        .collect()
}

fn margins(weights: &[f64], xs: &[f64], d: usize, k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len() / d.max(1) * k);
    let n = xs.len().checked_div(d).unwrap_or(0);
    for i in 0..n {
        let row = &xs[i * d..(i + 1) * d];
        for c in 0..k {
            let w = &weights[c * (d + 1)..(c + 1) * (d + 1)];
            let dot: f64 = w[..d].iter().zip(row).map(|(a, b)| a * b).sum();
            out.push(dot + w[d]);
        }
    }
    out
}

/// Mean cross-entropy plus `l2 * sum(non-bias w^2)` over `rows`, and its
/// gradient with respect to the weights.
fn objective(
    weights: &[f64],
    xs: &[f64],
    labels: &[usize],
    rows: &[usize],
    d: usize,
    k: usize,
    l2: f64,
) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; k * (d + 1)];
    let mut loss = 0.0;
    let mut scores = vec![0.0; k];
    for &i in rows {
        let row = &xs[i * d..(i + 1) * d];
        for (c, s) in scores.iter_mut().enumerate() {
            let w = &weights[c * (d + 1)..(c + 1) * (d + 1)];
            *s = w[..d].iter().zip(row).map(|(a, b)| a * b).sum::<f64>() + w[d];
        }
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln() + max;
        loss += lse - scores[labels[i]];
        softmax_in_place(&mut scores);
        for (c, p) in scores.iter().enumerate() {
            let r = p - if labels[i] == c { 1.0 } else { 0.0 };
            let g = &mut grad[c * (d + 1)..(c + 1) * (d + 1)];
            for (gj, xj) in g[..d].iter_mut().zip(row) {
                *gj += r * xj;
            }
            g[d] += r;
        }
    }
    let m = rows.len() as f64;
    loss /= m;
    grad.iter_mut().for_each(|g| *g /= m);
    for c in 0..k {
        for j in 0..d {
            let w = weights[c * (d + 1) + j];
            loss += l2 * w * w;
            grad[c * (d + 1) + j] += 2.0 * l2 * w;
        }
    }
    (loss, grad)
}

fn check_training_data(x: &FeatureMatrix, y: &LabelVector, k: usize) -> Result<()> {
    if x.n_rows() == 0 {
        return Err(Error::invalid("cannot train on an empty dataset"));
    }
    if y.len() != x.n_rows() {
        return Err(Error::shape(format!("{} feature rows but {} labels", x.n_rows(), y.len())));
    }
    if let Some(&bad) = y.labels().iter().find(|&&l| l >= k) {
        return Err(Error::invalid(format!("label {bad} out of range for {k} classes")));
    }
    Ok(())
}

/// Full-batch regularized loss and gradient of `model` on `(x, y)`.
pub fn loss_and_gradient(model: &SoftmaxModel, x: &FeatureMatrix, y: &LabelVector) -> Result<(f64, Vec<f64>)> {
    model.check_width(x)?;
    check_training_data(x, y, model.config.n_classes)?;
    let xs = model.standardize(x);
    let rows: Vec<usize> = (0..x.n_rows()).collect();
    Ok(objective(
        &model.weights,
        &xs,
        y.labels(),
        &rows,
        model.n_features,
        model.config.n_classes,
        model.config.l2,
    ))
}

pub fn train_softmax(x: &FeatureMatrix, y: &LabelVector, config: &SoftmaxConfig) -> Result<SoftmaxModel> {
    config.validate()?;
    let k = config.n_classes;
    check_training_data(x, y, k)?;
    let n = x.n_rows();
    let d = x.n_cols();
    let (feature_mean, feature_std) = fit_standardizer(x);
    let xs = standardize(x, &feature_mean, &feature_std);
    let labels = y.labels();
    let all: Vec<usize> = (0..n).collect();

    let mut weights = vec![0.0; k * (d + 1)];
    let full_loss = |w: &[f64]| objective(w, &xs, labels, &all, d, k, config.l2).0;
    let mut loss_history = vec![full_loss(&weights)];

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order = all.clone();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let (_, grad) = objective(&weights, &xs, labels, batch, d, k, config.l2);
            for (w, g) in weights.iter_mut().zip(&grad) {
                *w -= config.learning_rate * g;
            }
        }
        let loss = full_loss(&weights);
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("training loss became non-finite at epoch {epoch}")));
        }
        loss_history.push(loss);
    }

    Ok(SoftmaxModel {
        config: config.clone(),
        weights,
        n_features: d,
        feature_mean,
        feature_std,
        loss_history,
    })
}
