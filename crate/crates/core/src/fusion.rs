//! Accuracy-weighted soft voting over per-modality probability matrices.
//!
//! Each modality `k` contributes a row-stochastic matrix `P_k` and a
//! validation accuracy `A_k`. Weights are `w_k = A_k / sum_j A_j` and the
//! hybrid probability of class `c` for sample `i` is `sum_k w_k P_k(i, c)`.
//! The predicted class is the row argmax, ties going to the lowest index.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::ProbabilityMatrix;
use crate::error::{Error, Result};

/// Probabilities and validation accuracy produced by one modality's model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityOutput {
    modality: String,
    accuracy: f64,
    ids: Vec<String>,
    probs: ProbabilityMatrix,
}

impl ModalityOutput {
    pub fn new(modality: impl Into<String>, accuracy: f64, ids: Vec<String>, probs: ProbabilityMatrix) -> Result<Self> {
        let modality = modality.into();
        check_accuracy(accuracy)?;
        if ids.len() != probs.n_rows() {
            return Err(Error::shape(format!(
                "modality {modality:?}: {} ids for {} probability rows",
                ids.len(),
                probs.n_rows()
            )));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::invalid(format!("modality {modality:?}: duplicate sample id {dup:?}")));
        }
        Ok(Self { modality, accuracy, ids, probs })
    }

    pub fn modality(&self) -> &str {
        &self.modality
    }

    pub fn accuracy(&self) -> f64 {
        self.accuracy
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn probs(&self) -> &ProbabilityMatrix {
        &self.probs
    }

    pub fn n_classes(&self) -> usize {
        self.probs.n_classes()
    }

    /// Rows for `ids`, in that order. Every id must be present.
    fn restrict(&self, ids: &[String]) -> Self {
        let index: std::collections::HashMap<&str, usize> =
            self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let rows: Vec<usize> = ids.iter().map(|id| index[id.as_str()]).collect();
        Self {
            modality: self.modality.clone(),
            accuracy: self.accuracy,
            ids: ids.to_vec(),
            probs: self.probs.select_rows(&rows),
        }
    }
}

fn check_accuracy(a: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::invalid(format!("accuracy {a} outside [0, 1]")));
    }
    Ok(())
}

/// Convex per-modality weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights(Vec<f64>);

impl FusionWeights {
    /// Explicit weights; must be non-negative and sum to 1 within 1e-12.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("fusion weights must be finite and non-negative"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("fusion weights sum to {sum}, not 1")));
        }
        Ok(Self(weights))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `w_k = A_k / sum_j A_j`; for two modalities this is the blood-test and
/// image weight pair.
pub fn compute_weights(accuracies: &[f64]) -> Result<FusionWeights> {
    if accuracies.len() < 2 {
        return Err(Error::invalid("fusion needs at least two modality accuracies"));
    }
    for &a in accuracies {
        check_accuracy(a)?;
    }
    let total: f64 = accuracies.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("all modality accuracies are zero"));
    }
    Ok(FusionWeights(accuracies.iter().map(|a| a / total).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AlignMode {
    /// Any id-set difference aborts fusion.
    #[default]
    Strict,
    /// Keep only ids present in every modality.
    Intersect,
}

impl FromStr for AlignMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(AlignMode::Strict),
            "intersect" => Ok(AlignMode::Intersect),
            other => Err(Error::invalid(format!("unknown alignment mode {other:?}"))),
        }
    }
}

impl fmt::Display for AlignMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlignMode::Strict => "strict",
            AlignMode::Intersect => "intersect",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// Outputs restricted to the shared ids, rows sorted by id.
    pub outputs: Vec<ModalityOutput>,
    /// Rows dropped from each modality, in input order.
    pub dropped: Vec<usize>,
}

impl Alignment {
    pub fn total_dropped(&self) -> usize {
        self.dropped.iter().sum()
    }
}

pub fn align_by_id(outputs: &[ModalityOutput], mode: AlignMode) -> Result<Alignment> {
    if outputs.len() < 2 {
        return Err(Error::Alignment("fusion needs at least two modalities".into()));
    }
    let k = outputs[0].n_classes();
    if let Some(o) = outputs.iter().find(|o| o.n_classes() != k) {
        return Err(Error::Alignment(format!(
            "modality {:?} has {} classes, expected {k}",
            o.modality(),
            o.n_classes()
        )));
    }
    let sets: Vec<BTreeSet<&str>> = outputs
        .iter()
        .map(|o| o.ids().iter().map(String::as_str).collect())
        .collect();
    let shared: BTreeSet<&str> = sets[0]
        .iter()
        .copied()
        .filter(|id| sets[1..].iter().all(|s| s.contains(id)))
        .collect();
    if mode == AlignMode::Strict {
        if let Some((o, _)) = outputs.iter().zip(&sets).find(|(_, s)| **s != sets[0]) {
            return Err(Error::Alignment(format!(
                "sample ids of {:?} differ from {:?}",
                o.modality(),
                outputs[0].modality()
            )));
        }
    }
    if shared.is_empty() {
        return Err(Error::Alignment("modalities share no sample ids".into()));
    }
    let ids: Vec<String> = shared.iter().map(|s| s.to_string()).collect();
    Ok(Alignment {
        dropped: outputs.iter().map(|o| o.ids().len() - ids.len()).collect(),
        outputs: outputs.iter().map(|o| o.restrict(&ids)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridPrediction {
    pub ids: Vec<String>,
    pub probs: ProbabilityMatrix,
    pub classes: Vec<usize>,
}

/// Argmax with exact ties resolved to the lowest class index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (c, &p) in row.iter().enumerate().skip(1) {
        if p > row[best] {
            best = c;
        }
    }
    best
}

pub fn predict_class(probs: &ProbabilityMatrix) -> Vec<usize> {
    probs.rows().map(argmax).collect()
}

/// Weighted sum of aligned modality matrices.
///
/// Evaluated as `P_1 + sum_{k>=2} w_k (P_k - P_1)`, equal to
/// `sum_k w_k P_k` for weights summing to one, so agreeing modalities
/// reproduce their common matrix bit for bit. Each entry is then clamped to
/// the per-entry range of its inputs to absorb rounding.
pub fn fuse(outputs: &[ModalityOutput], weights: &FusionWeights) -> Result<HybridPrediction> {
    let first = outputs
        .first()
        .ok_or_else(|| Error::Alignment("nothing to fuse".into()))?;
    if weights.len() != outputs.len() {
        return Err(Error::invalid(format!(
            "{} weights for {} modalities",
            weights.len(),
            outputs.len()
        )));
    }
    let k = first.n_classes();
    for o in &outputs[1..] {
        if o.n_classes() != k || o.ids() != first.ids() {
            return Err(Error::Alignment(format!(
                "modality {:?} is not aligned with {:?}",
                o.modality(),
                first.modality()
            )));
        }
    }
    let w = weights.as_slice();
    let base = first.probs().values();
    let fused: Vec<f64> = base
        .iter()
        .enumerate()
        .map(|(idx, &p1)| {
            let (mut lo, mut hi) = (p1, p1);
            let mut acc = p1;
            for (o, wk) in outputs[1..].iter().zip(&w[1..]) {
                let pk = o.probs().values()[idx];
                acc += wk * (pk - p1);
                lo = lo.min(pk);
                hi = hi.max(pk);
            }
            acc.clamp(lo, hi)
        })
        .collect();
    let probs = ProbabilityMatrix::new(fused, k)?;
    Ok(HybridPrediction {
        ids: first.ids().to_vec(),
        classes: predict_class(&probs),
        probs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn output(name: &str, acc: f64, ids: &[&str], rows: &[Vec<f64>]) -> ModalityOutput {
        ModalityOutput::new(
            name,
            acc,
            ids.iter().map(|s| s.to_string()).collect(),
            ProbabilityMatrix::from_rows(rows).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn weights_from_reported_accuracies() {
        let w = compute_weights(&[0.9580, 0.9071]).unwrap();
        assert!((w.as_slice()[0] - 0.513645).abs() < 1e-6);
        assert!((w.as_slice()[1] - 0.486355).abs() < 1e-6);
    }

    #[test]
    fn weights_symmetry_and_scale() {
        assert_eq!(compute_weights(&[0.7, 0.7]).unwrap().as_slice(), [0.5, 0.5]);
        let a = compute_weights(&[0.4, 0.2]).unwrap();
        let b = compute_weights(&[0.8, 0.4]).unwrap();
        assert_eq!(a, b);
        assert!((a.as_slice()[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn weights_errors() {
        assert!(compute_weights(&[0.5]).is_err());
        assert!(compute_weights(&[1.2, 0.5]).is_err());
        assert!(compute_weights(&[-0.1, 0.5]).is_err());
        assert!(compute_weights(&[0.0, 0.0]).is_err());
        assert!(compute_weights(&[f64::NAN, 0.5]).is_err());
    }

    #[test]
    fn strict_alignment_reorders() {
        let a = output("a", 0.9, &["y", "x"], &[vec![0.1, 0.9], vec![0.8, 0.2]]);
        let b = output("b", 0.8, &["x", "y"], &[vec![0.6, 0.4], vec![0.3, 0.7]]);
        let al = align_by_id(&[a, b], AlignMode::Strict).unwrap();
        assert_eq!(al.outputs[0].ids(), ["x", "y"]);
        assert_eq!(al.outputs[0].probs().row(0), [0.8, 0.2]);
        assert_eq!(al.outputs[1].probs().row(0), [0.6, 0.4]);
        assert_eq!(al.dropped, [0, 0]);
    }

    #[test]
    fn strict_mismatch_stops() {
        let a = output("a", 0.9, &["a", "b"], &vec![vec![0.5, 0.5]; 2]);
        let b = output("b", 0.9, &["a", "c"], &vec![vec![0.5, 0.5]; 2]);
        assert!(matches!(align_by_id(&[a, b], AlignMode::Strict), Err(Error::Alignment(_))));
    }

    #[test]
    fn intersect_drops() {
        let a = output("a", 0.9, &["a", "b", "c"], &vec![vec![0.5, 0.5]; 3]);
        let b = output("b", 0.9, &["a", "c", "d"], &vec![vec![0.5, 0.5]; 3]);
        let al = align_by_id(&[a.clone(), b.clone()], AlignMode::Intersect).unwrap();
        assert_eq!(al.outputs[0].ids(), ["a", "c"]);
        assert_eq!(al.outputs[1].ids(), ["a", "c"]);
        assert_eq!(al.total_dropped(), 2);
        let c = output("c", 0.9, &["z"], &[vec![0.5, 0.5]]);
        assert!(align_by_id(&[a, c], AlignMode::Intersect).is_err());
    }

    #[test]
    fn class_count_mismatch() {
        let a = output("a", 0.9, &["a"], &[vec![0.5, 0.5]]);
        let b = output("b", 0.9, &["a"], &[vec![0.2, 0.3, 0.5]]);
        assert!(align_by_id(&[a, b], AlignMode::Intersect).is_err());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let probs = ProbabilityMatrix::from_rows(&vec![vec![0.5, 0.5]; 2]).unwrap();
        assert!(ModalityOutput::new("a", 0.5, vec!["x".into(), "x".into()], probs).is_err());
    }

    #[test]
    fn weighted_sum_by_hand() {
        let a = output("a", 0.6, &["s"], &[vec![0.7, 0.2, 0.1]]);
        let b = output("b", 0.4, &["s"], &[vec![0.2, 0.5, 0.3]]);
        let w = FusionWeights::new(vec![0.6, 0.4]).unwrap();
        let h = fuse(&[a, b], &w).unwrap();
        for (got, want) in h.probs.row(0).iter().zip([0.50, 0.32, 0.18]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(h.classes, [0]);
    }

    #[test]
    fn degenerate_weights_and_equal_inputs() {
        let rows = vec![vec![0.13, 0.29, 0.58], vec![0.6, 0.3, 0.1]];
        let a = output("a", 0.9, &["p", "q"], &rows);
        let b = output("b", 0.9, &["p", "q"], &[vec![0.3, 0.3, 0.4], vec![0.1, 0.1, 0.8]]);
        let h = fuse(&[a.clone(), b], &FusionWeights::new(vec![1.0, 0.0]).unwrap()).unwrap();
        assert_eq!(h.probs.to_rows(), rows);

        let same = output("c", 0.1, &["p", "q"], &rows);
        let w = compute_weights(&[0.9580, 0.9071]).unwrap();
        let h = fuse(&[a, same], &w).unwrap();
        assert_eq!(h.probs.to_rows(), rows);
    }

    #[test]
    fn fuse_requires_alignment() {
        let a = output("a", 0.9, &["p", "q"], &vec![vec![0.5, 0.5]; 2]);
        let b = output("b", 0.9, &["q", "p"], &vec![vec![0.5, 0.5]; 2]);
        let w = FusionWeights::new(vec![0.5, 0.5]).unwrap();
        assert!(fuse(&[a.clone(), b], &w).is_err());
        assert!(fuse(&[a.clone(), a.clone()], &FusionWeights::new(vec![1.0]).unwrap()).is_err());
    }

    #[test]
    fn tie_rule() {
        assert_eq!(argmax(&[0.2, 0.5, 0.3]), 1);
        assert_eq!(argmax(&[0.4, 0.4, 0.2]), 0);
        assert_eq!(argmax(&[1.0 / 3.0; 3]), 0);
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
    }
}
