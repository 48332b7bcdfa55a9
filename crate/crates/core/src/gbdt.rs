//! Multiclass gradient-boosted decision trees.
//!
//! Softmax cross-entropy objective with second-order (Newton) boosting: each
//! round computes per-class gradients `g = p - 1[y = k]` and hessians
//! `h = p (1 - p)` from the current margins, then grows one regression tree
//! per class by exact greedy search over sorted unique feature values.
//!
//! Split gain for a candidate partition is
//!
//! ```text
//! 1/2 [ G_L^2 / (H_L + l2) + G_R^2 / (H_R + l2) - G^2 / (H + l2) ] - gamma
//! ```
//!
//! and leaves carry `-G / (H + l2)`. Candidate thresholds are midpoints
//! between adjacent distinct values and rows with `x < threshold` go left.
//! Gain ties resolve toward the lower feature index, then the lower threshold.

use serde::{Deserialize, Serialize};

use crate::data::{softmax_rows, FeatureMatrix, LabelVector, ProbabilityMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtConfig {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    /// L2 penalty on leaf weights (lambda).
    pub l2_leaf: f64,
    /// Minimum gain required for a split (gamma).
    pub split_gain_penalty: f64,
    pub min_child_hessian: f64,
    pub n_classes: usize,
    /// Recorded with the model; training has no stochastic steps.
    pub seed: u64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        Self {
            rounds: 200,
            learning_rate: 0.1,
            max_depth: 6,
            l2_leaf: 1.0,
            split_gain_penalty: 0.0,
            min_child_hessian: 1.0,
            n_classes: 3,
            seed: 0,
        }
    }
}

impl GbdtConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::invalid(format!("gbdt config: {what}")));
        if self.rounds == 0 {
            return bad("rounds must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1");
        }
        if !(self.l2_leaf >= 0.0 && self.l2_leaf.is_finite()) {
            return bad("l2_leaf must be finite and >= 0");
        }
        if !(self.split_gain_penalty >= 0.0 && self.split_gain_penalty.is_finite()) {
            return bad("split_gain_penalty must be finite and >= 0");
        }
        if !(self.min_child_hessian >= 0.0 && self.min_child_hessian.is_finite()) {
            return bad("min_child_hessian must be finite and >= 0");
        }
        if self.n_classes < 2 {
            return bad("n_classes must be at least 2");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        weight: f64,
    },
}

/// Regression tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn new(nodes: Vec<Node>) -> Result<Self> {
        let tree = Self { nodes };
        tree.check(usize::MAX, usize::MAX)?;
        Ok(tree)
    }

    pub fn leaf(weight: f64) -> Self {
        Self { nodes: vec![Node::Leaf { weight }] }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf_weight(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { weight } => return weight,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[feature] < threshold { left } else { right };
                }
            }
        }
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Structural check: every child index refers forward to an existing
    /// node, thresholds and weights are finite, features are below
    /// `n_features`, and depth stays within `max_depth`.
    pub fn check(&self, n_features: usize, max_depth: usize) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::invalid("empty decision tree"));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            match *node {
                Node::Leaf { weight } if !weight.is_finite() => {
                    return Err(Error::invalid(format!("node {i}: non-finite leaf weight")))
                }
                Node::Split { feature, threshold, left, right } => {
                    if !threshold.is_finite() {
                        return Err(Error::invalid(format!("node {i}: non-finite threshold")));
                    }
                    if feature >= n_features {
                        return Err(Error::invalid(format!("node {i}: feature {feature} out of range")));
                    }
                    if left <= i || right <= i || left >= self.nodes.len() || right >= self.nodes.len() {
                        return Err(Error::invalid(format!("node {i}: bad child index")));
                    }
                }
                _ => {}
            }
        }
        if self.depth() > max_depth {
            return Err(Error::invalid(format!("tree depth {} exceeds {max_depth}", self.depth())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    config: GbdtConfig,
    base_margin: Vec<f64>,
    /// `trees[round][class]`
    trees: Vec<Vec<DecisionTree>>,
    n_features: usize,
    /// Mean training log-loss before boosting and after each round.
    loss_history: Vec<f64>,
}

impl GbdtModel {
    pub fn config(&self) -> &GbdtConfig {
        &self.config
    }

    pub fn trees(&self) -> &[Vec<DecisionTree>] {
        &self.trees
    }

    pub fn base_margin(&self) -> &[f64] {
        &self.base_margin
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

    /// Assembles a model from parts, checking grid shape and every tree.
    pub fn from_parts(
        config: GbdtConfig,
        base_margin: Vec<f64>,
        trees: Vec<Vec<DecisionTree>>,
        n_features: usize,
    ) -> Result<Self> {
        let model = Self { config, base_margin, trees, n_features, loss_history: Vec::new() };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let k = self.config.n_classes;
        if self.base_margin.len() != k || self.base_margin.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("base margin must hold one finite value per class"));
        }
        if self.trees.len() != self.config.rounds || self.trees.iter().any(|r| r.len() != k) {
            return Err(Error::invalid(format!(
                "tree grid must be {} rounds x {k} classes",
                self.config.rounds
            )));
        }
        for tree in self.trees.iter().flatten() {
            tree.check(self.n_features, self.config.max_depth)?;
        }
        Ok(())
    }

    /// `n x K` margins, row-major.
    pub fn predict_margin(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.n_features {
            return Err(Error::shape(format!(
                "model expects {} features, got {}",
                self.n_features,
                x.n_cols()
            )));
        }
        let k = self.config.n_classes;
        let lr = self.config.learning_rate;
        let mut out = Vec::with_capacity(x.n_rows() * k);
        for row in x.rows() {
            for class in 0..k {
                let sum: f64 = self.trees.iter().map(|round| round[class].leaf_weight(row)).sum();
                out.push(self.base_margin[class] + lr * sum);
            }
        }
        Ok(out)
    }

    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<ProbabilityMatrix> {
        let margins = self.predict_margin(x)?;
        Ok(softmax_rows(&margins, self.config.n_classes))
    }
}

fn mean_log_loss(margins: &[f64], labels: &[usize], k: usize) -> f64 {
    let total: f64 = margins
        .chunks(k)
        .zip(labels)
        .map(|(m, &y)| {
            let max = m.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
            lse - m[y]
        })
        .sum();
    total / labels.len() as f64
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo / 2.0 + hi / 2.0;
    // adjacent floats have no representable midpoint above `lo`
    if mid > lo && mid <= hi {
        mid
    } else {
        hi
    }
}

struct SplitCandidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct TreeGrower<'a> {
    x: &'a FeatureMatrix,
    grad: &'a [f64],
    hess: &'a [f64],
    config: &'a GbdtConfig,
    nodes: Vec<Node>,
    goes_left: Vec<bool>,
}

impl TreeGrower<'_> {
    fn leaf_weight(&self, g: f64, h: f64) -> f64 {
        let denom = h + self.config.l2_leaf;
        if denom > 0.0 {
            -g / denom
        } else {
            0.0
        }
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        let denom = h + self.config.l2_leaf;
        if denom > 0.0 {
            g * g / denom
        } else {
            0.0
        }
    }

    fn best_split(&self, sorted: &[Vec<usize>], g: f64, h: f64) -> Option<SplitCandidate> {
        let lambda = self.config.l2_leaf;
        let min_h = self.config.min_child_hessian;
        let parent = self.score(g, h);
        let mut best: Option<SplitCandidate> = None;
        for (feature, order) in sorted.iter().enumerate() {
            let (mut gl, mut hl) = (0.0, 0.0);
            for pair in order.windows(2) {
                let (a, b) = (pair[0], pair[1]);
                gl += self.grad[a];
                hl += self.hess[a];
                let (va, vb) = (self.x.get(a, feature), self.x.get(b, feature));
                if va >= vb {
                    continue;
                }
                let (gr, hr) = (g - gl, h - hl);
                if hl < min_h || hr < min_h || hl + lambda <= 0.0 || hr + lambda <= 0.0 {
                    continue;
                }
                let gain = 0.5 * (self.score(gl, hl) + self.score(gr, hr) - parent)
                    - self.config.split_gain_penalty;
                if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(SplitCandidate { feature, threshold: midpoint(va, vb), gain });
                }
            }
        }
        best
    }

    /// Grows the subtree for `members` (ascending sample indices) with
    /// `sorted[f]` holding the same samples ordered by feature `f`.
    fn grow(&mut self, members: Vec<usize>, sorted: Vec<Vec<usize>>, depth: usize) -> usize {
        let g: f64 = members.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = members.iter().map(|&i| self.hess[i]).sum();
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { weight: self.leaf_weight(g, h) });
        if depth >= self.config.max_depth || members.len() < 2 {
            return at;
        }
        let Some(split) = self.best_split(&sorted, g, h) else {
            return at;
        };
        for &i in &members {
            self.goes_left[i] = self.x.get(i, split.feature) < split.threshold;
        }
        let (left_members, right_members): (Vec<usize>, Vec<usize>) =
            members.iter().partition(|&&i| self.goes_left[i]);
        let mut left_sorted = Vec::with_capacity(sorted.len());
        let mut right_sorted = Vec::with_capacity(sorted.len());
        for order in sorted {
            let (l, r): (Vec<usize>, Vec<usize>) = order.into_iter().partition(|&i| self.goes_left[i]);
            left_sorted.push(l);
            right_sorted.push(r);
        }
        let left = self.grow(left_members, left_sorted, depth + 1);
        let right = self.grow(right_members, right_sorted, depth + 1);
        self.nodes[at] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
        at
    }
}

pub fn train_gbdt(x: &FeatureMatrix, y: &LabelVector, config: &GbdtConfig) -> Result<GbdtModel> {
    config.validate()?;
    let n = x.n_rows();
    let d = x.n_cols();
    let k = config.n_classes;
    if n == 0 {
        return Err(Error::invalid("cannot train on an empty dataset"));
    }
    if d == 0 {
        return Err(Error::invalid("cannot train without features"));
    }
    if y.len() != n {
        return Err(Error::shape(format!("{n} feature rows but {} labels", y.len())));
    }
    if let Some(&bad) = y.labels().iter().find(|&&l| l >= k) {
        return Err(Error::invalid(format!("label {bad} out of range for {k} classes")));
    }
    let labels = y.labels();

    let root_sorted: Vec<Vec<usize>> = (0..d)
        .map(|f| {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
            order
        })
        .collect();

    let base_margin = vec![0.0; k];
    let mut weight_sums = vec![0.0; n * k];
    let margins_of = |sums: &[f64]| -> Vec<f64> {
        sums.iter()
            .enumerate()
            .map(|(idx, s)| base_margin[idx % k] + config.learning_rate * s)
            .collect()
    };

    let mut margins = margins_of(&weight_sums);
    let mut loss_history = vec![mean_log_loss(&margins, labels, k)];
    let mut trees = Vec::with_capacity(config.rounds);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];

    for round in 0..config.rounds {
        let probs = softmax_rows(&margins, k);
        let mut round_trees = Vec::with_capacity(k);
        for class in 0..k {
            for i in 0..n {
                let p = probs.get(i, class);
                let target = if labels[i] == class { 1.0 } else { 0.0 };
                grad[i] = p - target;
                hess[i] = p * (1.0 - p);
            }
            let mut grower = TreeGrower {
                x,
                grad: &grad,
                hess: &hess,
                config,
                nodes: Vec::new(),
                goes_left: vec![false; n],
            };
            grower.grow((0..n).collect(), root_sorted.clone(), 0);
            let tree = DecisionTree { nodes: grower.nodes };
            for i in 0..n {
                weight_sums[i * k + class] += tree.leaf_weight(x.row(i));
            }
            round_trees.push(tree);
        }
        trees.push(round_trees);
        margins = margins_of(&weight_sums);
        let loss = mean_log_loss(&margins, labels, k);
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("training loss became non-finite at round {round}")));
        }
        loss_history.push(loss);
    }

    Ok(GbdtModel {
        config: config.clone(),
        base_margin,
        trees,
        n_features: d,
        loss_history,
    })
}
