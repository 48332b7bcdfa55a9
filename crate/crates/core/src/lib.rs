//! Hybrid liver-fibrosis staging: a boosted-tree clinical branch and a
//! texture-feature image branch, combined by accuracy-weighted soft voting.

pub mod clinical;
pub mod data;
pub mod error;
pub mod experiment;
pub mod fusion;
pub mod gbdt;
pub mod image;
pub mod metrics;
pub mod softmax;

pub use data::{FeatureMatrix, LabelVector, ProbabilityMatrix};
pub use error::{Error, Result};
pub use fusion::{align_by_id, compute_weights, fuse, predict_class, AlignMode, FusionWeights, HybridPrediction, ModalityOutput};
