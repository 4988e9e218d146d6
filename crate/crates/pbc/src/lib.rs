//! Performance-based clustering of labeled data.
//!
//! Feature-space clustering groups points that look alike. This crate instead
//! groups points by which regression model explains them best: an EM-style
//! loop alternates between assigning every point to the cluster whose model
//! incurs the lowest prediction loss on it and refitting each cluster's model
//! on its current members. Clusters therefore correspond to distinct
//! feature-to-target relations rather than to neighborhoods in feature space.
//!
//! For streaming use, the fitted cluster models are combined into a weighted
//! ensemble whose weights are updated by gradient descent after each labeled
//! batch, so the predictor tracks whichever generating mechanism is currently
//! active.
//!
//! Module map:
//! - [`data`]: datasets, assignments, loss functions, and loss accounting
//! - [`learners`]: ridge-linear and MLP regressors behind one fit/predict contract
//! - [`clustering`]: the performance-based clustering loop itself
//! - [`ensemble`]: online weighted-ensemble prediction over streaming batches
//! - [`datagen`]: synthetic multi-relation data, misclassification scoring,
//!   and a feature-space K-Means baseline
//! - [`pipeline`]: CSV ingestion, lag/rolling features, normalization,
//!   temporal splits, and batch formation

pub mod clustering;
pub mod data;
pub mod datagen;
pub mod ensemble;
mod error;
pub mod learners;
pub mod pipeline;

pub use error::{Error, Result};

pub use clustering::{run_pbc, ClusteringResult, CostMatrix, PbcConfig};
pub use data::{dataset_loss, point_loss, Assignment, Dataset, LabeledPoint, LossKind};
pub use datagen::{generate_synthetic, kmeans_baseline, misclassification_rate, SyntheticConfig};
pub use ensemble::{stream_evaluate, Batch, EnsembleState};
pub use learners::{fit, predict, Activation, RegressorSpec, TrainedModel};
pub use pipeline::{FeatureSpec, NormalizationParams, SeriesFrame};
