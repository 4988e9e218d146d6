//! Core domain types: labeled points, datasets, cluster assignments, and the
//! loss functions every other module is defined in terms of.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{predict, TrainedModel};

/// One observation: a feature vector paired with a scalar target.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint {
    features: Vec<f64>,
    target: f64,
}

impl LabeledPoint {
    /// Builds a point, rejecting NaN or infinite components up front so that
    /// downstream argmins and gradients can assume finiteness.
    pub fn new(features: Vec<f64>, target: f64) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::InvalidInput("feature vector must be nonempty".into()));
        }
        if !target.is_finite() || features.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(
                "labeled point contains a non-finite value".into(),
            ));
        }
        Ok(Self { features, target })
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    pub fn dimension(&self) -> usize {
        self.features.len()
    }
}

/// An ordered collection of points sharing one feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<LabeledPoint>,
    dimension: usize,
}

impl Dataset {
    /// Builds a dataset with an explicit dimension; every point must match it.
    pub fn new(points: Vec<LabeledPoint>, dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if let Some((i, p)) = points
            .iter()
            .enumerate()
            .find(|(_, p)| p.dimension() != dimension)
        {
            return Err(Error::InvalidInput(format!(
                "point {i} has dimension {} but dataset declares {dimension}",
                p.dimension()
            )));
        }
        Ok(Self { points, dimension })
    }

    /// Infers the dimension from the first point; errors on an empty list.
    pub fn from_points(points: Vec<LabeledPoint>) -> Result<Self> {
        let dimension = points
            .first()
            .map(LabeledPoint::dimension)
            .ok_or_else(|| Error::InvalidInput("dataset must be nonempty".into()))?;
        Self::new(points, dimension)
    }

    pub fn points(&self) -> &[LabeledPoint] {
        &self.points
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sub-dataset holding the points at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let points = indices
            .iter()
            .map(|&i| {
                self.points
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::InvalidInput(format!("index {i} out of bounds")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(points, self.dimension)
    }
}

/// The pointwise loss used for assignment costs and loss accounting.
///
/// Ensemble gradient updates are derived for squared error only; absolute
/// error is valid for assignment and reporting but not for weight updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    SquaredError,
    AbsoluteError,
}

/// Per-point cluster labels, one per dataset point, each in `0..k_hat`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment {
    labels: Vec<usize>,
}

impl Assignment {
    pub fn new(labels: Vec<usize>, k_hat: usize) -> Result<Self> {
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= k_hat) {
            return Err(Error::InvalidInput(format!(
                "label {l} at index {i} is out of range for k_hat = {k_hat}"
            )));
        }
        Ok(Self { labels })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Indices of the points assigned to cluster `k`, in dataset order.
    pub fn members_of(&self, k: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == k).then_some(i))
            .collect()
    }
}

/// Loss of a single prediction against its target.
pub fn point_loss(prediction: f64, target: f64, kind: LossKind) -> Result<f64> {
    if !prediction.is_finite() || !target.is_finite() {
        return Err(Error::InvalidInput(
            "point_loss requires finite prediction and target".into(),
        ));
    }
    Ok(match kind {
        LossKind::SquaredError => (prediction - target) * (prediction - target),
        LossKind::AbsoluteError => (prediction - target).abs(),
    })
}

/// Mean loss of each point under its assigned cluster's model.
///
/// Summation runs sequentially over point index so results are
/// bit-reproducible for a given input.
pub fn dataset_loss(
    dataset: &Dataset,
    assignment: &Assignment,
    models: &[TrainedModel],
    kind: LossKind,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::InvalidInput("dataset_loss on empty dataset".into()));
    }
    if assignment.len() != dataset.len() {
        return Err(Error::InvalidInput(format!(
            "assignment length {} does not match dataset size {}",
            assignment.len(),
            dataset.len()
        )));
    }
    let mut total = 0.0;
    for (point, &label) in dataset.points().iter().zip(assignment.labels()) {
        let model = models.get(label).ok_or_else(|| {
            Error::InvalidInput(format!("label {label} exceeds model count {}", models.len()))
        })?;
        let prediction = predict(model, point.features())?;
        total += point_loss(prediction, point.target(), kind)?;
    }
    Ok(total / dataset.len() as f64)
}
