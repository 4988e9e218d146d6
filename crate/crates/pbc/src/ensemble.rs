//! Online weighted-ensemble prediction over streaming batches.
//!
//! Cluster models are frozen; only the mixing weights adapt. Each batch is
//! predicted with the previous weights before its targets are revealed, then
//! the weights take one gradient-descent step on the batch's mean squared
//! error. Weights are deliberately not renormalized or projected — the update
//! is plain unconstrained gradient descent — though an optional simplex
//! projection can be switched on for experiments.

use serde::{Deserialize, Serialize};

use crate::data::{point_loss, LabeledPoint, LossKind};
use crate::error::{Error, Result};
use crate::learners::{predict, TrainedModel};

/// A contiguous group of streaming points whose targets become visible only
/// after the batch has been predicted.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    points: Vec<LabeledPoint>,
    dimension: usize,
}

impl Batch {
    pub fn new(points: Vec<LabeledPoint>) -> Result<Self> {
        let dimension = points
            .first()
            .map(LabeledPoint::dimension)
            .ok_or_else(|| Error::InvalidInput("batch must be nonempty".into()))?;
        if let Some((i, p)) = points
            .iter()
            .enumerate()
            .find(|(_, p)| p.dimension() != dimension)
        {
            return Err(Error::InvalidInput(format!(
                "batch point {i} has dimension {} but the batch starts at {dimension}",
                p.dimension()
            )));
        }
        Ok(Self { points, dimension })
    }

    pub fn points(&self) -> &[LabeledPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }
}

/// Weights recorded after one batch, together with the mean squared error of
/// the predictions made before that batch's targets were revealed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEntry {
    pub batch_index: usize,
    pub weights: Vec<f64>,
    pub mean_loss: f64,
}

/// The evolving ensemble: fixed models, adaptive weights, and the per-batch
/// trajectory accumulated so far.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    weights: Vec<f64>,
    models: Vec<TrainedModel>,
    learning_rate: f64,
    project_weights: bool,
    trajectory: Vec<TrajectoryEntry>,
}

impl EnsembleState {
    /// Starts with uniform weights over `models`.
    pub fn new(models: Vec<TrainedModel>, learning_rate: f64) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::InvalidInput("ensemble needs at least one model".into()));
        }
        let dimension = models[0].dimension();
        if models.iter().any(|m| m.dimension() != dimension) {
            return Err(Error::InvalidInput(
                "ensemble models must share one input dimension".into(),
            ));
        }
        if !learning_rate.is_finite() || learning_rate < 0.0 {
            return Err(Error::InvalidInput(
                "learning_rate must be finite and nonnegative".into(),
            ));
        }
        let weights = init_weights(models.len())?;
        Ok(Self {
            weights,
            models,
            learning_rate,
            project_weights: false,
            trajectory: Vec::new(),
        })
    }

    /// Constrains every update to the probability simplex. Off by default.
    pub fn with_simplex_projection(mut self) -> Self {
        self.project_weights = true;
        self
    }

    /// Replaces the current weights, e.g. to resume from a saved trajectory.
    pub fn set_weights(&mut self, weights: Vec<f64>) -> Result<()> {
        if weights.len() != self.models.len() {
            return Err(Error::InvalidInput(format!(
                "{} weights for {} models",
                weights.len(),
                self.models.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidState("weights must be finite".into()));
        }
        self.weights = weights;
        Ok(())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn models(&self) -> &[TrainedModel] {
        &self.models
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn trajectory(&self) -> &[TrajectoryEntry] {
        &self.trajectory
    }

    pub fn batch_losses(&self) -> Vec<f64> {
        self.trajectory.iter().map(|e| e.mean_loss).collect()
    }

    /// Runs one batch through the strict phase order: predict every point
    /// with the current weights, then reveal targets, score, and take one
    /// gradient step. Returns the predictions made before the reveal.
    pub fn process_batch(&mut self, batch: &Batch) -> Result<Vec<f64>> {
        let predictions: Vec<f64> = batch
            .points()
            .iter()
            .map(|p| ensemble_predict(self, p.features()))
            .collect::<Result<_>>()?;

        // Targets are visible from here on.
        let mut total = 0.0;
        for (prediction, point) in predictions.iter().zip(batch.points()) {
            total += point_loss(*prediction, point.target(), LossKind::SquaredError)?;
        }
        let mean_loss = total / batch.len() as f64;

        let gradient = batch_gradient(self, batch, &predictions, LossKind::SquaredError)?;
        self.weights = update_weights(self, &gradient)?;
        self.trajectory.push(TrajectoryEntry {
            batch_index: self.trajectory.len(),
            weights: self.weights.clone(),
            mean_loss,
        });
        Ok(predictions)
    }
}

/// Uniform initial weights: every entry is `1 / k_hat`.
pub fn init_weights(k_hat: usize) -> Result<Vec<f64>> {
    if k_hat == 0 {
        return Err(Error::InvalidInput("k_hat must be at least 1".into()));
    }
    Ok(vec![1.0 / k_hat as f64; k_hat])
}

/// Weighted sum of the per-model predictions at `features`.
pub fn ensemble_predict(state: &EnsembleState, features: &[f64]) -> Result<f64> {
    let mut output = 0.0;
    for (weight, model) in state.weights.iter().zip(&state.models) {
        output += weight * predict(model, features)?;
    }
    if !output.is_finite() {
        return Err(Error::InvalidState(
            "ensemble prediction is not finite".into(),
        ));
    }
    Ok(output)
}

/// Exact gradient of the batch's mean squared error with respect to the
/// weights: `(2/N) * sum_i g(x_i) * (prediction_i - target_i)` where `g` is
/// the vector of per-model outputs.
///
/// Derived for squared error only; any other loss is an error.
pub fn batch_gradient(
    state: &EnsembleState,
    batch: &Batch,
    predictions: &[f64],
    loss: LossKind,
) -> Result<Vec<f64>> {
    if loss != LossKind::SquaredError {
        return Err(Error::UnsupportedLoss(
            "weight gradient is defined for squared error only".into(),
        ));
    }
    if predictions.len() != batch.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions for a batch of {}",
            predictions.len(),
            batch.len()
        )));
    }
    let k = state.models.len();
    let mut gradient = vec![0.0; k];
    for (point, &prediction) in batch.points().iter().zip(predictions) {
        let residual = prediction - point.target();
        for (g, model) in gradient.iter_mut().zip(&state.models) {
            *g += predict(model, point.features())? * residual;
        }
    }
    let scale = 2.0 / batch.len() as f64;
    for g in &mut gradient {
        *g *= scale;
    }
    Ok(gradient)
}

/// One gradient-descent step: `w - learning_rate * gradient`, unconstrained
/// unless the state opted into simplex projection.
pub fn update_weights(state: &EnsembleState, gradient: &[f64]) -> Result<Vec<f64>> {
    if gradient.len() != state.weights.len() {
        return Err(Error::InvalidInput(format!(
            "gradient length {} does not match {} weights",
            gradient.len(),
            state.weights.len()
        )));
    }
    if gradient.iter().any(|g| !g.is_finite()) {
        return Err(Error::InvalidState("gradient contains a non-finite value".into()));
    }
    let mut next: Vec<f64> = state
        .weights
        .iter()
        .zip(gradient)
        .map(|(w, g)| w - state.learning_rate * g)
        .collect();
    if state.project_weights {
        next = simplex_projection(&next);
    }
    if next.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidState("updated weights are not finite".into()));
    }
    Ok(next)
}

/// Euclidean projection onto the probability simplex.
fn simplex_projection(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumulative = 0.0;
    let mut threshold = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            threshold = candidate;
        }
    }
    v.iter().map(|&x| (x - threshold).max(0.0)).collect()
}

/// Feeds `batches` through a fresh uniformly-weighted ensemble in order and
/// returns the final state, whose trajectory holds one entry per batch.
pub fn stream_evaluate(
    models: Vec<TrainedModel>,
    batches: &[Batch],
    learning_rate: f64,
) -> Result<EnsembleState> {
    let mut state = EnsembleState::new(models, learning_rate)?;
    for batch in batches {
        state.process_batch(batch)?;
    }
    Ok(state)
}
