//! Trainable regressors behind a single fit/predict contract.
//!
//! Two families are provided: exact ridge-penalized linear regression solved
//! by normal equations, and a small multilayer perceptron trained with
//! deterministic seeded mini-batch gradient descent. Both produce an
//! immutable [`TrainedModel`] holding a flat parameter vector.

mod mlp;
mod ridge;

use serde::{Deserialize, Serialize};

use crate::data::LabeledPoint;
use crate::error::{Error, Result};

/// Hidden-layer nonlinearity for the MLP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub(crate) fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative evaluated at the pre-activation value.
    pub(crate) fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
        }
    }
}

/// Model family plus the hyperparameters needed to fit it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegressorSpec {
    /// Linear model minimizing sum of squared errors plus
    /// `ridge_lambda * ||coefficients||^2`; the intercept is unpenalized.
    RidgeLinear { ridge_lambda: f64 },
    /// Fully connected network with scalar linear output, trained by
    /// mini-batch gradient descent at a fixed step size. Shuffling and
    /// weight initialization derive from `train_seed`.
    Mlp {
        hidden_sizes: Vec<usize>,
        activation: Activation,
        epochs: usize,
        step_size: f64,
        batch_size: usize,
        train_seed: u64,
    },
}

impl RegressorSpec {
    /// One hidden layer of 32 ReLU units, 200 epochs; a reasonable default
    /// when nothing is known about the data.
    pub fn default_mlp(train_seed: u64) -> Self {
        RegressorSpec::Mlp {
            hidden_sizes: vec![32],
            activation: Activation::Relu,
            epochs: 200,
            step_size: 0.01,
            batch_size: 32,
            train_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RegressorSpec::RidgeLinear { ridge_lambda } => {
                if !ridge_lambda.is_finite() || *ridge_lambda < 0.0 {
                    return Err(Error::InvalidInput(
                        "ridge_lambda must be finite and nonnegative".into(),
                    ));
                }
            }
            RegressorSpec::Mlp {
                hidden_sizes,
                epochs,
                step_size,
                batch_size,
                ..
            } => {
                if hidden_sizes.is_empty() || hidden_sizes.contains(&0) {
                    return Err(Error::InvalidInput(
                        "hidden_sizes must be nonempty with positive entries".into(),
                    ));
                }
                if *epochs == 0 {
                    return Err(Error::InvalidInput("epochs must be positive".into()));
                }
                if !step_size.is_finite() || *step_size <= 0.0 {
                    return Err(Error::InvalidInput("step_size must be positive".into()));
                }
                if *batch_size == 0 {
                    return Err(Error::InvalidInput("batch_size must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// Parameter-vector length for input dimension `d`.
    ///
    /// Linear layout is `[coefficients.., intercept]`. MLP layout is, per
    /// layer, row-major weights (`out x in`) followed by biases.
    pub fn parameter_count(&self, dimension: usize) -> usize {
        match self {
            RegressorSpec::RidgeLinear { .. } => dimension + 1,
            RegressorSpec::Mlp { hidden_sizes, .. } => {
                let mut count = 0;
                let mut fan_in = dimension;
                for &h in hidden_sizes {
                    count += fan_in * h + h;
                    fan_in = h;
                }
                count + fan_in + 1 // output layer
            }
        }
    }
}

/// An immutable fitted regressor: spec, input dimension, flat parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    spec: RegressorSpec,
    dimension: usize,
    parameters: Vec<f64>,
}

impl TrainedModel {
    pub fn new(spec: RegressorSpec, dimension: usize, parameters: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if dimension == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        let expected = spec.parameter_count(dimension);
        if parameters.len() != expected {
            return Err(Error::InvalidInput(format!(
                "expected {expected} parameters for dimension {dimension}, got {}",
                parameters.len()
            )));
        }
        if parameters.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidState(
                "model parameters contain a non-finite value".into(),
            ));
        }
        Ok(Self {
            spec,
            dimension,
            parameters,
        })
    }

    pub fn spec(&self) -> &RegressorSpec {
        &self.spec
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn parameters(&self) -> &[f64] {
        &self.parameters
    }
}

/// Fits `spec` to `points`, optionally warm-starting an iterative learner
/// from a previous model's parameters.
///
/// Ridge ignores the warm start (closed form). A singular normal-equation
/// system with zero penalty falls back to the minimum-norm pseudoinverse
/// solution.
pub fn fit(
    spec: &RegressorSpec,
    points: &[LabeledPoint],
    warm_start: Option<&TrainedModel>,
) -> Result<TrainedModel> {
    spec.validate()?;
    let first = points
        .first()
        .ok_or_else(|| Error::InvalidInput("fit requires at least one point".into()))?;
    let dimension = first.dimension();
    if points.iter().any(|p| p.dimension() != dimension) {
        return Err(Error::InvalidInput(
            "fit requires points of uniform dimension".into(),
        ));
    }
    if let Some(w) = warm_start {
        if w.dimension() != dimension {
            return Err(Error::InvalidInput(format!(
                "warm start dimension {} does not match data dimension {dimension}",
                w.dimension()
            )));
        }
        if w.spec() != spec {
            return Err(Error::InvalidInput(
                "warm start spec does not match the requested spec".into(),
            ));
        }
    }

    let parameters = match spec {
        RegressorSpec::RidgeLinear { ridge_lambda } => ridge::solve(points, *ridge_lambda)?,
        RegressorSpec::Mlp {
            hidden_sizes,
            activation,
            epochs,
            step_size,
            batch_size,
            train_seed,
        } => mlp::train(
            points,
            hidden_sizes,
            *activation,
            *epochs,
            *step_size,
            *batch_size,
            *train_seed,
            warm_start.map(TrainedModel::parameters),
        )?,
    };
    TrainedModel::new(spec.clone(), dimension, parameters)
}

/// Deterministic forward evaluation of a fitted model.
pub fn predict(model: &TrainedModel, features: &[f64]) -> Result<f64> {
    if features.len() != model.dimension() {
        return Err(Error::InvalidInput(format!(
            "feature vector has length {}, model expects {}",
            features.len(),
            model.dimension()
        )));
    }
    let out = match model.spec() {
        RegressorSpec::RidgeLinear { .. } => {
            let params = model.parameters();
            let mut acc = params[model.dimension()]; // intercept
            for (w, x) in params[..model.dimension()].iter().zip(features) {
                acc += w * x;
            }
            acc
        }
        RegressorSpec::Mlp {
            hidden_sizes,
            activation,
            ..
        } => mlp::forward(
            model.parameters(),
            model.dimension(),
            hidden_sizes,
            *activation,
            features,
        ),
    };
    if !out.is_finite() {
        return Err(Error::InvalidState("prediction is not finite".into()));
    }
    Ok(out)
}
