//! JSON bindings for the browser demo page.
//!
//! Each exported function takes a JSON request string and returns a JSON
//! response string, so the page needs no generated glue types. On wasm
//! builds the functions are exported through wasm-bindgen; on native targets
//! they are ordinary functions, which keeps the crate testable without a
//! wasm toolchain.
//!
//! Operations:
//! - [`generate_dataset`]: synthetic one-feature data drawn from several
//!   linear relations, for the scatter plot.
//! - [`run_clustering`]: the performance-based clustering loop with one
//!   frame per iteration, plus a feature-space K-Means baseline.
//! - [`run_stream`]: a two-regime stream fed to the weighted ensemble,
//!   tracking how the weights shift at the changepoint.

use pbc::clustering::run_pbc_traced;
use pbc::{
    generate_synthetic, kmeans_baseline, misclassification_rate, Batch, Dataset, EnsembleState,
    LabeledPoint, PbcConfig, RegressorSpec, SyntheticConfig, TrainedModel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[cfg(target_arch = "wasm32")]
use wasm_bindgen::prelude::wasm_bindgen;

#[derive(Serialize, Deserialize, Clone, Copy)]
struct Point2 {
    x: f64,
    y: f64,
}

/// `y = slope * x + intercept`, read off a fitted one-feature ridge model.
#[derive(Serialize, Clone, Copy)]
struct Line {
    slope: f64,
    intercept: f64,
}

fn line_of(model: &TrainedModel) -> Line {
    let parameters = model.parameters();
    Line {
        slope: parameters[0],
        intercept: parameters[1],
    }
}

fn dataset_of(points: &[Point2]) -> Result<Dataset, String> {
    let labeled: Vec<LabeledPoint> = points
        .iter()
        .map(|p| LabeledPoint::new(vec![p.x], p.y))
        .collect::<pbc::Result<_>>()
        .map_err(|e| e.to_string())?;
    Dataset::from_points(labeled).map_err(|e| e.to_string())
}

fn reply<T: Serialize>(result: Result<T, String>) -> String {
    #[derive(Serialize)]
    struct ErrorResponse {
        error: String,
    }
    match result {
        Ok(value) => serde_json::to_string(&value).expect("demo responses serialize"),
        Err(error) => {
            serde_json::to_string(&ErrorResponse { error }).expect("error responses serialize")
        }
    }
}

// ---------------------------------------------------------------- dataset

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetRequest {
    #[serde(default = "defaults::n_points")]
    n_points: usize,
    #[serde(default = "defaults::n_lines")]
    n_lines: usize,
    #[serde(default = "defaults::noise_std")]
    noise_std: f64,
    #[serde(default)]
    seed: u64,
}

#[derive(Serialize)]
struct DatasetResponse {
    points: Vec<Point2>,
    true_labels: Vec<usize>,
    /// Generating relations; they all pass through the origin.
    true_lines: Vec<Line>,
}

/// Draws points from `n_lines` random linear relations over one feature.
#[cfg_attr(target_arch = "wasm32", wasm_bindgen)]
pub fn generate_dataset(request: &str) -> String {
    reply(generate_dataset_impl(request))
}

fn generate_dataset_impl(request: &str) -> Result<DatasetResponse, String> {
    let request: DatasetRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let mut config = SyntheticConfig::new(request.n_points, request.n_lines, request.seed);
    config.dimension = 1;
    config.noise_std = request.noise_std;
    let data = generate_synthetic(&config).map_err(|e| e.to_string())?;

    let points = data
        .dataset
        .points()
        .iter()
        .map(|p| Point2 {
            x: p.features()[0],
            y: p.target(),
        })
        .collect();
    let true_lines = data
        .coefficients
        .iter()
        .map(|beta| Line {
            slope: beta[0],
            intercept: 0.0,
        })
        .collect();
    Ok(DatasetResponse {
        points,
        true_labels: data.ground_truth,
        true_lines,
    })
}

// ------------------------------------------------------------- clustering

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClusterRequest {
    points: Vec<Point2>,
    k_hat: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "defaults::zeta")]
    zeta: f64,
    #[serde(default = "defaults::max_iterations")]
    max_iterations: usize,
    /// Generating labels, if known; enables the misclassification readouts.
    #[serde(default)]
    true_labels: Option<Vec<usize>>,
}

#[derive(Serialize)]
struct IterationFrame {
    labels: Vec<usize>,
    lines: Vec<Line>,
    loss: f64,
    /// True when an empty cluster had to be reseeded this round.
    reseeded: bool,
}

#[derive(Serialize)]
struct ClusterResponse {
    initial_lines: Vec<Line>,
    initial_labels: Vec<usize>,
    iterations: Vec<IterationFrame>,
    converged: bool,
    final_labels: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    misclassification: Option<f64>,
    kmeans_labels: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kmeans_misclassification: Option<f64>,
}

/// Clusters `(x, y)` points by which fitted line predicts them best and
/// returns one frame per iteration, plus a feature-space K-Means baseline
/// on the same points.
#[cfg_attr(target_arch = "wasm32", wasm_bindgen)]
pub fn run_clustering(request: &str) -> String {
    reply(run_clustering_impl(request))
}

fn run_clustering_impl(request: &str) -> Result<ClusterResponse, String> {
    let request: ClusterRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let dataset = dataset_of(&request.points)?;
    if let Some(truth) = &request.true_labels {
        if truth.len() != request.points.len() {
            return Err(format!(
                "true_labels has {} entries for {} points",
                truth.len(),
                request.points.len()
            ));
        }
    }

    let mut config = PbcConfig::new(
        request.k_hat,
        RegressorSpec::RidgeLinear { ridge_lambda: 0.0 },
    )
    .with_seed(request.seed);
    config.zeta = request.zeta;
    config.max_iterations = request.max_iterations;

    let (result, trace) = run_pbc_traced(&dataset, &config).map_err(|e| e.to_string())?;
    let iterations = trace
        .iterations
        .iter()
        .zip(&result.loss_history)
        .map(|(iteration, &loss)| IterationFrame {
            labels: iteration.assignment.labels().to_vec(),
            lines: iteration.models.iter().map(line_of).collect(),
            loss,
            reseeded: iteration.reseeded,
        })
        .collect();

    let kmeans = kmeans_baseline(&dataset, request.k_hat, request.seed).map_err(|e| e.to_string())?;
    let (misclassification, kmeans_misclassification) = match &request.true_labels {
        Some(truth) => (
            Some(misclassification_rate(&result.assignment, truth).map_err(|e| e.to_string())?),
            Some(misclassification_rate(&kmeans, truth).map_err(|e| e.to_string())?),
        ),
        None => (None, None),
    };

    Ok(ClusterResponse {
        initial_lines: trace.initial_models.iter().map(line_of).collect(),
        initial_labels: trace.initial_assignment.labels().to_vec(),
        iterations,
        converged: result.converged,
        final_labels: result.assignment.labels().to_vec(),
        misclassification,
        kmeans_labels: kmeans.labels().to_vec(),
        kmeans_misclassification,
    })
}

// -------------------------------------------------------------- streaming

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StreamRequest {
    #[serde(default = "defaults::n_batches")]
    n_batches: usize,
    #[serde(default = "defaults::batch_size")]
    batch_size: usize,
    #[serde(default = "defaults::learning_rate")]
    learning_rate: f64,
    /// First batch drawn from the second regime.
    #[serde(default = "defaults::changepoint_batch")]
    changepoint_batch: usize,
    #[serde(default = "defaults::stream_noise_std")]
    noise_std: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default = "defaults::project_weights")]
    project_weights: bool,
}

#[derive(Serialize)]
struct StreamPoint {
    x: f64,
    y: f64,
    batch: usize,
}

#[derive(Serialize)]
struct StreamResponse {
    /// The two candidate models the ensemble weighs.
    models: Vec<Line>,
    changepoint_batch: usize,
    /// Ensemble weights after each batch.
    weights: Vec<Vec<f64>>,
    batch_losses: Vec<f64>,
    points: Vec<StreamPoint>,
}

/// Streams batches that switch generating line at `changepoint_batch`
/// through a two-model weighted ensemble and records the weight trajectory.
#[cfg_attr(target_arch = "wasm32", wasm_bindgen)]
pub fn run_stream(request: &str) -> String {
    reply(run_stream_impl(request))
}

fn run_stream_impl(request: &str) -> Result<StreamResponse, String> {
    let request: StreamRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    if request.n_batches == 0 || request.batch_size == 0 {
        return Err("n_batches and batch_size must be at least 1".into());
    }
    if request.changepoint_batch > request.n_batches {
        return Err(format!(
            "changepoint_batch {} exceeds n_batches {}",
            request.changepoint_batch, request.n_batches
        ));
    }
    if !request.noise_std.is_finite() || request.noise_std < 0.0 {
        return Err("noise_std must be finite and nonnegative".into());
    }

    let regimes = [
        Line { slope: 2.0, intercept: 0.0 },
        Line { slope: -3.0, intercept: 1.0 },
    ];
    let models: Vec<TrainedModel> = regimes
        .iter()
        .map(|line| {
            TrainedModel::new(
                RegressorSpec::RidgeLinear { ridge_lambda: 0.0 },
                1,
                vec![line.slope, line.intercept],
            )
            .map_err(|e| e.to_string())
        })
        .collect::<Result<_, _>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(request.seed);
    let mut points = Vec::with_capacity(request.n_batches * request.batch_size);
    let mut batches = Vec::with_capacity(request.n_batches);
    for batch_index in 0..request.n_batches {
        let line = if batch_index < request.changepoint_batch {
            regimes[0]
        } else {
            regimes[1]
        };
        let batch_points: Vec<LabeledPoint> = (0..request.batch_size)
            .map(|_| {
                let x: f64 = rng.gen_range(-3.0..3.0);
                let noise: f64 = rng.sample::<f64, _>(StandardNormal) * request.noise_std;
                let y = line.slope * x + line.intercept + noise;
                points.push(StreamPoint { x, y, batch: batch_index });
                LabeledPoint::new(vec![x], y)
            })
            .collect::<pbc::Result<_>>()
            .map_err(|e| e.to_string())?;
        batches.push(Batch::new(batch_points).map_err(|e| e.to_string())?);
    }

    let mut state =
        EnsembleState::new(models, request.learning_rate).map_err(|e| e.to_string())?;
    if request.project_weights {
        state = state.with_simplex_projection();
    }
    for batch in &batches {
        state.process_batch(batch).map_err(|e| e.to_string())?;
    }

    Ok(StreamResponse {
        models: regimes.to_vec(),
        changepoint_batch: request.changepoint_batch,
        weights: state
            .trajectory()
            .iter()
            .map(|entry| entry.weights.clone())
            .collect(),
        batch_losses: state.batch_losses(),
        points,
    })
}

mod defaults {
    pub(super) fn n_points() -> usize {
        240
    }
    pub(super) fn n_lines() -> usize {
        3
    }
    pub(super) fn noise_std() -> f64 {
        0.25
    }
    pub(super) fn zeta() -> f64 {
        0.01
    }
    pub(super) fn max_iterations() -> usize {
        30
    }
    pub(super) fn n_batches() -> usize {
        40
    }
    pub(super) fn batch_size() -> usize {
        10
    }
    pub(super) fn learning_rate() -> f64 {
        0.2
    }
    pub(super) fn changepoint_batch() -> usize {
        20
    }
    pub(super) fn stream_noise_std() -> f64 {
        0.1
    }
    pub(super) fn project_weights() -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(response: &str) -> Value {
        serde_json::from_str(response).unwrap()
    }

    /// Two exact lines over strictly positive x, so the mixture is separable
    /// everywhere on the domain.
    fn two_line_request(k_hat: usize) -> String {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (label, slope) in [2.0, -3.0].into_iter().enumerate() {
            for _ in 0..40 {
                let x: f64 = rng.gen_range(0.5..3.5);
                points.push(serde_json::json!({ "x": x, "y": slope * x }));
                labels.push(label);
            }
        }
        serde_json::json!({ "points": points, "k_hat": k_hat, "true_labels": labels })
            .to_string()
    }

    #[test]
    fn generated_datasets_are_deterministic_and_shaped() {
        let request = r#"{ "n_points": 90, "n_lines": 3, "seed": 11 }"#;
        let first = generate_dataset(request);
        let second = generate_dataset(request);
        assert_eq!(first, second);

        let response = parse(&first);
        assert_eq!(response["points"].as_array().unwrap().len(), 90);
        assert_eq!(response["true_labels"].as_array().unwrap().len(), 90);
        assert_eq!(response["true_lines"].as_array().unwrap().len(), 3);
        assert!(response.get("error").is_none());
    }

    #[test]
    fn clustering_recovers_two_clean_lines() {
        let response = parse(&run_clustering(&two_line_request(2)));
        assert!(response.get("error").is_none(), "{response}");
        assert_eq!(response["converged"], Value::Bool(true));
        assert_eq!(response["misclassification"].as_f64(), Some(0.0));

        let iterations = response["iterations"].as_array().unwrap();
        assert!(!iterations.is_empty());
        let last = iterations.last().unwrap();
        assert!(last["loss"].as_f64().unwrap() < 1e-12);
        assert_eq!(last["lines"].as_array().unwrap().len(), 2);

        // Both relations cover the same x-range, so feature-space K-Means
        // cannot tell them apart.
        assert!(response["kmeans_misclassification"].as_f64().unwrap() > 0.2);
    }

    #[test]
    fn clustering_losses_never_increase() {
        let response = parse(&run_clustering(&two_line_request(3)));
        let losses: Vec<f64> = response["iterations"]
            .as_array()
            .unwrap()
            .iter()
            .map(|frame| frame["loss"].as_f64().unwrap())
            .collect();
        for pair in losses.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9, "loss rose: {pair:?}");
        }
    }

    #[test]
    fn malformed_or_invalid_requests_return_error_json() {
        let garbled = parse(&run_clustering("not json"));
        assert!(garbled["error"].as_str().unwrap().contains("expected"));

        let zero_k = parse(&run_clustering(
            r#"{ "points": [{ "x": 1.0, "y": 2.0 }], "k_hat": 0 }"#,
        ));
        assert!(zero_k["error"].as_str().unwrap().contains("k_hat"));

        let mismatched = parse(&run_clustering(
            r#"{ "points": [{ "x": 1.0, "y": 2.0 }], "k_hat": 1, "true_labels": [0, 1] }"#,
        ));
        assert!(mismatched["error"].as_str().unwrap().contains("true_labels"));

        let unknown_knob = parse(&generate_dataset(r#"{ "n_pionts": 5 }"#));
        assert!(unknown_knob["error"].as_str().unwrap().contains("n_pionts"));
    }

    #[test]
    fn stream_weights_shift_to_the_new_regime() {
        let response = parse(&run_stream(r#"{ "seed": 4 }"#));
        assert!(response.get("error").is_none(), "{response}");

        let weights = response["weights"].as_array().unwrap();
        assert_eq!(weights.len(), 40);
        let at = |batch: usize, model: usize| weights[batch][model].as_f64().unwrap();

        let changepoint = response["changepoint_batch"].as_u64().unwrap() as usize;
        assert!(at(changepoint - 1, 0) > 0.9, "first regime should dominate");
        assert!(at(39, 1) > 0.9, "second regime should take over");

        for entry in weights {
            let sum: f64 = entry
                .as_array()
                .unwrap()
                .iter()
                .map(|w| w.as_f64().unwrap())
                .sum();
            assert!((sum - 1.0).abs() < 1e-9, "projected weights must sum to 1");
        }
    }

    #[test]
    fn stream_rejects_inconsistent_shapes() {
        let response = parse(&run_stream(
            r#"{ "n_batches": 5, "changepoint_batch": 9 }"#,
        ));
        assert!(response["error"].as_str().unwrap().contains("changepoint"));

        let response = parse(&run_stream(r#"{ "batch_size": 0 }"#));
        assert!(response["error"]
            .as_str()
            .unwrap()
            .contains("batch_size"));
    }
}
