//! `stream`: replay a saved model bundle over a dataset in batches,
//! predicting with the weighted ensemble and adapting the weights after
//! each batch's targets are revealed.

use std::collections::BTreeMap;
use std::fs;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use pbc::ensemble::EnsembleState;
use pbc::pipeline::{load_dataset_csv, make_batches};
use serde::Serialize;

use crate::artifacts::{self, ARTIFACT_VERSION};
use crate::config::{self, RunConfig};
use crate::RunArgs;

#[derive(Serialize)]
struct StreamReport<'a> {
    version: &'static str,
    command: &'static str,
    seed: u64,
    config: &'a RunConfig,
    input: String,
    models: String,
    n_models: usize,
    n_points: usize,
    n_batches: usize,
    batch_size: usize,
    learning_rate: f64,
    /// Mean squared prediction error over every point in the stream,
    /// predictions made before each batch's targets were revealed.
    mean_squared_error: f64,
    batch_losses: Vec<f64>,
    final_weights: &'a [f64],
    duration_seconds: f64,
    artifacts: BTreeMap<&'static str, String>,
}

pub fn run(args: &RunArgs) -> Result<()> {
    let started = Instant::now();
    let config = config::load(&args.config, args.seed)?;
    let stream = config.require_stream("stream")?.clone();
    let data = config.require_data("stream")?.clone();
    let dataset_path = data
        .dataset
        .context("stream needs data.dataset, the CSV to replay")?;
    let models_path = data
        .models
        .context("stream needs data.models, the bundle written by fit")?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output directory {}", args.out.display()))?;

    let bundle = artifacts::load_bundle(&models_path)?;
    let (dataset, _labels) = load_dataset_csv(&dataset_path)?;
    if dataset.dimension() != bundle.dimension {
        bail!(
            "model bundle {} expects dimension {}, dataset {} has dimension {}",
            models_path.display(),
            bundle.dimension,
            dataset_path.display(),
            dataset.dimension()
        );
    }

    let models = bundle.into_models()?;
    let n_models = models.len();
    let batches = make_batches(&dataset, stream.batch_size)?;
    let mut state = EnsembleState::new(models, stream.learning_rate)?;
    if stream.project_weights {
        state = state.with_simplex_projection();
    }
    for batch in &batches {
        state.process_batch(batch)?;
    }

    let total_loss: f64 = state
        .trajectory()
        .iter()
        .zip(&batches)
        .map(|(entry, batch)| entry.mean_loss * batch.len() as f64)
        .sum();
    let mean_squared_error = total_loss / dataset.len() as f64;

    artifacts::save_jsonl(&args.out.join("trajectory.jsonl"), state.trajectory())?;
    let mut artifact_index = BTreeMap::new();
    artifact_index.insert("trajectory", "trajectory.jsonl".to_string());

    let report = StreamReport {
        version: ARTIFACT_VERSION,
        command: "stream",
        seed: config.seed,
        config: &config,
        input: dataset_path.display().to_string(),
        models: models_path.display().to_string(),
        n_models,
        n_points: dataset.len(),
        n_batches: batches.len(),
        batch_size: stream.batch_size,
        learning_rate: stream.learning_rate,
        mean_squared_error,
        batch_losses: state.batch_losses(),
        final_weights: state.weights(),
        duration_seconds: started.elapsed().as_secs_f64(),
        artifacts: artifact_index,
    };
    artifacts::save_json(&args.out.join("report.json"), &report)?;

    println!(
        "stream: {} batches over {} points, mse {:.6e}, final weights {:?}",
        report.n_batches, report.n_points, mean_squared_error, report.final_weights
    );
    Ok(())
}
