//! `fit`: cluster a labeled dataset by prediction loss, write the fitted
//! model bundle plus a replayable report.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use pbc::clustering::run_pbc;
use pbc::data::Dataset;
use pbc::pipeline::{
    apply_normalization, build_features, fit_normalization, load_dataset_csv, load_series_csv,
    save_dataset_csv, temporal_split, FeatureSpec,
};
use serde::Serialize;

use crate::artifacts::{self, ModelBundle, ARTIFACT_VERSION};
use crate::config::{self, RunConfig, SplitSection};
use crate::RunArgs;

#[derive(Serialize)]
struct InputSummary {
    mode: &'static str,
    path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_series: Option<usize>,
    /// Number of points the clustering ran on (train rows in series mode).
    n_points: usize,
    dimension: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    split_sizes: Option<BTreeMap<&'static str, usize>>,
}

#[derive(Serialize)]
struct NormalizationRecord {
    series_id: String,
    min: f64,
    max: f64,
}

#[derive(Serialize)]
struct IterationRecord {
    iteration: usize,
    loss: f64,
    reassignment_fraction: f64,
}

#[derive(Serialize)]
struct FitReport<'a> {
    version: &'static str,
    command: &'static str,
    seed: u64,
    config: &'a RunConfig,
    input: InputSummary,
    k_hat: usize,
    converged: bool,
    iterations: usize,
    final_loss: f64,
    loss_history: &'a [f64],
    reassignment_history: &'a [f64],
    cluster_sizes: Vec<usize>,
    duration_seconds: f64,
    artifacts: BTreeMap<&'static str, String>,
}

pub fn run(args: &RunArgs) -> Result<()> {
    let started = Instant::now();
    let mut config = config::load(&args.config, args.seed)?;
    let clustering = config.require_clustering("fit")?.clone();
    let regressor = config.require_regressor("fit")?.clone();
    let data = config.require_data("fit")?.clone();
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output directory {}", args.out.display()))?;

    let mut artifact_index = BTreeMap::new();
    let (dataset, input) = match (&data.dataset, &data.series) {
        (Some(path), None) => {
            let (dataset, _labels) = load_dataset_csv(path)?;
            let input = InputSummary {
                mode: "dataset",
                path: path.display().to_string(),
                n_series: None,
                n_points: dataset.len(),
                dimension: dataset.dimension(),
                split_sizes: None,
            };
            (dataset, input)
        }
        (None, Some(path)) => {
            // Resolve the sections the series pipeline uses so the report
            // shows them even when the config file left them to defaults.
            let features = config
                .features
                .get_or_insert_with(FeatureSpec::default)
                .clone();
            let split = *config.split.get_or_insert_with(SplitSection::default);
            prepare_series(path, &features, split, &args.out, &mut artifact_index)?
        }
        _ => bail!("fit needs exactly one of data.dataset or data.series"),
    };

    let pbc_config = clustering.to_pbc_config(clustering.k_hat, regressor, config.seed);
    let result = run_pbc(&dataset, &pbc_config)?;

    let bundle = ModelBundle::from_models(&result.models, pbc_config.loss)?;
    artifacts::save_bundle(&args.out.join("models.json"), &bundle)?;
    artifact_index.insert("models", "models.json".to_string());

    artifacts::save_assignment_csv(
        &args.out.join("assignment.csv"),
        result.assignment.labels(),
    )?;
    artifact_index.insert("assignment", "assignment.csv".to_string());

    let iteration_records = result
        .loss_history
        .iter()
        .zip(&result.reassignment_history)
        .enumerate()
        .map(|(iteration, (&loss, &reassignment_fraction))| IterationRecord {
            iteration,
            loss,
            reassignment_fraction,
        });
    artifacts::save_jsonl(&args.out.join("iterations.jsonl"), iteration_records)?;
    artifact_index.insert("iterations", "iterations.jsonl".to_string());

    let final_loss = *result
        .loss_history
        .last()
        .context("clustering produced an empty loss history")?;
    let cluster_sizes: Vec<usize> = (0..pbc_config.k_hat)
        .map(|k| result.assignment.members_of(k).len())
        .collect();

    let report = FitReport {
        version: ARTIFACT_VERSION,
        command: "fit",
        seed: config.seed,
        config: &config,
        input,
        k_hat: pbc_config.k_hat,
        converged: result.converged,
        iterations: result.iterations,
        final_loss,
        loss_history: &result.loss_history,
        reassignment_history: &result.reassignment_history,
        cluster_sizes: cluster_sizes.clone(),
        duration_seconds: started.elapsed().as_secs_f64(),
        artifacts: artifact_index,
    };
    artifacts::save_json(&args.out.join("report.json"), &report)?;

    println!(
        "fit: {} points, k_hat={}, converged={} after {} iterations, \
         final loss {:.6e}, cluster sizes {:?}",
        report.input.n_points,
        report.k_hat,
        report.converged,
        report.iterations,
        final_loss,
        cluster_sizes
    );
    Ok(())
}

/// Normalizes each series on its training prefix only, builds lag features,
/// splits contiguously, writes the three split CSVs plus the normalization
/// bounds, and returns the pooled training rows for clustering.
fn prepare_series(
    path: &Path,
    features: &FeatureSpec,
    split: SplitSection,
    out: &Path,
    artifact_index: &mut BTreeMap<&'static str, String>,
) -> Result<(Dataset, InputSummary)> {
    let frames = load_series_csv(path)?;
    let warmup = features.warmup();

    let mut train_points = Vec::new();
    let mut validation_points = Vec::new();
    let mut test_points = Vec::new();
    let mut normalization = Vec::new();
    for frame in &frames {
        let context = || format!("series {:?}", frame.series_id());
        let feature_rows = frame.len().saturating_sub(warmup);
        if feature_rows == 0 {
            bail!(
                "series {:?} has {} points but the feature spec needs more than {warmup}",
                frame.series_id(),
                frame.len()
            );
        }
        // The normalization bounds may only see values that feed the
        // training rows: the warmup prefix plus the training split itself.
        let n_train_rows = (split.train * feature_rows as f64).floor() as usize;
        let params = fit_normalization(&frame.values()[..warmup + n_train_rows])
            .with_context(context)?;
        let normalized = apply_normalization(frame, &params)?;
        let dataset = build_features(&normalized, features).with_context(context)?;
        let (train, validation, test) =
            temporal_split(&dataset, split.fractions()).with_context(context)?;
        train_points.extend_from_slice(train.points());
        validation_points.extend_from_slice(validation.points());
        test_points.extend_from_slice(test.points());
        normalization.push(NormalizationRecord {
            series_id: frame.series_id().to_string(),
            min: params.min,
            max: params.max,
        });
    }

    let mut split_sizes = BTreeMap::new();
    split_sizes.insert("train", train_points.len());
    split_sizes.insert("validation", validation_points.len());
    split_sizes.insert("test", test_points.len());

    let train = Dataset::from_points(train_points)?;
    let validation = Dataset::from_points(validation_points)?;
    let test = Dataset::from_points(test_points)?;
    save_dataset_csv(&out.join("train.csv"), &train, None)?;
    save_dataset_csv(&out.join("validation.csv"), &validation, None)?;
    save_dataset_csv(&out.join("test.csv"), &test, None)?;
    artifacts::save_json(&out.join("normalization.json"), &normalization)?;
    artifact_index.insert("train", "train.csv".to_string());
    artifact_index.insert("validation", "validation.csv".to_string());
    artifact_index.insert("test", "test.csv".to_string());
    artifact_index.insert("normalization", "normalization.json".to_string());

    let input = InputSummary {
        mode: "series",
        path: path.display().to_string(),
        n_series: Some(frames.len()),
        n_points: train.len(),
        dimension: train.dimension(),
        split_sizes: Some(split_sizes),
    };
    Ok((train, input))
}
