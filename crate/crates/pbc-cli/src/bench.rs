//! `synth-bench`: seeded replicates of the synthetic mixture, clustered by
//! prediction loss and by feature-space K-Means, summarized per cluster
//! count.

use std::collections::BTreeMap;
use std::fs;
use std::thread;
use std::time::Instant;

use anyhow::{Context, Result};
use pbc::clustering::run_pbc_traced;
use pbc::datagen::{generate_synthetic, kmeans_baseline, misclassification_rate};
use pbc::learners::RegressorSpec;
use serde::Serialize;

use crate::artifacts::{self, ARTIFACT_VERSION};
use crate::config::{ClusteringSection, RunConfig};
use crate::{config, RunArgs};

#[derive(Serialize)]
struct IterationRecord {
    k_hat: usize,
    replicate: usize,
    iteration: usize,
    loss: f64,
    misclassification: f64,
}

struct Replicate {
    pbc_rate: f64,
    kmeans_rate: f64,
    iterations: Vec<IterationRecord>,
}

#[derive(Serialize)]
struct TableRow {
    k_hat: usize,
    pbc_mean_misclassification: f64,
    kmeans_mean_misclassification: f64,
    pbc_rates: Vec<f64>,
    kmeans_rates: Vec<f64>,
}

#[derive(Serialize)]
struct BenchReport<'a> {
    version: &'static str,
    command: &'static str,
    seed: u64,
    config: &'a RunConfig,
    replicates: usize,
    rows: &'a [TableRow],
    duration_seconds: f64,
    artifacts: BTreeMap<&'static str, String>,
}

pub fn run(args: &RunArgs) -> Result<()> {
    let started = Instant::now();
    let mut config = config::load(&args.config, args.seed)?;
    let synthetic = config.require_synthetic("synth-bench")?.clone();
    let bench = config.require_bench("synth-bench")?.clone();
    let regressor = config.require_regressor("synth-bench")?.clone();
    // Clustering knobs are optional here; `k_hat` comes from the bench list.
    let knobs = config
        .clustering
        .get_or_insert_with(ClusteringSection::default)
        .clone();
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output directory {}", args.out.display()))?;

    let mut rows = Vec::new();
    let mut iteration_records = Vec::new();
    for &k_hat in &bench.k_hat_list {
        let replicates = run_replicates(&synthetic, &knobs, &regressor, config.seed, k_hat, bench.replicates)?;
        let pbc_rates: Vec<f64> = replicates.iter().map(|r| r.pbc_rate).collect();
        let kmeans_rates: Vec<f64> = replicates.iter().map(|r| r.kmeans_rate).collect();
        for replicate in replicates {
            iteration_records.extend(replicate.iterations);
        }
        rows.push(TableRow {
            k_hat,
            pbc_mean_misclassification: mean(&pbc_rates),
            kmeans_mean_misclassification: mean(&kmeans_rates),
            pbc_rates,
            kmeans_rates,
        });
    }

    artifacts::save_jsonl(&args.out.join("bench_iterations.jsonl"), &iteration_records)?;
    let mut artifact_index = BTreeMap::new();
    artifact_index.insert("iterations", "bench_iterations.jsonl".to_string());

    let report = BenchReport {
        version: ARTIFACT_VERSION,
        command: "synth-bench",
        seed: config.seed,
        config: &config,
        replicates: bench.replicates,
        rows: &rows,
        duration_seconds: started.elapsed().as_secs_f64(),
        artifacts: artifact_index,
    };
    artifacts::save_json(&args.out.join("report.json"), &report)?;

    println!(
        "synth-bench: {} replicates of {} points, {} relations",
        bench.replicates, synthetic.n_points, synthetic.n_relations
    );
    println!("{:>5}  {:>22}  {:>22}", "k_hat", "loss-based mean error", "k-means mean error");
    for row in &rows {
        println!(
            "{:>5}  {:>21.3}%  {:>21.3}%",
            row.k_hat,
            row.pbc_mean_misclassification * 100.0,
            row.kmeans_mean_misclassification * 100.0
        );
    }
    Ok(())
}

/// Runs the replicates for one `k_hat` concurrently; replicate `r` uses
/// seed `base_seed + r` for data, clustering, and the K-Means baseline, so
/// reports are reproducible regardless of scheduling.
fn run_replicates(
    synthetic: &crate::config::SyntheticSection,
    knobs: &ClusteringSection,
    regressor: &RegressorSpec,
    base_seed: u64,
    k_hat: usize,
    replicates: usize,
) -> Result<Vec<Replicate>> {
    thread::scope(|scope| {
        let handles: Vec<_> = (0..replicates)
            .map(|r| {
                scope.spawn(move || -> Result<Replicate> {
                    let seed = base_seed + r as u64;
                    let data = generate_synthetic(&synthetic.to_config(seed))?;
                    let pbc_config = knobs.to_pbc_config(k_hat, regressor.clone(), seed);
                    let (result, trace) = run_pbc_traced(&data.dataset, &pbc_config)?;
                    let pbc_rate =
                        misclassification_rate(&result.assignment, &data.ground_truth)?;
                    let kmeans = kmeans_baseline(&data.dataset, k_hat, seed)?;
                    let kmeans_rate = misclassification_rate(&kmeans, &data.ground_truth)?;
                    let iterations = trace
                        .iterations
                        .iter()
                        .enumerate()
                        .map(|(iteration, snapshot)| {
                            Ok(IterationRecord {
                                k_hat,
                                replicate: r,
                                iteration,
                                loss: result.loss_history[iteration],
                                misclassification: misclassification_rate(
                                    &snapshot.assignment,
                                    &data.ground_truth,
                                )?,
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(Replicate {
                        pbc_rate,
                        kmeans_rate,
                        iterations,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|handle| handle.join().expect("replicate thread panicked"))
            .collect()
    })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
