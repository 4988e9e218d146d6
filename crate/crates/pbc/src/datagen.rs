//! Controlled-setting benchmark support: a mixture-of-linear-relations
//! generator, misclassification scoring with majority matching, and a
//! feature-space K-Means baseline to contrast performance-based clustering
//! against proximity-based clustering.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Assignment, Dataset, LabeledPoint};
use crate::error::{Error, Result};

/// Any two relations' coefficient vectors must be at least this far apart,
/// otherwise the relations are effectively the same and no clustering method
/// could tell them apart.
const MIN_COEFFICIENT_SEPARATION: f64 = 0.5;
const MAX_REJECTION_ATTEMPTS: usize = 1_000;

/// Parameters for the synthetic mixture generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_points: usize,
    pub n_relations: usize,
    pub dimension: usize,
    /// Coefficients are sampled uniformly from `[coefficient_low, coefficient_high)`.
    pub coefficient_low: f64,
    pub coefficient_high: f64,
    /// Standard deviation of the additive Gaussian noise on each target.
    pub noise_std: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    /// Defaults: dimension 3, coefficients in `[-3, 3)`, noise std 0.1.
    pub fn new(n_points: usize, n_relations: usize, seed: u64) -> Self {
        Self {
            n_points,
            n_relations,
            dimension: 3,
            coefficient_low: -3.0,
            coefficient_high: 3.0,
            noise_std: 0.1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points == 0 || self.n_relations == 0 || self.dimension == 0 {
            return Err(Error::InvalidInput(
                "n_points, n_relations, and dimension must be positive".into(),
            ));
        }
        if !self.coefficient_low.is_finite()
            || !self.coefficient_high.is_finite()
            || self.coefficient_low >= self.coefficient_high
        {
            return Err(Error::InvalidInput(
                "coefficient interval must be nonempty and finite".into(),
            ));
        }
        if !self.noise_std.is_finite() || self.noise_std < 0.0 {
            return Err(Error::InvalidInput(
                "noise_std must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// A generated dataset together with the relation index that produced each
/// point and the true coefficient vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSyntheticDataset {
    pub dataset: Dataset,
    /// Relation index of each point, aligned with the dataset.
    pub ground_truth: Vec<usize>,
    /// True coefficient vector of each relation.
    pub coefficients: Vec<Vec<f64>>,
}

/// Generates `n_points` observations from `n_relations` linear relations
/// `y = beta_r . x + noise`, with standard-normal features, relation blocks
/// laid out contiguously, and per-relation counts differing by at most one.
///
/// Deterministic given `config.seed`.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<LabeledSyntheticDataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let coefficients = draw_separated_coefficients(&mut rng, config)?;

    let base = config.n_points / config.n_relations;
    let extra = config.n_points % config.n_relations;
    let mut points = Vec::with_capacity(config.n_points);
    let mut ground_truth = Vec::with_capacity(config.n_points);
    for (r, beta) in coefficients.iter().enumerate() {
        let count = base + usize::from(r < extra);
        for _ in 0..count {
            let features: Vec<f64> = (0..config.dimension)
                .map(|_| rng.sample(StandardNormal))
                .collect();
            let noise: f64 = rng.sample::<f64, _>(StandardNormal) * config.noise_std;
            let target = dot(beta, &features) + noise;
            points.push(LabeledPoint::new(features, target)?);
            ground_truth.push(r);
        }
    }
    Ok(LabeledSyntheticDataset {
        dataset: Dataset::from_points(points)?,
        ground_truth,
        coefficients,
    })
}

fn draw_separated_coefficients(
    rng: &mut ChaCha8Rng,
    config: &SyntheticConfig,
) -> Result<Vec<Vec<f64>>> {
    let mut accepted: Vec<Vec<f64>> = Vec::with_capacity(config.n_relations);
    for _ in 0..config.n_relations {
        let mut attempts = 0;
        loop {
            let candidate: Vec<f64> = (0..config.dimension)
                .map(|_| rng.gen_range(config.coefficient_low..config.coefficient_high))
                .collect();
            let separated = accepted
                .iter()
                .all(|prev| squared_distance(prev, &candidate) >= MIN_COEFFICIENT_SEPARATION.powi(2));
            if separated {
                accepted.push(candidate);
                break;
            }
            attempts += 1;
            if attempts >= MAX_REJECTION_ATTEMPTS {
                return Err(Error::InvalidInput(
                    "coefficient interval too narrow to keep relations separated".into(),
                ));
            }
        }
    }
    Ok(accepted)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Fraction of points whose cluster, relabeled to the majority ground-truth
/// label among its members, disagrees with the point's own truth label.
///
/// The mapping is computed independently per cluster, so several clusters may
/// map to one truth label; this keeps the score meaningful when clustering
/// with more clusters than generating relations.
pub fn misclassification_rate(predicted: &Assignment, truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::InvalidInput(format!(
            "assignment length {} does not match truth length {}",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::InvalidInput(
            "misclassification_rate requires at least one point".into(),
        ));
    }
    let mapping = majority_labels(predicted, truth);
    let mismatched = predicted
        .labels()
        .iter()
        .zip(truth)
        .filter(|&(&cluster, &label)| mapping[cluster] != Some(label))
        .count();
    Ok(mismatched as f64 / truth.len() as f64)
}

/// Majority truth label per cluster; `None` for clusters with no members.
/// Count ties break toward the smallest truth label.
fn majority_labels(predicted: &Assignment, truth: &[usize]) -> Vec<Option<usize>> {
    let n_clusters = predicted.labels().iter().map(|&l| l + 1).max().unwrap_or(0);
    let mut counts: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); n_clusters];
    for (&cluster, &label) in predicted.labels().iter().zip(truth) {
        *counts[cluster].entry(label).or_insert(0) += 1;
    }
    counts
        .iter()
        .map(|cluster_counts| {
            let mut best: Option<(usize, usize)> = None;
            for (&label, &count) in cluster_counts {
                if best.is_none_or(|(_, best_count)| count > best_count) {
                    best = Some((label, count));
                }
            }
            best.map(|(label, _)| label)
        })
        .collect()
}

/// K-Means over feature vectors only (targets ignored): distance-proportional
/// probabilistic seeding, then Lloyd's algorithm with squared Euclidean
/// distance until the assignment reaches a fixpoint or 100 iterations.
///
/// Deterministic given `seed`.
pub fn kmeans_baseline(dataset: &Dataset, k_hat: usize, seed: u64) -> Result<Assignment> {
    let (labels, _) = kmeans_with_inertia(dataset, k_hat, seed)?;
    Assignment::new(labels, k_hat)
}

/// [`kmeans_baseline`] that also reports the inertia (total within-cluster
/// squared distance) after the initial assignment and after each Lloyd
/// iteration.
fn kmeans_with_inertia(
    dataset: &Dataset,
    k_hat: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<f64>)> {
    if k_hat == 0 {
        return Err(Error::InvalidInput("k_hat must be at least 1".into()));
    }
    if dataset.len() < k_hat {
        return Err(Error::InvalidInput(format!(
            "dataset holds {} points but k_hat = {k_hat}",
            dataset.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = seed_centers(dataset, k_hat, &mut rng);
    let mut labels = nearest_center_labels(dataset, &centers);
    let mut inertia_history = vec![inertia(dataset, &centers, &labels)];

    for _ in 0..100 {
        update_centers(dataset, &labels, &mut centers);
        let next = nearest_center_labels(dataset, &centers);
        inertia_history.push(inertia(dataset, &centers, &next));
        let fixpoint = next == labels;
        labels = next;
        if fixpoint {
            break;
        }
    }
    Ok((labels, inertia_history))
}

/// First center uniform, each subsequent center sampled proportionally to the
/// squared distance from its nearest already-chosen center.
fn seed_centers(dataset: &Dataset, k_hat: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = dataset.len();
    let first = rng.gen_range(0..n);
    let mut centers = vec![dataset.points()[first].features().to_vec()];
    let mut best_d2: Vec<f64> = dataset
        .points()
        .iter()
        .map(|p| squared_distance(p.features(), &centers[0]))
        .collect();

    while centers.len() < k_hat {
        let total: f64 = best_d2.iter().sum();
        let index = if total > 0.0 {
            let u = rng.gen::<f64>() * total;
            let mut cumulative = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in best_d2.iter().enumerate() {
                cumulative += w;
                if u < cumulative {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All points coincide with an existing center.
            rng.gen_range(0..n)
        };
        let center = dataset.points()[index].features().to_vec();
        for (i, p) in dataset.points().iter().enumerate() {
            best_d2[i] = best_d2[i].min(squared_distance(p.features(), &center));
        }
        centers.push(center);
    }
    centers
}

/// Nearest center per point; ties break toward the lowest center index.
fn nearest_center_labels(dataset: &Dataset, centers: &[Vec<f64>]) -> Vec<usize> {
    dataset
        .points()
        .iter()
        .map(|p| {
            let mut best = 0;
            let mut best_d2 = squared_distance(p.features(), &centers[0]);
            for (k, c) in centers.iter().enumerate().skip(1) {
                let d2 = squared_distance(p.features(), c);
                if d2 < best_d2 {
                    best = k;
                    best_d2 = d2;
                }
            }
            best
        })
        .collect()
}

/// Moves each center to the mean of its members; centers with no members
/// stay in place so inertia cannot increase.
fn update_centers(dataset: &Dataset, labels: &[usize], centers: &mut [Vec<f64>]) {
    let d = dataset.dimension();
    let mut sums = vec![vec![0.0; d]; centers.len()];
    let mut counts = vec![0usize; centers.len()];
    for (point, &l) in dataset.points().iter().zip(labels) {
        counts[l] += 1;
        for (s, &x) in sums[l].iter_mut().zip(point.features()) {
            *s += x;
        }
    }
    for (k, center) in centers.iter_mut().enumerate() {
        if counts[k] > 0 {
            for (c, s) in center.iter_mut().zip(&sums[k]) {
                *c = s / counts[k] as f64;
            }
        }
    }
}

fn inertia(dataset: &Dataset, centers: &[Vec<f64>], labels: &[usize]) -> f64 {
    dataset
        .points()
        .iter()
        .zip(labels)
        .map(|(p, &l)| squared_distance(p.features(), &centers[l]))
        .sum()
}
